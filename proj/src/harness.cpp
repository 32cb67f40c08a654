#include "gesture/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <set>
#include <sstream>

#include "gesture/error.hpp"
#include "gesture/nn/checkpoint.hpp"
#include "gesture/rng.hpp"

namespace gesture::harness {

namespace {

struct SettingInfo {
  Setting setting;
  const char* name;
  int space;
  const char* label;
};

constexpr SettingInfo kInfo[] = {
    {Setting::Gt3d, "gt3d", 3, "Ground truth 3D"},
    {Setting::Gt2d, "gt2d", 2, "Ground truth 2D"},
    {Setting::Gen3d, "gen3d", 3, "Generator 3D"},
    {Setting::Gen2d, "gen2d", 2, "Generator 2D"},
    {Setting::Gen2dLift, "gen2d_lift", 3, "Generator 2D + lifter"},
    {Setting::Gen3dTo2d, "gen3d_to_2d", 2, "Generator 3D -> 2D"},
    {Setting::UncondGen3d, "uncond_gen3d", 3, "Uncond. generator 3D"},
    {Setting::UncondGen2d, "uncond_gen2d", 2, "Uncond. generator 2D"},
    {Setting::UncondGen2dLift, "uncond_gen2d_lift", 3, "Uncond. generator 2D + lifter"},
    {Setting::UncondGen3dTo2d, "uncond_gen3d_to_2d", 2, "Uncond. generator 3D -> 2D"},
};

const SettingInfo& info(Setting s) {
  for (const auto& i : kInfo)
    if (i.setting == s) return i;
  throw Error(ErrorCode::ConfigInvalid, "unknown setting");
}

// Published FGD / BC / Diversity on real data, keyed like the settings.
struct Reference {
  Setting setting;
  double fgd, bc, diversity;
};

constexpr Reference kReference[] = {
    {Setting::Gt3d, 0.0, 0.702, 102.339},
    {Setting::Gen3d, 1.370, 0.659, 102.586},
    {Setting::Gen2dLift, 9.833, 0.571, 92.136},
    {Setting::Gt2d, 0.0, 0.689, 112.76},
    {Setting::Gen3dTo2d, 1.722, 0.645, 110.649},
    {Setting::Gen2d, 3.279, 0.643, 112.165},
    {Setting::UncondGen3d, 3.288, 0.683, 98.905},
    {Setting::UncondGen2dLift, 10.009, 0.595, 93.945},
    {Setting::UncondGen3dTo2d, 5.529, 0.667, 111.599},
    {Setting::UncondGen2d, 1.757, 0.653, 113.304},
};

// Generator that produces a setting's gestures, if any.
std::optional<Artifact> source_generator(Setting s) {
  switch (s) {
    case Setting::Gen3d:
    case Setting::Gen3dTo2d: return Artifact::Generator3d;
    case Setting::Gen2d:
    case Setting::Gen2dLift: return Artifact::Generator2d;
    case Setting::UncondGen3d:
    case Setting::UncondGen3dTo2d: return Artifact::UncondGenerator3d;
    case Setting::UncondGen2d:
    case Setting::UncondGen2dLift: return Artifact::UncondGenerator2d;
    default: return std::nullopt;
  }
}

bool uses_lifter(Setting s) { return s == Setting::Gen2dLift || s == Setting::UncondGen2dLift; }

bool is_generator(Artifact a) {
  return a == Artifact::Generator3d || a == Artifact::Generator2d || a == Artifact::UncondGenerator3d ||
         a == Artifact::UncondGenerator2d;
}

int generator_dims(Artifact a) {
  return (a == Artifact::Generator3d || a == Artifact::UncondGenerator3d) ? 3 : 2;
}

std::string fgd_variant_name(metrics::FgdVariant v) {
  return v == metrics::FgdVariant::Standard ? "standard" : "paper-literal";
}

metrics::FgdVariant parse_fgd_variant(const std::string& s) {
  if (s == "standard") return metrics::FgdVariant::Standard;
  if (s == "paper-literal") return metrics::FgdVariant::PaperLiteral;
  throw Error(ErrorCode::ConfigInvalid, "fgd_variant must be 'standard' or 'paper-literal', got '" + s + "'");
}

nlohmann::json encoder_json(const metrics::EncoderConfig& e) {
  return {{"latent_dim", e.latent_dim}, {"hidden", e.hidden}, {"steps", e.steps}, {"batch", e.batch}, {"lr", e.lr}};
}

void encoder_from_json(const nlohmann::json& j, metrics::EncoderConfig& e) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "encoder config must be an object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "latent_dim") e.latent_dim = value.get<int>();
      else if (key == "hidden") e.hidden = value.get<int>();
      else if (key == "steps") e.steps = value.get<int>();
      else if (key == "batch") e.batch = value.get<int>();
      else if (key == "lr") e.lr = value.get<double>();
      else throw Error(ErrorCode::ConfigInvalid, "unknown encoder key '" + key + "'");
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::ConfigInvalid, "encoder." + key + ": " + ex.what());
    }
  }
}

nlohmann::json without_seed(nlohmann::json j) {
  j.erase("seed");
  return j;
}

void reject_seed(const nlohmann::json& j, const std::string& section) {
  if (j.is_object() && j.contains("seed"))
    throw Error(ErrorCode::ConfigInvalid, section + ".seed is derived from the master seed");
}

// Module validation errors surface as ConfigInvalid with the section named.
template <typename F>
auto wrap_config(const std::string& section, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigInvalid, section + ": " + e.what());
  }
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::optional<std::string> read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Identifies the data and hyperparameters an artifact was trained from.
std::string artifact_key(const ExperimentConfig& c, Artifact a) {
  nlohmann::json j{{"artifact", artifact_name(a)},
                   {"seed", c.seed},
                   {"corpus", c.corpus},
                   {"train_fraction", c.train_fraction}};
  if (is_generator(a)) j["component"] = generator_config(c, a);
  else if (a == Artifact::Lifter) j["component"] = lifter_config(c);
  else {
    const auto e = encoder_config(c, a == Artifact::Encoder3d ? 3 : 2);
    j["component"] = encoder_json(e);
    j["component"]["seed"] = e.seed;
  }
  return nn::sha256_hex(j.dump());
}

std::filesystem::path key_path(const std::filesystem::path& p) { return p.string() + ".key"; }

bool artifact_current(const ExperimentConfig& c, Artifact a) {
  const auto path = artifact_path(c, a);
  if (!std::filesystem::exists(path)) return false;
  const auto key = read_text(key_path(path));
  return key && *key == artifact_key(c, a) + "\n";
}

template <typename T>
std::vector<T> run_all(std::vector<std::function<T()>> tasks, bool parallel) {
  std::vector<T> out;
  out.reserve(tasks.size());
  if (!parallel) {
    for (auto& t : tasks) out.push_back(t());
    return out;
  }
  std::vector<std::future<T>> futures;
  for (auto& t : tasks) futures.push_back(std::async(std::launch::async, t));
  for (auto& f : futures) out.push_back(f.get());
  return out;
}

std::vector<skeleton::PoseSequence> project_all(const std::vector<skeleton::PoseSequence>& seqs) {
  std::vector<skeleton::PoseSequence> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(skeleton::project_2d(s));
  return out;
}

struct BcResult {
  double per_sequence = 0.0;
  double beat_pooled = 0.0;
  int without_kinematic = 0;
};

// Per-sequence BC averaged over sequences; sequences without kinematic beats
// score 0. Sequences without audio beats are skipped.
BcResult beat_consistency_of(const std::vector<skeleton::PoseSequence>& poses,
                             const std::vector<const synth::SpeechTrack*>& tracks, const metrics::BCParams& p) {
  BcResult r;
  double seq_sum = 0.0, beat_sum = 0.0;
  std::size_t seq_count = 0, beat_count = 0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const metrics::BeatSet audio{tracks[i]->beat_times};
    if (audio.times.empty()) continue;
    const auto kin = metrics::extract_kinematic_beats(poses[i], p);
    double bc = 0.0;
    if (kin.times.empty()) ++r.without_kinematic;
    else bc = metrics::beat_consistency(audio, kin, p.sigma);
    seq_sum += bc;
    beat_sum += bc * static_cast<double>(audio.times.size());
    ++seq_count;
    beat_count += audio.times.size();
  }
  if (seq_count == 0) throw Error(ErrorCode::EmptyAudioBeats, "no sequence has audio beats");
  r.per_sequence = seq_sum / static_cast<double>(seq_count);
  r.beat_pooled = beat_sum / static_cast<double>(beat_count);
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view setting_name(Setting s) { return info(s).name; }

Setting parse_setting(std::string_view name) {
  for (const auto& i : kInfo)
    if (name == i.name) return i.setting;
  throw Error(ErrorCode::ConfigInvalid, "unknown setting '" + std::string(name) + "'");
}

int setting_space(Setting s) { return info(s).space; }

std::string_view artifact_name(Artifact a) {
  switch (a) {
    case Artifact::Generator3d: return "generator-3d";
    case Artifact::Generator2d: return "generator-2d";
    case Artifact::UncondGenerator3d: return "generator-3d-uncond";
    case Artifact::UncondGenerator2d: return "generator-2d-uncond";
    case Artifact::Lifter: return "lifter";
    case Artifact::Encoder3d: return "encoder-3d";
    case Artifact::Encoder2d: return "encoder-2d";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  wrap_config("corpus", [&] { corpus.validate(); });
  if (!(train_fraction > 0 && train_fraction < 1))
    throw Error(ErrorCode::ConfigInvalid, "train_fraction must be in (0, 1)");
  if (settings.empty()) throw Error(ErrorCode::ConfigInvalid, "no settings selected");
  std::set<Setting> seen;
  for (auto s : settings)
    if (!seen.insert(s).second)
      throw Error(ErrorCode::ConfigInvalid, "duplicate setting '" + std::string(setting_name(s)) + "'");
  wrap_config("generator", [&] { generator.validate(); });
  if (generator.p_uncond >= 1.0)
    throw Error(ErrorCode::ConfigInvalid, "generator.p_uncond must be below 1; uncond settings set it");
  wrap_config("lifter", [&] { lifter.validate(); });
  wrap_config("bc", [&] { bc.validate(); });
  if (encoder.latent_dim < 1 || encoder.hidden < 1 || encoder.steps < 0 || encoder.batch < 1 || !(encoder.lr > 0))
    throw Error(ErrorCode::ConfigInvalid, "encoder sizes must be positive");
  if (diversity_n < 1) throw Error(ErrorCode::ConfigInvalid, "diversity_n must be positive");
  if (samples < 2 * diversity_n)
    throw Error(ErrorCode::ConfigInvalid, "samples must be at least 2 * diversity_n");
  const int test_size = corpus.num_sequences - static_cast<int>(corpus.num_sequences * train_fraction);
  if (test_size < 2 * diversity_n)
    throw Error(ErrorCode::ConfigInvalid, "test split (" + std::to_string(test_size) +
                                              " sequences) is smaller than 2 * diversity_n");
}

std::vector<Artifact> ExperimentConfig::required_artifacts() const {
  std::set<Artifact> need;
  for (auto s : settings) {
    if (auto g = source_generator(s)) need.insert(*g);
    if (uses_lifter(s)) need.insert(Artifact::Lifter);
    need.insert(setting_space(s) == 3 ? Artifact::Encoder3d : Artifact::Encoder2d);
  }
  return {need.begin(), need.end()};
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  nlohmann::json settings = nlohmann::json::array();
  for (auto s : c.settings) settings.push_back(setting_name(s));
  j = nlohmann::json{{"seed", c.seed},
                     {"corpus", c.corpus},
                     {"train_fraction", c.train_fraction},
                     {"settings", settings},
                     {"generator", without_seed(c.generator)},
                     {"lifter", without_seed(c.lifter)},
                     {"encoder", encoder_json(c.encoder)},
                     {"bc", {{"sigma", c.bc.sigma}, {"threshold", c.bc.threshold}}},
                     {"diversity_n", c.diversity_n},
                     {"samples", c.samples},
                     {"fgd_variant", fgd_variant_name(c.fgd_variant)},
                     {"artifacts", c.artifacts.string()},
                     {"train_missing", c.train_missing},
                     {"parallel", c.parallel}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "experiment config must be an object");
  ExperimentConfig out = c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "seed") out.seed = value.get<std::uint64_t>();
      else if (key == "corpus") out.corpus = wrap_config("corpus", [&] { return value.get<synth::SynthConfig>(); });
      else if (key == "train_fraction") out.train_fraction = value.get<double>();
      else if (key == "settings") {
        if (!value.is_array()) throw Error(ErrorCode::ConfigInvalid, "settings must be an array");
        out.settings.clear();
        for (const auto& s : value) out.settings.push_back(parse_setting(s.get<std::string>()));
      } else if (key == "generator") {
        reject_seed(value, "generator");
        auto g = nlohmann::json(out.generator);
        g.update(value, true);
        out.generator = wrap_config("generator", [&] { return g.get<diffusion::GeneratorConfig>(); });
      } else if (key == "lifter") {
        reject_seed(value, "lifter");
        auto l = nlohmann::json(out.lifter);
        l.update(value, true);
        out.lifter = wrap_config("lifter", [&] { return l.get<lifter::LifterConfig>(); });
      } else if (key == "encoder") {
        encoder_from_json(value, out.encoder);
      } else if (key == "bc") {
        if (!value.is_object()) throw Error(ErrorCode::ConfigInvalid, "bc must be an object");
        for (const auto& [k, v] : value.items()) {
          if (k == "sigma") out.bc.sigma = v.get<double>();
          else if (k == "threshold") out.bc.threshold = v.get<double>();
          else throw Error(ErrorCode::ConfigInvalid, "unknown bc key '" + k + "'");
        }
      } else if (key == "diversity_n") out.diversity_n = value.get<int>();
      else if (key == "samples") out.samples = value.get<int>();
      else if (key == "fgd_variant") out.fgd_variant = parse_fgd_variant(value.get<std::string>());
      else if (key == "artifacts") out.artifacts = value.get<std::string>();
      else if (key == "train_missing") out.train_missing = value.get<bool>();
      else if (key == "parallel") out.parallel = value.get<bool>();
      else throw Error(ErrorCode::ConfigInvalid, "unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ConfigInvalid, key + ": " + e.what());
    }
  }
  c = out;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  }
  ExperimentConfig c = j.get<ExperimentConfig>();
  c.validate();
  return c;
}

std::string ExperimentConfig::hash() const {
  nlohmann::json j = *this;
  j.erase("artifacts");
  j.erase("train_missing");
  j.erase("parallel");
  return nn::sha256_hex(j.dump());
}

// ---------------------------------------------------------------------------

SeedPlan SeedPlan::from(std::uint64_t master) {
  SeedPlan p{};
  p.master = master;
  p.corpus = derive_seed(master, "corpus");
  p.split = derive_seed(master, "split");
  p.lifter = derive_seed(master, "lifter");
  p.encoder3d = derive_seed(master, "encoder-3d");
  p.encoder2d = derive_seed(master, "encoder-2d");
  p.sampling = derive_seed(master, "sampling");
  p.diversity = derive_seed(master, "diversity");
  return p;
}

std::uint64_t SeedPlan::generator(Artifact a) const { return derive_seed(master, artifact_name(a)); }

diffusion::GeneratorConfig generator_config(const ExperimentConfig& c, Artifact a) {
  if (!is_generator(a)) throw Error(ErrorCode::ConfigInvalid, "not a generator artifact");
  auto g = c.generator;
  g.dims = generator_dims(a);
  if (a == Artifact::UncondGenerator3d || a == Artifact::UncondGenerator2d) g.p_uncond = 1.0;
  g.seed = SeedPlan::from(c.seed).generator(a);
  return g;
}

lifter::LifterConfig lifter_config(const ExperimentConfig& c) {
  auto l = c.lifter;
  l.seed = SeedPlan::from(c.seed).lifter;
  return l;
}

metrics::EncoderConfig encoder_config(const ExperimentConfig& c, int space) {
  auto e = c.encoder;
  const auto plan = SeedPlan::from(c.seed);
  e.seed = space == 3 ? plan.encoder3d : plan.encoder2d;
  return e;
}

std::filesystem::path dataset_path(const ExperimentConfig& c) { return c.artifacts / "dataset.gdb"; }

std::filesystem::path artifact_path(const ExperimentConfig& c, Artifact a) {
  return c.artifacts / (std::string(artifact_name(a)) + ".ckpt");
}

synth::GestureDataset prepare_dataset(const ExperimentConfig& c) {
  const auto seed = SeedPlan::from(c.seed).corpus;
  const auto path = dataset_path(c);
  if (std::filesystem::exists(path)) {
    auto ds = synth::load_dataset(path);
    if (ds.seed == seed && ds.generator_config == c.corpus) return ds;
  }
  auto ds = synth::generate(c.corpus, skeleton::SkeletonTopology::upper_body(), seed);
  std::filesystem::create_directories(c.artifacts);
  synth::save_dataset(ds, path);
  return ds;
}

std::pair<synth::GestureDataset, synth::GestureDataset> split_dataset(const ExperimentConfig& c,
                                                                      const synth::GestureDataset& corpus) {
  return synth::split(corpus, c.train_fraction, SeedPlan::from(c.seed).split);
}

void train_artifact(const ExperimentConfig& c, const synth::GestureDataset& train, Artifact a) {
  std::filesystem::create_directories(c.artifacts);
  const auto path = artifact_path(c, a);
  if (is_generator(a)) {
    const auto cfg = generator_config(c, a);
    const auto data = cfg.dims == 3 ? train : synth::project_dataset(train);
    diffusion::train(data, cfg).save(path);
  } else if (a == Artifact::Lifter) {
    lifter::train_lifter(train, lifter_config(c)).save(path);
  } else {
    const int space = a == Artifact::Encoder3d ? 3 : 2;
    const auto poses = space == 3 ? train.poses() : project_all(train.poses());
    metrics::train_encoder(poses, encoder_config(c, space)).save(path);
  }
  write_text(key_path(path), artifact_key(c, a) + "\n");
}

// ---------------------------------------------------------------------------

MetricReport run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  const auto plan = SeedPlan::from(config.seed);

  const auto corpus = prepare_dataset(config);
  const auto parts = split_dataset(config, corpus);
  const auto& train = parts.first;
  const auto& test = parts.second;
  if (test.size() < static_cast<std::size_t>(2 * config.diversity_n))
    throw Error(ErrorCode::TooFewSamples, "test split smaller than 2 * diversity_n");

  const auto needed = config.required_artifacts();
  std::vector<std::function<int()>> training;
  for (auto a : needed) {
    if (artifact_current(config, a)) continue;
    if (!config.train_missing)
      throw Error(ErrorCode::MissingCheckpoint,
                  std::string(artifact_name(a)) + " is missing or stale at " + artifact_path(config, a).string());
    training.push_back([&config, &train, a] {
      train_artifact(config, train, a);
      return 0;
    });
  }
  run_all(std::move(training), config.parallel);

  std::map<Artifact, diffusion::TrainedGenerator> generators;
  std::optional<lifter::TrainedLifter> lifter_model;
  std::map<int, metrics::PoseEncoder> encoders;
  std::map<std::string, std::string> sha;
  nlohmann::json train_logs = nlohmann::json::object();
  for (auto a : needed) {
    const auto path = artifact_path(config, a);
    const std::string name(artifact_name(a));
    if (is_generator(a)) {
      auto g = diffusion::TrainedGenerator::load_file(path);
      sha[name] = g.checksum();
      train_logs[name] = {{"initial_heldout_loss", g.log().initial_heldout_loss},
                          {"final_heldout_loss", g.log().final_heldout_loss},
                          {"masked_fraction", g.log().masked_fraction},
                          {"steps", g.log().steps}};
      generators.emplace(a, std::move(g));
    } else if (a == Artifact::Lifter) {
      lifter_model.emplace(lifter::TrainedLifter::load_file(path));
      sha[name] = lifter_model->checksum();
      train_logs[name] = {{"initial_val_mpjpe", lifter_model->log().initial_val_mpjpe},
                          {"val_mpjpe", lifter_model->log().val_mpjpe},
                          {"steps", lifter_model->log().steps}};
    } else {
      const int space = a == Artifact::Encoder3d ? 3 : 2;
      auto e = metrics::PoseEncoder::load_file(path);
      sha[name] = e.checksum();
      encoders.emplace(space, std::move(e));
    }
  }
  if (encoders.count(3) && encoders.count(2) && encoders.at(3).checksum() == encoders.at(2).checksum())
    throw Error(ErrorCode::ConfigInvalid, "3D and 2D encoders coincide");

  // Speech tracks shared by every generated setting: test speech cycled.
  const auto test_poses3d = test.poses();
  const auto test_poses2d = project_all(test_poses3d);
  std::vector<synth::SpeechTrack> tracks;
  tracks.reserve(static_cast<std::size_t>(config.samples));
  for (int i = 0; i < config.samples; ++i) tracks.push_back(test.pairs[static_cast<std::size_t>(i) % test.size()].speech);
  std::vector<const synth::SpeechTrack*> track_ptrs, test_track_ptrs;
  for (const auto& t : tracks) track_ptrs.push_back(&t);
  for (const auto& p : test.pairs) test_track_ptrs.push_back(&p.speech);

  std::vector<Artifact> gen_order;
  std::vector<std::function<std::vector<skeleton::PoseSequence>()>> sampling;
  for (const auto& [a, g] : generators) {
    gen_order.push_back(a);
    const auto* gp = &g;
    const auto seed = derive_seed(plan.sampling, artifact_name(a));
    sampling.push_back([gp, &tracks, seed] { return gp->generate_batch(tracks, seed); });
  }
  const auto sampled = run_all(std::move(sampling), config.parallel);
  std::map<Artifact, const std::vector<skeleton::PoseSequence>*> samples_of;
  for (std::size_t i = 0; i < gen_order.size(); ++i) samples_of[gen_order[i]] = &sampled[i];

  std::optional<double> lifter_mpjpe;
  if (lifter_model) lifter_mpjpe = lifter::mpjpe(lifter_model->lift_all(test_poses2d), test_poses3d);

  std::map<int, metrics::GestureStats> reference;
  for (const auto& [space, enc] : encoders)
    reference.emplace(space, metrics::gesture_stats(enc, space == 3 ? test_poses3d : test_poses2d));

  std::vector<Setting> ordered;
  for (int space : {3, 2})
    for (auto s : kAllSettings)
      if (setting_space(s) == space && std::find(config.settings.begin(), config.settings.end(), s) != config.settings.end())
        ordered.push_back(s);

  std::vector<std::function<MetricRow()>> evaluation;
  for (auto s : ordered) {
    evaluation.push_back([&, s]() -> MetricRow {
      const std::string name(setting_name(s));
      try {
        const int space = setting_space(s);
        const auto& enc = encoders.at(space);
        MetricRow row;
        row.setting = s;
        row.space = space;
        row.n_diversity = config.diversity_n;
        row.bc_sigma = config.bc.sigma;
        row.beat_threshold = config.bc.threshold;
        row.encoder_sha = sha.at(std::string(artifact_name(space == 3 ? Artifact::Encoder3d : Artifact::Encoder2d)));
        row.seed = config.seed;
        row.checkpoints[std::string(artifact_name(space == 3 ? Artifact::Encoder3d : Artifact::Encoder2d))] =
            row.encoder_sha;

        std::vector<skeleton::PoseSequence> produced;
        const std::vector<skeleton::PoseSequence>* poses = nullptr;
        const std::vector<const synth::SpeechTrack*>* speech = &track_ptrs;
        if (s == Setting::Gt3d || s == Setting::Gt2d) {
          poses = space == 3 ? &test_poses3d : &test_poses2d;
          speech = &test_track_ptrs;
        } else {
          const auto g = *source_generator(s);
          row.checkpoints[std::string(artifact_name(g))] = sha.at(std::string(artifact_name(g)));
          const auto& raw = *samples_of.at(g);
          if (uses_lifter(s)) {
            produced = lifter_model->lift_all(raw);
            row.checkpoints["lifter"] = sha.at("lifter");
            row.mpjpe = lifter_mpjpe;
            poses = &produced;
          } else if (generator_dims(g) == 3 && space == 2) {
            produced = project_all(raw);
            poses = &produced;
          } else {
            poses = &raw;
          }
        }
        const auto latents = enc.encode_all(*poses);
        const auto stats = metrics::gesture_stats(latents);
        row.fgd = metrics::fgd(stats, reference.at(space), config.fgd_variant);
        const auto bc = beat_consistency_of(*poses, *speech, config.bc);
        row.bc = bc.per_sequence;
        row.bc_beat_pooled = bc.beat_pooled;
        row.sequences_without_kinematic_beats = bc.without_kinematic;
        row.sequences = static_cast<int>(poses->size());
        row.diversity = metrics::diversity(latents, config.diversity_n, derive_seed(plan.diversity, name));
        return row;
      } catch (const Error& e) {
        throw Error(e.code(), "setting " + name + ": " + e.what());
      }
    });
  }

  MetricReport report;
  report.rows = run_all(std::move(evaluation), config.parallel);

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  nlohmann::json rows_meta = nlohmann::json::array();
  for (const auto& r : report.rows)
    rows_meta.push_back({{"setting", setting_name(r.setting)},
                         {"space", r.space},
                         {"sequences", r.sequences},
                         {"bc_beat_pooled", r.bc_beat_pooled},
                         {"sequences_without_kinematic_beats", r.sequences_without_kinematic_beats},
                         {"checkpoints", r.checkpoints}});
  report.metadata = {
      {"config", config},
      {"config_hash", config.hash()},
      {"seeds",
       {{"master", plan.master},
        {"corpus", plan.corpus},
        {"split", plan.split},
        {"lifter", plan.lifter},
        {"encoder_3d", plan.encoder3d},
        {"encoder_2d", plan.encoder2d},
        {"sampling", plan.sampling},
        {"diversity", plan.diversity},
        {"generator_3d", plan.generator(Artifact::Generator3d)},
        {"generator_2d", plan.generator(Artifact::Generator2d)},
        {"generator_3d_uncond", plan.generator(Artifact::UncondGenerator3d)},
        {"generator_2d_uncond", plan.generator(Artifact::UncondGenerator2d)}}},
      {"train_sequences", train.size()},
      {"test_sequences", test.size()},
      {"samples_per_setting", config.samples},
      {"bc_aggregation", "mean over audio beats per sequence, then mean over sequences"},
      {"checkpoints", sha},
      {"train_logs", train_logs},
      {"lifter_test_mpjpe", lifter_mpjpe ? nlohmann::json(*lifter_mpjpe) : nlohmann::json()},
      {"rows", rows_meta},
      {"versions",
       {{"dataset", synth::GestureDataset::kVersion}, {"checkpoint", nn::ModelParams::kVersion}, {"report", 1}}},
      {"wall_time_seconds", wall}};
  return report;
}

// ---------------------------------------------------------------------------

void write_csv(const MetricReport& report, std::ostream& out) {
  out << kCsvHeader << "\n";
  for (const auto& r : report.rows) {
    out << setting_name(r.setting) << ',' << r.space << ',' << fmt(r.fgd) << ',' << fmt(r.bc) << ','
        << fmt(r.diversity) << ',' << (r.mpjpe ? fmt(*r.mpjpe) : "NA") << ',' << r.n_diversity << ','
        << fmt(r.bc_sigma) << ',' << fmt(r.beat_threshold) << ',' << r.encoder_sha << ',' << r.seed << "\n";
  }
}

std::vector<MetricRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw Error(ErrorCode::BadFormat, "unexpected CSV header");
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 11) throw Error(ErrorCode::BadFormat, "CSV row needs 11 fields: " + line);
    try {
      MetricRow r;
      r.setting = parse_setting(f[0]);
      r.space = std::stoi(f[1]);
      r.fgd = std::stod(f[2]);
      r.bc = std::stod(f[3]);
      r.diversity = std::stod(f[4]);
      if (f[5] != "NA") r.mpjpe = std::stod(f[5]);
      r.n_diversity = std::stoi(f[6]);
      r.bc_sigma = std::stod(f[7]);
      r.beat_threshold = std::stod(f[8]);
      r.encoder_sha = f[9];
      r.seed = std::stoull(f[10]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error& e) {
      throw Error(ErrorCode::BadFormat, "bad CSV row '" + line + "': " + e.what());
    }
  }
  return rows;
}

void write_markdown(const std::vector<MetricRow>& rows, const nlohmann::json& metadata, std::ostream& out) {
  auto find = [&](Setting s) -> const MetricRow* {
    for (const auto& r : rows)
      if (r.setting == s) return &r;
    return nullptr;
  };
  auto reference = [](Setting s) -> const Reference* {
    for (const auto& r : kReference)
      if (r.setting == s) return &r;
    return nullptr;
  };
  std::vector<std::string> notes;
  std::map<Setting, std::size_t> note_index;
  auto block = [&](const std::string& title, std::initializer_list<Setting> settings) {
    std::vector<const MetricRow*> present;
    for (auto s : settings)
      if (const auto* r = find(s)) present.push_back(r);
    if (present.empty()) return;
    out << "### " << title << "\n\n";
    out << "| Setting | FGD (lower is better) | BC (higher is better) | Diversity (higher is better) | MPJPE |\n";
    out << "|---|---:|---:|---:|---:|\n";
    for (const auto* r : present) {
      std::string label = info(r->setting).label;
      if (const auto* ref = reference(r->setting)) {
        if (!note_index.count(r->setting)) {
          notes.push_back(label + ": FGD " + fixed(ref->fgd, 3) + ", BC " + fixed(ref->bc, 3) + ", Diversity " +
                          fixed(ref->diversity, 3));
          note_index[r->setting] = notes.size();
        }
        label += " [^" + std::to_string(note_index.at(r->setting)) + "]";
      }
      out << "| " << label << " | " << fixed(r->fgd, 3) << " | " << fixed(r->bc, 3) << " | "
          << fixed(r->diversity, 3) << " | " << (r->mpjpe ? fixed(*r->mpjpe, 4) : "-") << " |\n";
    }
    out << "\n";
  };

  out << "# Gesture generation report\n\n";
  if (metadata.is_object()) {
    if (metadata.contains("config_hash"))
      out << "Config hash: `" << metadata.at("config_hash").get<std::string>() << "`\n\n";
    if (metadata.contains("samples_per_setting") && metadata.contains("test_sequences"))
      out << "Generated settings use " << metadata.at("samples_per_setting").get<int>()
          << " samples each; ground truth rows use the " << metadata.at("test_sequences").get<int>()
          << " test sequences.\n\n";
  }
  if (!rows.empty())
    out << "Master seed " << rows.front().seed << ", diversity subset size " << rows.front().n_diversity
        << ", BC sigma " << fmt(rows.front().bc_sigma) << " s, beat threshold " << fmt(rows.front().beat_threshold)
        << " rad/frame.\n\n";

  out << "## Speech-conditioned generation\n\n";
  block("Evaluation on the 3D gesture space", {Setting::Gt3d, Setting::Gen3d, Setting::Gen2dLift});
  block("Evaluation on the 2D gesture space", {Setting::Gt2d, Setting::Gen3dTo2d, Setting::Gen2d});
  out << "## Unconditional ablation\n\n";
  block("Evaluation on the 3D gesture space", {Setting::Gt3d, Setting::UncondGen3d, Setting::UncondGen2dLift});
  block("Evaluation on the 2D gesture space", {Setting::Gt2d, Setting::UncondGen3dTo2d, Setting::UncondGen2d});

  if (!notes.empty()) {
    out << "Footnotes give published values measured on real TED gesture data with a different encoder. "
           "They are context for reading the ordering, not targets for this synthetic corpus.\n\n";
    for (std::size_t i = 0; i < notes.size(); ++i) out << "[^" << i + 1 << "]: " << notes[i] << "\n";
  }
}

void write_report(const MetricReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream csv, md;
  write_csv(report, csv);
  write_markdown(report.rows, report.metadata, md);
  write_text(dir / "results.csv", csv.str());
  write_text(dir / "metadata.json", report.metadata.dump(2) + "\n");
  write_text(dir / "report.md", md.str());
}

}  // namespace gesture::harness
