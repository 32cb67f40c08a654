#include "gesture/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "gesture/binary_io.hpp"
#include "gesture/error.hpp"
#include "gesture/rng.hpp"

namespace gesture::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Cumulative raised-cosine velocity bump: velocities (0.5, 1, 0.5) on the
// frames (k-1, k, k+1) relative to the beat frame k.
double pulse_displacement(int offset) {
  if (offset <= -2) return 0.0;
  if (offset == -1) return 0.5;
  if (offset == 0) return 1.5;
  return 2.0;
}

double energy_bump(int offset) {
  if (offset == 0) return 1.0;
  if (offset == -1 || offset == 1) return 0.5;
  return 0.0;
}

std::vector<double> random_beats(const SynthConfig& c, Rng& rng) {
  const double first = 2.0 / c.fps;
  const double last = (c.seq_len - 2) / c.fps;
  const double period = 1.0 / c.beat_rate_hz;
  std::vector<double> beats;
  double t = first + uniform(rng, 0.0, std::min(period, last - first));
  while (t <= last) {
    const int frame = beat_frame(t, c.fps);
    if (beats.empty() || frame - beat_frame(beats.back(), c.fps) >= 4) beats.push_back(t);
    t += period * uniform(rng, 0.75, 1.25);
  }
  return beats;
}

struct RestPose {
  std::vector<double> polar;    // angle from the depth axis
  std::vector<double> azimuth;  // angle in the image plane
};

RestPose make_rest_pose(int bones, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "rest-pose"));
  RestPose rest;
  for (int b = 0; b < bones; ++b) {
    rest.polar.push_back(uniform(rng, 0.45, 0.8));
    rest.azimuth.push_back(uniform(rng, 0.0, kTwoPi));
  }
  return rest;
}

GesturePair make_pair(const SynthConfig& c, int bones, const RestPose& rest, std::uint64_t seed) {
  Rng rng(seed);
  const int n = c.seq_len;

  std::vector<double> beats = c.fixed_beat_times.empty() ? random_beats(c, rng) : c.fixed_beat_times;

  // Per-bone angle tracks: smooth oscillation around a styled rest pose.
  std::vector<double> polar(static_cast<std::size_t>(n * bones));
  std::vector<double> azimuth(polar.size());
  std::vector<double> polar_rest(static_cast<std::size_t>(bones));
  for (int b = 0; b < bones; ++b) {
    const double style = uniform(rng, -0.1, 0.1);
    const double amp_p = c.baseline_motion_amplitude * uniform(rng, 0.5, 1.0);
    const double amp_a = c.baseline_motion_amplitude * uniform(rng, 0.5, 1.0);
    const double freq_p = uniform(rng, 0.3, 0.7);
    const double freq_a = uniform(rng, 0.3, 0.7);
    const double phase_p = uniform(rng, 0.0, kTwoPi);
    const double phase_a = uniform(rng, 0.0, kTwoPi);
    polar_rest[static_cast<std::size_t>(b)] = rest.polar[static_cast<std::size_t>(b)] + style;
    for (int f = 0; f < n; ++f) {
      const double t = f / c.fps;
      const std::size_t i = static_cast<std::size_t>(f * bones + b);
      polar[i] = polar_rest[static_cast<std::size_t>(b)] + amp_p * std::sin(kTwoPi * freq_p * t + phase_p);
      azimuth[i] = rest.azimuth[static_cast<std::size_t>(b)] + amp_a * std::sin(kTwoPi * freq_a * t + phase_a);
    }
  }

  // Beat pulses push each bone back toward its rest angles so the pose stays
  // bounded. The step is split evenly between the polar and azimuthal
  // directions, so the 3D angle moves by pulse_amplitude per unit of
  // displacement and the projected direction moves too.
  const double split = std::sqrt(0.5);
  for (double bt : beats) {
    const int k = beat_frame(bt, c.fps);
    for (int b = 0; b < bones; ++b) {
      const std::size_t before = static_cast<std::size_t>(std::max(k - 2, 0) * bones + b);
      const double sign_p = polar[before] > polar_rest[static_cast<std::size_t>(b)] ? -1.0 : 1.0;
      const double sign_a = azimuth[before] > rest.azimuth[static_cast<std::size_t>(b)] ? -1.0 : 1.0;
      const double step_a = split * c.pulse_amplitude / std::sin(polar[before]);
      for (int f = std::max(k - 1, 0); f < n; ++f) {
        const std::size_t i = static_cast<std::size_t>(f * bones + b);
        polar[i] += sign_p * split * c.pulse_amplitude * pulse_displacement(f - k);
        azimuth[i] += sign_a * step_a * pulse_displacement(f - k);
      }
    }
  }

  PoseSequence pose(n, bones, 3, c.fps);
  for (int f = 0; f < n; ++f)
    for (int b = 0; b < bones; ++b) {
      const std::size_t i = static_cast<std::size_t>(f * bones + b);
      const double s = std::sin(polar[i]);
      pose.at(f, b, 0) = s * std::cos(azimuth[i]);
      pose.at(f, b, 1) = s * std::sin(azimuth[i]);
      pose.at(f, b, 2) = std::cos(polar[i]);
    }
  if (c.noise_std > 0.0) {
    for (double& x : pose.data) x += c.noise_std * standard_normal(rng);
    skeleton::renormalize(pose);
  }

  SpeechTrack speech;
  speech.frames = n;
  speech.feature_dim = c.feature_dim;
  speech.fps = c.fps;
  speech.beat_times = beats;
  speech.features.assign(static_cast<std::size_t>(n * c.feature_dim), 0.0);
  const double env_freq = uniform(rng, 0.2, 0.6);
  const double env_phase = uniform(rng, 0.0, kTwoPi);
  std::vector<double> band_freq(static_cast<std::size_t>(std::max(c.feature_dim - 2, 0)));
  std::vector<double> band_phase(band_freq.size());
  for (std::size_t k = 0; k < band_freq.size(); ++k) {
    band_freq[k] = uniform(rng, 0.5, 2.0);
    band_phase[k] = uniform(rng, 0.0, kTwoPi);
  }
  std::vector<double> energy(static_cast<std::size_t>(n));
  for (int f = 0; f < n; ++f) {
    const double t = f / c.fps;
    double e = 0.1 + 0.05 * (1.0 + std::sin(kTwoPi * env_freq * t + env_phase));
    for (double bt : beats) e += energy_bump(f - beat_frame(bt, c.fps));
    energy[static_cast<std::size_t>(f)] = e;
  }
  for (int f = 0; f < n; ++f) {
    const double t = f / c.fps;
    double* row = speech.features.data() + static_cast<std::size_t>(f * c.feature_dim);
    row[0] = energy[static_cast<std::size_t>(f)];
    if (c.feature_dim > 1)
      row[1] = f == 0 ? 0.0 : energy[static_cast<std::size_t>(f)] - energy[static_cast<std::size_t>(f - 1)];
    for (int k = 2; k < c.feature_dim; ++k)
      row[k] = 0.5 * std::sin(kTwoPi * band_freq[static_cast<std::size_t>(k - 2)] * t +
                              band_phase[static_cast<std::size_t>(k - 2)]);
    for (int k = 0; k < c.feature_dim; ++k) row[k] += 0.01 * standard_normal(rng);
  }

  // The mirror coin comes from its own substream so both completions of a
  // pair share every other draw.
  if (c.ambiguity_mode == AmbiguityMode::Mirror) {
    Rng coin(derive_seed(seed, "mirror"));
    if (uniform(coin, 0.0, 1.0) < c.ambiguity_mix)
      for (int f = 0; f < n; ++f)
        for (int b = 0; b < bones; ++b) pose.at(f, b, 2) = -pose.at(f, b, 2);
  }

  for (double& x : pose.data) x = io::to_f32(x);
  for (double& x : speech.features) x = io::to_f32(x);
  return {std::move(pose), std::move(speech)};
}

}  // namespace

int beat_frame(double time, double fps) { return static_cast<int>(std::lround(time * fps)); }

void SynthConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (num_sequences <= 0) fail("num_sequences must be positive");
  if (seq_len < 5) fail("seq_len must be at least 5");
  if (!(fps > 0)) fail("fps must be positive");
  if (feature_dim < 1) fail("feature_dim must be positive");
  if (!(beat_rate_hz > 0)) fail("beat_rate_hz must be positive");
  if (!(pulse_amplitude >= 0)) fail("pulse_amplitude must be non-negative");
  if (!(baseline_motion_amplitude >= 0)) fail("baseline_motion_amplitude must be non-negative");
  if (!(noise_std >= 0)) fail("noise_std must be non-negative");
  if (!(ambiguity_mix >= 0 && ambiguity_mix <= 1)) fail("ambiguity_mix must lie in [0, 1]");
  for (std::size_t i = 0; i < fixed_beat_times.size(); ++i) {
    const double t = fixed_beat_times[i];
    const int k = beat_frame(t, fps);
    if (!(t >= 0 && t < seq_len / fps) || k < 2 || k > seq_len - 2)
      fail("fixed beat time out of range");
    if (i > 0 && !(t > fixed_beat_times[i - 1])) fail("fixed beat times must be strictly increasing");
  }
}

void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = nlohmann::json{{"num_sequences", c.num_sequences},
                     {"seq_len", c.seq_len},
                     {"fps", c.fps},
                     {"feature_dim", c.feature_dim},
                     {"beat_rate_hz", c.beat_rate_hz},
                     {"pulse_amplitude", c.pulse_amplitude},
                     {"baseline_motion_amplitude", c.baseline_motion_amplitude},
                     {"ambiguity_mode", c.ambiguity_mode == AmbiguityMode::Mirror ? "mirror" : "none"},
                     {"ambiguity_mix", c.ambiguity_mix},
                     {"noise_std", c.noise_std},
                     {"fixed_beat_times", c.fixed_beat_times}};
}

void from_json(const nlohmann::json& j, SynthConfig& c) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "corpus config must be an object");
  SynthConfig out;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "num_sequences") out.num_sequences = value.get<int>();
      else if (key == "seq_len") out.seq_len = value.get<int>();
      else if (key == "fps") out.fps = value.get<double>();
      else if (key == "feature_dim") out.feature_dim = value.get<int>();
      else if (key == "beat_rate_hz") out.beat_rate_hz = value.get<double>();
      else if (key == "pulse_amplitude") out.pulse_amplitude = value.get<double>();
      else if (key == "baseline_motion_amplitude") out.baseline_motion_amplitude = value.get<double>();
      else if (key == "ambiguity_mix") out.ambiguity_mix = value.get<double>();
      else if (key == "noise_std") out.noise_std = value.get<double>();
      else if (key == "fixed_beat_times") out.fixed_beat_times = value.get<std::vector<double>>();
      else if (key == "ambiguity_mode") {
        const auto mode = value.get<std::string>();
        if (mode == "mirror") out.ambiguity_mode = AmbiguityMode::Mirror;
        else if (mode == "none") out.ambiguity_mode = AmbiguityMode::None;
        else throw Error(ErrorCode::ConfigInvalid, "ambiguity_mode must be none or mirror");
      } else {
        throw Error(ErrorCode::ConfigInvalid, "unknown corpus key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ConfigInvalid, "corpus." + key + ": " + e.what());
    }
  }
  c = std::move(out);
}

std::vector<PoseSequence> GestureDataset::poses() const {
  std::vector<PoseSequence> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.pose);
  return out;
}

std::vector<SpeechTrack> GestureDataset::speech() const {
  std::vector<SpeechTrack> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.speech);
  return out;
}

GestureDataset generate(const SynthConfig& config, const SkeletonTopology& topo, std::uint64_t seed) {
  config.validate();
  GestureDataset ds;
  ds.fps = config.fps;
  ds.seq_len = config.seq_len;
  ds.bone_count = topo.bone_count();
  ds.dims = 3;
  ds.feature_dim = config.feature_dim;
  ds.seed = seed;
  ds.generator_config = config;

  const RestPose rest = make_rest_pose(topo.bone_count(), seed);
  ds.pairs.reserve(static_cast<std::size_t>(config.num_sequences));
  for (int i = 0; i < config.num_sequences; ++i)
    ds.pairs.push_back(make_pair(config, topo.bone_count(), rest, derive_seed(seed, static_cast<std::uint64_t>(i))));
  return ds;
}

std::pair<GestureDataset, GestureDataset> split(const GestureDataset& dataset, double train_fraction,
                                                std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorCode::InvalidFraction, "train_fraction must lie in (0, 1)");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(dataset.size())));

  GestureDataset train = dataset;
  GestureDataset rest = dataset;
  train.pairs.clear();
  rest.pairs.clear();
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? train : rest).pairs.push_back(dataset.pairs[order[i]]);
  return {std::move(train), std::move(rest)};
}

GestureDataset project_dataset(const GestureDataset& dataset) {
  if (dataset.dims != 3) throw Error(ErrorCode::DimensionMismatch, "dataset is already 2D");
  GestureDataset out = dataset;
  out.dims = 2;
  for (auto& p : out.pairs) p.pose = skeleton::project_2d(p.pose);
  return out;
}

void write_dataset(const GestureDataset& ds, std::ostream& out) {
  io::write_magic(out, "GDB1");
  io::write_le<std::uint32_t>(out, ds.version);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.size()));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.seq_len));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.bone_count));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.dims));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.feature_dim));
  io::write_le<float>(out, static_cast<float>(ds.fps));
  io::write_le<std::uint64_t>(out, ds.seed);
  for (const auto& p : ds.pairs) {
    if (p.pose.frames != ds.seq_len || p.pose.bone_count != ds.bone_count || p.pose.dims != ds.dims ||
        p.speech.frames != ds.seq_len || p.speech.feature_dim != ds.feature_dim)
      throw Error(ErrorCode::DimensionMismatch, "pair shape differs from dataset header");
    for (double x : p.pose.data) io::write_le<float>(out, static_cast<float>(x));
    for (double x : p.speech.features) io::write_le<float>(out, static_cast<float>(x));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.speech.beat_times.size()));
    for (double t : p.speech.beat_times) io::write_le<double>(out, t);
  }
}

GestureDataset read_dataset(std::istream& in) {
  io::expect_magic(in, "GDB1");
  GestureDataset ds;
  ds.version = io::read_le<std::uint32_t>(in);
  if (ds.version != GestureDataset::kVersion)
    throw Error(ErrorCode::BadFormat, "unsupported dataset version " + std::to_string(ds.version));
  const auto count = io::read_le<std::uint32_t>(in);
  ds.seq_len = static_cast<int>(io::read_le<std::uint32_t>(in));
  ds.bone_count = static_cast<int>(io::read_le<std::uint32_t>(in));
  ds.dims = static_cast<int>(io::read_le<std::uint32_t>(in));
  ds.feature_dim = static_cast<int>(io::read_le<std::uint32_t>(in));
  ds.fps = static_cast<double>(io::read_le<float>(in));
  ds.seed = io::read_le<std::uint64_t>(in);
  if (ds.dims != 2 && ds.dims != 3) throw Error(ErrorCode::BadFormat, "dims must be 2 or 3");
  ds.pairs.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    GesturePair p;
    p.pose = PoseSequence(ds.seq_len, ds.bone_count, ds.dims, ds.fps);
    for (double& x : p.pose.data) x = io::read_le<float>(in);
    p.speech.frames = ds.seq_len;
    p.speech.feature_dim = ds.feature_dim;
    p.speech.fps = ds.fps;
    p.speech.features.resize(static_cast<std::size_t>(ds.seq_len * ds.feature_dim));
    for (double& x : p.speech.features) x = io::read_le<float>(in);
    const auto beats = io::read_le<std::uint32_t>(in);
    p.speech.beat_times.resize(beats);
    for (double& t : p.speech.beat_times) t = io::read_le<double>(in);
    ds.pairs.push_back(std::move(p));
  }
  return ds;
}

void save_dataset(const GestureDataset& ds, const std::filesystem::path& path) {
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    write_dataset(ds, out);
  }
  nlohmann::json side{{"format", "GDB1"},
                      {"version", ds.version},
                      {"seed", ds.seed},
                      {"dims", ds.dims},
                      {"sequences", ds.size()},
                      {"generator_config", ds.generator_config}};
  std::ofstream js(path.string() + ".json", std::ios::trunc);
  if (!js) throw Error(ErrorCode::Io, "cannot write sidecar for " + path.string());
  js << side.dump(2) << "\n";
}

GestureDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  GestureDataset ds = read_dataset(in);
  std::ifstream js(path.string() + ".json");
  if (js) {
    const auto side = nlohmann::json::parse(js);
    if (side.contains("generator_config")) ds.generator_config = side.at("generator_config").get<SynthConfig>();
  }
  if (static_cast<float>(ds.generator_config.fps) == static_cast<float>(ds.fps)) ds.fps = ds.generator_config.fps;
  for (auto& p : ds.pairs) {
    p.pose.fps = ds.fps;
    p.speech.fps = ds.fps;
  }
  return ds;
}

}  // namespace gesture::synth
