#include "gesture/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <fstream>

#include "gesture/binary_io.hpp"
#include "gesture/error.hpp"
#include "gesture/nn/optim.hpp"
#include "gesture/pose_tensor.hpp"
#include "gesture/rng.hpp"

namespace gesture::diffusion {

namespace {

constexpr std::size_t kChunk = 64;

void check_step(int t, const DiffusionSchedule& s) {
  if (t < 0 || t >= s.steps)
    throw Error(ErrorCode::StepOutOfRange, "step " + std::to_string(t) + " outside [0, " + std::to_string(s.steps) + ")");
}

Tensor normal_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = standard_normal(rng);
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------

DiffusionSchedule DiffusionSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw Error(ErrorCode::InvalidConfig, "schedule needs at least one step");
  DiffusionSchedule s;
  s.steps = steps;
  const double scale = 1000.0 / steps;
  const double lo = beta_start * scale;
  const double hi = beta_end * scale;
  double running = 1.0;
  for (int t = 0; t < steps; ++t) {
    const double beta = std::min(0.999, steps == 1 ? hi : lo + (hi - lo) * t / (steps - 1));
    s.beta.push_back(beta);
    s.alpha.push_back(1.0 - beta);
    running *= 1.0 - beta;
    s.alpha_bar.push_back(running);
  }
  s.validate();
  return s;
}

void DiffusionSchedule::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, "schedule: " + why); };
  if (steps < 1 || beta.size() != static_cast<std::size_t>(steps) || alpha.size() != beta.size() ||
      alpha_bar.size() != beta.size())
    fail("size mismatch");
  for (int t = 0; t < steps; ++t) {
    const auto i = static_cast<std::size_t>(t);
    if (!(beta[i] > 0.0 && beta[i] < 1.0)) fail("beta outside (0, 1)");
    if (t > 0 && !(alpha_bar[i] < alpha_bar[i - 1])) fail("alpha_bar not strictly decreasing");
  }
  if (!(alpha_bar.back() < 0.01)) fail("terminal alpha_bar must be below 0.01");
}

Tensor forward_sample(const Tensor& x0, int t, const Tensor& eps, const DiffusionSchedule& schedule) {
  check_step(t, schedule);
  nn::require_same_shape(x0, eps, "forward_sample");
  const double a = std::sqrt(schedule.alpha_bar[static_cast<std::size_t>(t)]);
  const double b = std::sqrt(1.0 - schedule.alpha_bar[static_cast<std::size_t>(t)]);
  Tensor out(x0.shape());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

Tensor guided_eps(const Tensor& eps_cond, const Tensor& eps_uncond, double w) {
  nn::require_same_shape(eps_cond, eps_uncond, "guided_eps");
  if (!(w >= 0.0)) throw Error(ErrorCode::InvalidConfig, "guidance weight must be non-negative");
  Tensor out(eps_cond.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 + w) * eps_cond[i] - w * eps_uncond[i];
  return out;
}

Tensor sample_step(const Tensor& x_t, int t, const Tensor& eps_hat, const DiffusionSchedule& schedule,
                   const Tensor& z) {
  check_step(t, schedule);
  nn::require_same_shape(x_t, eps_hat, "sample_step eps");
  nn::require_same_shape(x_t, z, "sample_step noise");
  const auto i = static_cast<std::size_t>(t);
  if (t == 0 && std::any_of(z.values().begin(), z.values().end(), [](double v) { return v != 0.0; }))
    throw Error(ErrorCode::NoiseAtFinalStep, "z must be zero at t = 0");
  const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha[i]);
  const double eps_coef = schedule.beta[i] / std::sqrt(1.0 - schedule.alpha_bar[i]);
  const double sigma = std::sqrt(schedule.beta[i]);
  Tensor out(x_t.shape());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = inv_sqrt_alpha * (x_t[k] - eps_coef * eps_hat[k]) + sigma * z[k];
  return out;
}

// ---------------------------------------------------------------------------

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, "generator: " + why); };
  if (dims != 2 && dims != 3) fail("dims must be 2 or 3");
  if (!(p_uncond >= 0.0 && p_uncond <= 1.0)) fail("p_uncond must lie in [0, 1]");
  if (!(guidance_weight >= 0.0)) fail("guidance_weight must be non-negative");
  if (steps < 1) fail("steps must be positive");
  if (schedule != "linear") fail("unknown schedule '" + schedule + "'");
  if (!(beta_start > 0 && beta_end >= beta_start)) fail("invalid beta range");
  if (denoiser.model_dim < 1 || denoiser.heads < 1 || denoiser.model_dim % denoiser.heads != 0)
    fail("model_dim must be a positive multiple of heads");
  if (denoiser.blocks < 0 || denoiser.mlp_hidden < 1 || denoiser.cond_hidden < 1 || denoiser.cond_embed < 1 ||
      denoiser.time_embed < 2)
    fail("invalid denoiser widths");
  if (!(lr > 0) || batch < 1 || train_steps < 0) fail("invalid training hyper-parameters");
}

DiffusionSchedule GeneratorConfig::make_schedule() const { return DiffusionSchedule::linear(steps, beta_start, beta_end); }

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = nlohmann::json{{"dims", c.dims},
                     {"p_uncond", c.p_uncond},
                     {"guidance_weight", c.guidance_weight},
                     {"steps", c.steps},
                     {"schedule", c.schedule},
                     {"beta_start", c.beta_start},
                     {"beta_end", c.beta_end},
                     {"denoiser",
                      {{"model_dim", c.denoiser.model_dim},
                       {"heads", c.denoiser.heads},
                       {"blocks", c.denoiser.blocks},
                       {"mlp_hidden", c.denoiser.mlp_hidden},
                       {"cond_hidden", c.denoiser.cond_hidden},
                       {"cond_embed", c.denoiser.cond_embed},
                       {"time_embed", c.denoiser.time_embed}}},
                     {"lr", c.lr},
                     {"batch", c.batch},
                     {"train_steps", c.train_steps},
                     {"post_normalize", c.post_normalize},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "generator config must be an object");
  GeneratorConfig out = c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "dims") out.dims = value.get<int>();
      else if (key == "p_uncond") out.p_uncond = value.get<double>();
      else if (key == "guidance_weight") out.guidance_weight = value.get<double>();
      else if (key == "steps") out.steps = value.get<int>();
      else if (key == "schedule") out.schedule = value.get<std::string>();
      else if (key == "beta_start") out.beta_start = value.get<double>();
      else if (key == "beta_end") out.beta_end = value.get<double>();
      else if (key == "lr") out.lr = value.get<double>();
      else if (key == "batch") out.batch = value.get<int>();
      else if (key == "train_steps") out.train_steps = value.get<int>();
      else if (key == "post_normalize") out.post_normalize = value.get<bool>();
      else if (key == "seed") out.seed = value.get<std::uint64_t>();
      else if (key == "denoiser") {
        if (!value.is_object()) throw Error(ErrorCode::ConfigInvalid, "generator.denoiser must be an object");
        for (const auto& [k, v] : value.items()) {
          if (k == "model_dim") out.denoiser.model_dim = v.get<int>();
          else if (k == "heads") out.denoiser.heads = v.get<int>();
          else if (k == "blocks") out.denoiser.blocks = v.get<int>();
          else if (k == "mlp_hidden") out.denoiser.mlp_hidden = v.get<int>();
          else if (k == "cond_hidden") out.denoiser.cond_hidden = v.get<int>();
          else if (k == "cond_embed") out.denoiser.cond_embed = v.get<int>();
          else if (k == "time_embed") out.denoiser.time_embed = v.get<int>();
          else throw Error(ErrorCode::ConfigInvalid, "unknown generator.denoiser key '" + k + "'");
        }
      } else {
        throw Error(ErrorCode::ConfigInvalid, "unknown generator key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ConfigInvalid, "generator." + key + ": " + e.what());
    }
  }
  c = out;
}

// ---------------------------------------------------------------------------

Denoiser::Denoiser(int pose_width, int feature_dim, const DenoiserSpec& spec)
    : pose_width_(pose_width), feature_dim_(feature_dim), spec_(spec),
      null_embedding_{"denoiser.null_embedding", Tensor({std::size_t(spec.cond_embed)}),
                      Tensor({std::size_t(spec.cond_embed)})} {
  using nn::LayerSpec;
  cond_encoder_.add(LayerSpec::conv1d(feature_dim, spec.cond_hidden, 3), "denoiser.cond.conv1")
      .add(LayerSpec::act(nn::ActivationKind::Gelu), "denoiser.cond.act")
      .add(LayerSpec::conv1d(spec.cond_hidden, spec.cond_embed, 3), "denoiser.cond.conv2");
  trunk_.add(LayerSpec::conv1d(pose_width + spec.cond_embed + spec.time_embed, spec.model_dim, 3, 1, nn::Padding::Edge), "denoiser.in");
  for (int b = 0; b < spec.blocks; ++b)
    trunk_.add(LayerSpec::attention(spec.model_dim, spec.heads, spec.mlp_hidden, b == 0),
               "denoiser.block" + std::to_string(b));
  trunk_.add(LayerSpec::layer_norm(spec.model_dim), "denoiser.out_norm")
      .add(LayerSpec::dense(spec.model_dim, pose_width), "denoiser.out");
}

void Denoiser::init(Rng& rng) {
  cond_encoder_.init(rng);
  const double bound = std::sqrt(1.0 / spec_.cond_embed);
  for (double& v : null_embedding_.value.values()) v = uniform(rng, -bound, bound);
  trunk_.init(rng);
}

std::vector<nn::Parameter*> Denoiser::parameters() {
  auto out = cond_encoder_.parameters();
  out.push_back(&null_embedding_);
  for (auto* p : trunk_.parameters()) out.push_back(p);
  return out;
}

Tensor Denoiser::assemble(const Tensor& x_t, std::span<const int> steps, const Tensor& cond_embedded,
                          const std::vector<char>& masked) const {
  if (x_t.rank() != 3 || x_t.dim(2) != static_cast<std::size_t>(pose_width_))
    throw Error(ErrorCode::ShapeMismatch, "denoiser input must be [B, N, " + std::to_string(pose_width_) + "]");
  const std::size_t batch = x_t.dim(0), frames = x_t.dim(1);
  if (steps.size() != batch || masked.size() != batch)
    throw Error(ErrorCode::ShapeMismatch, "one step and mask flag per batch element required");
  const auto e = static_cast<std::size_t>(spec_.cond_embed);
  const auto tw = static_cast<std::size_t>(spec_.time_embed);
  const auto w = static_cast<std::size_t>(pose_width_);
  const std::size_t width = w + e + tw;
  Tensor out({batch, frames, width});
  std::vector<double> temb(tw);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < tw; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(tw));
      const double arg = steps[b] * rate;
      temb[i] = (i % 2 == 0) ? std::sin(arg) : std::cos(arg);
    }
    for (std::size_t f = 0; f < frames; ++f) {
      double* row = out.data() + (b * frames + f) * width;
      const double* x = x_t.data() + (b * frames + f) * w;
      std::copy(x, x + w, row);
      const double* c = masked[b] ? null_embedding_.value.data() : cond_embedded.data() + (b * frames + f) * e;
      std::copy(c, c + e, row + w);
      std::copy(temb.begin(), temb.end(), row + w + e);
    }
  }
  return out;
}

Tensor Denoiser::forward(const Tensor& x_t, std::span<const int> steps, const Tensor& cond,
                         const std::vector<char>& masked) const {
  const bool any_cond = std::any_of(masked.begin(), masked.end(), [](char m) { return !m; });
  Tensor embedded;
  if (any_cond) {
    if (cond.rank() != 3 || cond.dim(0) != x_t.dim(0) || cond.dim(1) != x_t.dim(1))
      throw Error(ErrorCode::FrameMismatch, "speech features must be [B, N, F] aligned with poses");
    embedded = cond_encoder_.forward(cond);
  }
  return trunk_.forward(assemble(x_t, steps, embedded, masked));
}

Tensor Denoiser::forward_train(const Tensor& x_t, std::span<const int> steps, const Tensor& cond,
                               const std::vector<char>& masked) {
  const bool any_cond = std::any_of(masked.begin(), masked.end(), [](char m) { return !m; });
  Tensor embedded;
  if (any_cond) {
    if (cond.rank() != 3 || cond.dim(0) != x_t.dim(0) || cond.dim(1) != x_t.dim(1))
      throw Error(ErrorCode::FrameMismatch, "speech features must be [B, N, F] aligned with poses");
    embedded = cond_encoder_.forward_train(cond);
  }
  masked_cache_ = masked;
  has_cache_ = true;
  return trunk_.forward_train(assemble(x_t, steps, embedded, masked));
}

void Denoiser::backward(const Tensor& grad_out) {
  if (!has_cache_) throw Error(ErrorCode::NoForwardState, "denoiser backward without forward_train");
  const Tensor g = trunk_.backward(grad_out);
  const std::size_t batch = g.dim(0), frames = g.dim(1), width = g.dim(2);
  const auto w = static_cast<std::size_t>(pose_width_);
  const auto e = static_cast<std::size_t>(spec_.cond_embed);
  const bool any_cond = std::any_of(masked_cache_.begin(), masked_cache_.end(), [](char m) { return !m; });
  Tensor gcond({batch, frames, e});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t f = 0; f < frames; ++f) {
      const double* src = g.data() + (b * frames + f) * width + w;
      if (masked_cache_[b]) {
        for (std::size_t k = 0; k < e; ++k) null_embedding_.grad[k] += src[k];
      } else {
        std::copy(src, src + e, gcond.data() + (b * frames + f) * e);
      }
    }
  if (any_cond) cond_encoder_.backward(gcond);
  has_cache_ = false;
}

// ---------------------------------------------------------------------------

TrainedGenerator::TrainedGenerator(GeneratorConfig config, int frames, int bone_count, int feature_dim, double fps)
    : config_(std::move(config)), frames_(frames), bone_count_(bone_count), feature_dim_(feature_dim), fps_(fps) {
  config_.validate();
  schedule_ = config_.make_schedule();
  const int width = bone_count * config_.dims;
  denoiser_ = std::make_unique<Denoiser>(width, feature_dim, config_.denoiser);
  data_mean_ = {"data.mean", Tensor({std::size_t(width)}), Tensor({std::size_t(width)})};
  data_std_ = {"data.std", Tensor({std::size_t(width)}, 1.0), Tensor({std::size_t(width)})};
  Rng rng(derive_seed(config_.seed, "generator-init"));
  denoiser_->init(rng);
  nn::round_to_f32(denoiser_->parameters());
}

Tensor TrainedGenerator::normalize(const Tensor& x) const {
  Tensor out = x;
  const std::size_t w = data_mean_.value.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (out[i] - data_mean_.value[i % w]) / data_std_.value[i % w];
  return out;
}

Tensor TrainedGenerator::denormalize(const Tensor& x) const {
  Tensor out = x;
  const std::size_t w = data_mean_.value.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] * data_std_.value[i % w] + data_mean_.value[i % w];
  return out;
}

double TrainedGenerator::denoising_loss(const std::vector<synth::GesturePair>& pairs, std::uint64_t seed) const {
  if (pairs.empty()) throw Error(ErrorCode::EmptyDataset, "no pairs to evaluate");
  Rng rng(seed);
  std::uniform_int_distribution<int> pick_t(0, schedule_.steps - 1);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < pairs.size(); start += kChunk) {
    const std::size_t end = std::min(pairs.size(), start + kChunk);
    std::vector<PoseSequence> poses;
    std::vector<SpeechTrack> speech;
    for (std::size_t i = start; i < end; ++i) {
      poses.push_back(pairs[i].pose);
      speech.push_back(pairs[i].speech);
    }
    const Tensor x0 = normalize(poses_to_tensor(poses));
    const Tensor cond = speech_to_tensor(speech);
    const Tensor eps = normal_tensor(x0.shape(), rng);
    std::vector<int> steps(poses.size());
    std::vector<char> masked(poses.size());
    Tensor xt(x0.shape());
    const std::size_t stride = x0.dim(1) * x0.dim(2);
    for (std::size_t b = 0; b < poses.size(); ++b) {
      steps[b] = pick_t(rng);
      masked[b] = uniform(rng, 0.0, 1.0) < config_.p_uncond;
      const double a = std::sqrt(schedule_.alpha_bar[static_cast<std::size_t>(steps[b])]);
      const double s = std::sqrt(1.0 - schedule_.alpha_bar[static_cast<std::size_t>(steps[b])]);
      for (std::size_t k = b * stride; k < (b + 1) * stride; ++k) xt[k] = a * x0[k] + s * eps[k];
    }
    const Tensor pred = denoiser_->forward(xt, steps, cond, masked);
    total += nn::mse_loss(pred, eps) * static_cast<double>(eps.size());
    count += eps.size();
  }
  return total / static_cast<double>(count);
}

std::vector<PoseSequence> TrainedGenerator::sample(std::span<const SpeechTrack> speech,
                                                   std::span<const std::uint64_t> seeds) const {
  const std::size_t batch = seeds.size();
  const std::size_t frames = static_cast<std::size_t>(frames_);
  const std::size_t width = static_cast<std::size_t>(bone_count_ * config_.dims);
  const std::size_t stride = frames * width;

  Tensor x({batch, frames, width});
  std::vector<Rng> rngs;
  for (std::size_t b = 0; b < batch; ++b) {
    rngs.emplace_back(seeds[b]);
    for (std::size_t k = 0; k < stride; ++k) x[b * stride + k] = standard_normal(rngs.back());
  }

  const bool uncond = unconditional();
  const bool guided = !uncond && config_.guidance_weight != 0.0;
  Tensor cond;
  std::vector<char> masked;
  if (!uncond) {
    cond = speech_to_tensor(speech);
    if (guided) {
      // conditional and unconditional passes share one stacked batch
      Tensor twice({2 * batch, frames, cond.dim(2)});
      std::copy(cond.values().begin(), cond.values().end(), twice.data());
      cond = std::move(twice);
      masked.assign(2 * batch, 0);
      std::fill(masked.begin() + static_cast<std::ptrdiff_t>(batch), masked.end(), 1);
    } else {
      masked.assign(batch, 0);
    }
  } else {
    masked.assign(batch, 1);
  }

  for (int t = schedule_.steps - 1; t >= 0; --t) {
    Tensor eps_hat;
    if (guided) {
      Tensor x2({2 * batch, frames, width});
      std::copy(x.values().begin(), x.values().end(), x2.data());
      std::copy(x.values().begin(), x.values().end(), x2.data() + batch * stride);
      const std::vector<int> steps(2 * batch, t);
      const Tensor both = denoiser_->forward(x2, steps, cond, masked);
      Tensor ec({batch, frames, width}), eu({batch, frames, width});
      std::copy(both.data(), both.data() + batch * stride, ec.data());
      std::copy(both.data() + batch * stride, both.data() + 2 * batch * stride, eu.data());
      eps_hat = guided_eps(ec, eu, config_.guidance_weight);
    } else {
      const std::vector<int> steps(batch, t);
      eps_hat = denoiser_->forward(x, steps, cond, masked);
    }
    Tensor z(x.shape());
    if (t > 0)
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t k = 0; k < stride; ++k) z[b * stride + k] = standard_normal(rngs[b]);
    x = sample_step(x, t, eps_hat, schedule_, z);
  }

  auto poses = tensor_to_poses(denormalize(x), bone_count_, config_.dims, fps_);
  if (config_.dims == 3 && config_.post_normalize)
    for (auto& p : poses) skeleton::renormalize(p);
  return poses;
}

std::vector<PoseSequence> TrainedGenerator::generate(const SpeechTrack& speech, int count, std::uint64_t seed) const {
  if (speech.frames != frames_ || speech.feature_dim != feature_dim_)
    throw Error(ErrorCode::FrameMismatch, "speech track has " + std::to_string(speech.frames) +
                                              " frames, generator expects " + std::to_string(frames_));
  if (count <= 0) return {};
  const std::vector<SpeechTrack> tracks(static_cast<std::size_t>(count), speech);
  return generate_batch(tracks, seed);
}

std::vector<PoseSequence> TrainedGenerator::generate_batch(std::span<const SpeechTrack> speech,
                                                           std::uint64_t seed) const {
  for (const auto& s : speech)
    if (s.frames != frames_ || s.feature_dim != feature_dim_)
      throw Error(ErrorCode::FrameMismatch, "speech track shape differs from generator");
  std::vector<PoseSequence> out;
  out.reserve(speech.size());
  for (std::size_t start = 0; start < speech.size(); start += kChunk) {
    const std::size_t end = std::min(speech.size(), start + kChunk);
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = start; i < end; ++i) seeds.push_back(derive_seed(seed, i));
    auto chunk = sample(speech.subspan(start, end - start), seeds);
    for (auto& p : chunk) out.push_back(std::move(p));
  }
  return out;
}

nn::ModelParams TrainedGenerator::params() const {
  auto all = denoiser_->parameters();
  all.push_back(const_cast<nn::Parameter*>(&data_mean_));
  all.push_back(const_cast<nn::Parameter*>(&data_std_));
  return nn::collect_params(all, config_.seed);
}

void TrainedGenerator::load(const nn::ModelParams& params) {
  auto all = denoiser_->parameters();
  all.push_back(&data_mean_);
  all.push_back(&data_std_);
  nn::assign_params(params, all);
}

std::string TrainedGenerator::checksum() const { return nn::sha256_hex(nn::checkpoint_bytes(params())); }

void TrainedGenerator::save(const std::filesystem::path& path) const {
  nn::save_checkpoint(params(), path);
  nlohmann::json side{{"kind", "diffusion_generator"},
                      {"config", config_},
                      {"frames", frames_},
                      {"bone_count", bone_count_},
                      {"feature_dim", feature_dim_},
                      {"fps", fps_},
                      {"schedule",
                       {{"steps", schedule_.steps},
                        {"beta", schedule_.beta},
                        {"alpha", schedule_.alpha},
                        {"alpha_bar", schedule_.alpha_bar}}},
                      {"train_log",
                       {{"initial_heldout_loss", log_.initial_heldout_loss},
                        {"final_heldout_loss", log_.final_heldout_loss},
                        {"final_train_loss", log_.final_train_loss},
                        {"masked_fraction", log_.masked_fraction},
                        {"steps", log_.steps}}},
                      {"sha256", checksum()}};
  std::ofstream out(path.string() + ".json", std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string() + ".json");
  out << side.dump(2) << "\n";
}

TrainedGenerator TrainedGenerator::load_file(const std::filesystem::path& path) {
  std::ifstream in(path.string() + ".json");
  if (!in) throw Error(ErrorCode::MissingCheckpoint, path.string() + ".json");
  const auto side = nlohmann::json::parse(in);
  TrainedGenerator gen(side.at("config").get<GeneratorConfig>(), side.at("frames").get<int>(),
                       side.at("bone_count").get<int>(), side.at("feature_dim").get<int>(),
                       side.at("fps").get<double>());
  gen.load(nn::load_checkpoint(path));
  const auto& log = side.at("train_log");
  gen.log_.initial_heldout_loss = log.at("initial_heldout_loss").get<double>();
  gen.log_.final_heldout_loss = log.at("final_heldout_loss").get<double>();
  gen.log_.final_train_loss = log.at("final_train_loss").get<double>();
  gen.log_.masked_fraction = log.at("masked_fraction").get<double>();
  gen.log_.steps = log.at("steps").get<int>();
  return gen;
}

// ---------------------------------------------------------------------------

TrainedGenerator train(const synth::GestureDataset& dataset, const GeneratorConfig& config) {
  config.validate();
  if (dataset.dims != config.dims)
    throw Error(ErrorCode::DimensionMismatch, "dataset is " + std::to_string(dataset.dims) + "D, generator is " +
                                                  std::to_string(config.dims) + "D");
  if (dataset.pairs.empty()) throw Error(ErrorCode::EmptyDataset, "no training pairs");
  TrainedGenerator gen(config, dataset.seq_len, dataset.bone_count, dataset.feature_dim, dataset.fps);

  std::vector<synth::GesturePair> train_pairs, heldout;
  if (dataset.size() >= 10) {
    const std::size_t n_held = dataset.size() / 10;
    train_pairs.assign(dataset.pairs.begin(), dataset.pairs.end() - static_cast<std::ptrdiff_t>(n_held));
    heldout.assign(dataset.pairs.end() - static_cast<std::ptrdiff_t>(n_held), dataset.pairs.end());
  } else {
    train_pairs = dataset.pairs;
    heldout = dataset.pairs;
  }

  // per-coordinate standardization
  const std::size_t width = static_cast<std::size_t>(dataset.bone_count * dataset.dims);
  std::vector<double> sum(width, 0.0), sq(width, 0.0);
  std::size_t rows = 0;
  for (const auto& p : train_pairs)
    for (int f = 0; f < p.pose.frames; ++f, ++rows)
      for (std::size_t k = 0; k < width; ++k) {
        const double v = p.pose.data[static_cast<std::size_t>(f) * width + k];
        sum[k] += v;
        sq[k] += v * v;
      }
  for (std::size_t k = 0; k < width; ++k) {
    const double mean = sum[k] / static_cast<double>(rows);
    const double var = std::max(0.0, sq[k] / static_cast<double>(rows) - mean * mean);
    gen.data_mean_.value[k] = io::to_f32(mean);
    gen.data_std_.value[k] = io::to_f32(std::max(std::sqrt(var), 1e-2));
  }

  const std::uint64_t heldout_seed = derive_seed(config.seed, "heldout");
  gen.log_.initial_heldout_loss = gen.denoising_loss(heldout, heldout_seed);

  std::vector<PoseSequence> all_poses;
  std::vector<SpeechTrack> all_speech;
  for (const auto& p : train_pairs) {
    all_poses.push_back(p.pose);
    all_speech.push_back(p.speech);
  }
  const Tensor x0_all = gen.normalize(poses_to_tensor(all_poses));
  const Tensor cond_all = speech_to_tensor(all_speech);
  const std::size_t frames = x0_all.dim(1);
  const std::size_t pose_stride = frames * width;
  const std::size_t cond_stride = frames * cond_all.dim(2);

  auto params = gen.denoiser_->parameters();
  nn::AdamState adam;
  nn::AdamOptions opt{config.lr};
  Rng rng(derive_seed(config.seed, "generator-train"));
  std::uniform_int_distribution<std::size_t> pick(0, train_pairs.size() - 1);
  std::uniform_int_distribution<int> pick_t(0, gen.schedule_.steps - 1);
  const auto batch = static_cast<std::size_t>(config.batch);
  std::size_t masked_total = 0, seen = 0;
  double loss = 0.0;
  for (int step = 0; step < config.train_steps; ++step) {
    Tensor xt({batch, frames, width}), eps({batch, frames, width}), cond({batch, frames, cond_all.dim(2)});
    std::vector<int> steps(batch);
    std::vector<char> masked(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t idx = pick(rng);
      steps[b] = pick_t(rng);
      masked[b] = uniform(rng, 0.0, 1.0) < config.p_uncond;
      const double a = std::sqrt(gen.schedule_.alpha_bar[static_cast<std::size_t>(steps[b])]);
      const double s = std::sqrt(1.0 - gen.schedule_.alpha_bar[static_cast<std::size_t>(steps[b])]);
      for (std::size_t k = 0; k < pose_stride; ++k) {
        const double e = standard_normal(rng);
        eps[b * pose_stride + k] = e;
        xt[b * pose_stride + k] = a * x0_all[idx * pose_stride + k] + s * e;
      }
      std::copy(cond_all.data() + idx * cond_stride, cond_all.data() + (idx + 1) * cond_stride,
                cond.data() + b * cond_stride);
      masked_total += masked[b] ? 1 : 0;
      ++seen;
    }
    nn::zero_grad(params);
    Tensor grad;
    loss = nn::mse_loss(gen.denoiser_->forward_train(xt, steps, cond, masked), eps, &grad);
    if (!std::isfinite(loss))
      throw Error(ErrorCode::NonFiniteLoss, "denoiser loss is not finite at step " + std::to_string(step));
    gen.denoiser_->backward(grad);
    opt.lr = config.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * step / config.train_steps));
    nn::adam_step(params, adam, opt);
  }
  nn::round_to_f32(params);

  gen.log_.steps = config.train_steps;
  gen.log_.final_train_loss = loss;
  gen.log_.masked_fraction = seen ? static_cast<double>(masked_total) / static_cast<double>(seen) : 0.0;
  gen.log_.final_heldout_loss = gen.denoising_loss(heldout, heldout_seed);
  return gen;
}

}  // namespace gesture::diffusion
