#include "gesture/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "gesture/error.hpp"
#include "gesture/nn/optim.hpp"
#include "gesture/rng.hpp"
#include "json.hpp"

namespace gesture::metrics {

void BCParams::validate() const {
  if (!(sigma > 0)) throw Error(ErrorCode::InvalidConfig, "bc sigma must be positive");
  if (!(threshold > 0)) throw Error(ErrorCode::InvalidConfig, "beat threshold must be positive");
}

std::vector<double> angle_velocity(const PoseSequence& seq) {
  if (seq.frames < 2) throw Error(ErrorCode::TooShort, "need at least two frames");
  std::vector<double> vel(static_cast<std::size_t>(seq.frames), 0.0);
  for (int f = 1; f < seq.frames; ++f) {
    double sum = 0.0;
    for (int b = 0; b < seq.bone_count; ++b) {
      const auto u = seq.vec(f - 1, b);
      const auto v = seq.vec(f, b);
      double nu = 0.0, nv = 0.0, dot = 0.0;
      for (int d = 0; d < seq.dims; ++d) {
        nu += u[static_cast<std::size_t>(d)] * u[static_cast<std::size_t>(d)];
        nv += v[static_cast<std::size_t>(d)] * v[static_cast<std::size_t>(d)];
        dot += u[static_cast<std::size_t>(d)] * v[static_cast<std::size_t>(d)];
      }
      if (nu <= 0.0 || nv <= 0.0) continue;  // degenerate projected bone
      const double c = std::clamp(dot / std::sqrt(nu * nv), -1.0, 1.0);
      sum += std::acos(c);
    }
    vel[static_cast<std::size_t>(f)] = sum / seq.bone_count;
  }
  return vel;
}

BeatSet extract_kinematic_beats(const PoseSequence& seq, const BCParams& params) {
  params.validate();
  const auto vel = angle_velocity(seq);
  BeatSet beats;
  for (int f = 2; f + 1 < seq.frames; ++f) {
    const double v = vel[static_cast<std::size_t>(f)];
    if (v > params.threshold && v > vel[static_cast<std::size_t>(f - 1)] && v > vel[static_cast<std::size_t>(f + 1)])
      beats.times.push_back(f / seq.fps);
  }
  return beats;
}

double beat_consistency(const BeatSet& audio, const BeatSet& kinematic, double sigma) {
  if (audio.times.empty()) throw Error(ErrorCode::EmptyAudioBeats, "no audio beats");
  if (kinematic.times.empty()) throw Error(ErrorCode::EmptyKinematicBeats, "no kinematic beats");
  if (!(sigma > 0)) throw Error(ErrorCode::InvalidConfig, "sigma must be positive");
  const auto& k = kinematic.times;
  double total = 0.0;
  for (double t : audio.times) {
    // nearest neighbour in the sorted kinematic set
    const auto it = std::lower_bound(k.begin(), k.end(), t);
    double best = std::numeric_limits<double>::infinity();
    if (it != k.end()) best = std::min(best, std::abs(*it - t));
    if (it != k.begin()) best = std::min(best, std::abs(*std::prev(it) - t));
    total += std::exp(-(best * best) / (2.0 * sigma * sigma));
  }
  return total / static_cast<double>(audio.times.size());
}

// ---------------------------------------------------------------------------

PoseEncoder::PoseEncoder(int frames, int bone_count, int dims, const EncoderConfig& config)
    : frames_(frames), bone_count_(bone_count), dims_(dims), config_(config),
      encoder_(std::make_unique<nn::Sequential>()), decoder_(std::make_unique<nn::Sequential>()) {
  if (config.latent_dim < 1 || config.hidden < 1) throw Error(ErrorCode::InvalidConfig, "encoder widths must be >= 1");
  const int in = frames * bone_count * dims;
  encoder_->add(nn::LayerSpec::dense(in, config.hidden), "enc.fc1")
      .add(nn::LayerSpec::act(nn::ActivationKind::Gelu), "enc.act")
      .add(nn::LayerSpec::dense(config.hidden, config.latent_dim), "enc.fc2");
  decoder_->add(nn::LayerSpec::dense(config.latent_dim, config.hidden), "dec.fc1")
      .add(nn::LayerSpec::act(nn::ActivationKind::Gelu), "dec.act")
      .add(nn::LayerSpec::dense(config.hidden, in), "dec.fc2");
  Rng rng(derive_seed(config.seed, "encoder-init"));
  encoder_->init(rng);
  decoder_->init(rng);
  nn::round_to_f32(encoder_->parameters());
  nn::round_to_f32(decoder_->parameters());
}

PoseEncoder::PoseEncoder(PoseEncoder&&) noexcept = default;
PoseEncoder& PoseEncoder::operator=(PoseEncoder&&) noexcept = default;
PoseEncoder::~PoseEncoder() = default;

nn::Tensor PoseEncoder::flatten(const std::vector<PoseSequence>& seqs) const {
  const std::size_t width = static_cast<std::size_t>(frames_ * bone_count_ * dims_);
  nn::Tensor x({seqs.size(), width});
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto& s = seqs[i];
    if (s.frames != frames_ || s.bone_count != bone_count_ || s.dims != dims_)
      throw Error(ErrorCode::DimensionMismatch, "sequence shape differs from encoder input");
    std::copy(s.data.begin(), s.data.end(), x.data() + i * width);
  }
  return x;
}

Eigen::VectorXd PoseEncoder::encode(const PoseSequence& seq) const {
  return encode_all({seq}).row(0).transpose();
}

Latents PoseEncoder::encode_all(const std::vector<PoseSequence>& seqs) const {
  if (seqs.empty()) return Latents(0, config_.latent_dim);
  const nn::Tensor z = encoder_->forward(flatten(seqs));
  return z.matrix();
}

double PoseEncoder::reconstruction_error(const std::vector<PoseSequence>& seqs) const {
  const nn::Tensor x = flatten(seqs);
  return nn::mse_loss(decoder_->forward(encoder_->forward(x)), x);
}

nn::ModelParams PoseEncoder::params() const {
  auto all = encoder_->parameters();
  for (auto* p : decoder_->parameters()) all.push_back(p);
  return nn::collect_params(all, config_.seed);
}

void PoseEncoder::load(const nn::ModelParams& params) {
  auto all = encoder_->parameters();
  for (auto* p : decoder_->parameters()) all.push_back(p);
  nn::assign_params(params, all);
}

std::string PoseEncoder::checksum() const { return nn::sha256_hex(nn::checkpoint_bytes(params())); }

void PoseEncoder::save(const std::filesystem::path& path) const {
  nn::save_checkpoint(params(), path);
  nlohmann::json side{{"kind", "pose_encoder"},
                      {"frames", frames_},
                      {"bone_count", bone_count_},
                      {"dims", dims_},
                      {"latent_dim", config_.latent_dim},
                      {"hidden", config_.hidden},
                      {"steps", config_.steps},
                      {"batch", config_.batch},
                      {"lr", config_.lr},
                      {"seed", config_.seed},
                      {"sha256", checksum()}};
  std::ofstream out(path.string() + ".json", std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string() + ".json");
  out << side.dump(2) << "\n";
}

PoseEncoder PoseEncoder::load_file(const std::filesystem::path& path) {
  std::ifstream in(path.string() + ".json");
  if (!in) throw Error(ErrorCode::MissingCheckpoint, path.string() + ".json");
  const auto side = nlohmann::json::parse(in);
  EncoderConfig cfg;
  cfg.latent_dim = side.at("latent_dim").get<int>();
  cfg.hidden = side.at("hidden").get<int>();
  cfg.steps = side.at("steps").get<int>();
  cfg.batch = side.at("batch").get<int>();
  cfg.lr = side.at("lr").get<double>();
  cfg.seed = side.at("seed").get<std::uint64_t>();
  PoseEncoder enc(side.at("frames").get<int>(), side.at("bone_count").get<int>(), side.at("dims").get<int>(), cfg);
  enc.load(nn::load_checkpoint(path));
  return enc;
}

PoseEncoder train_encoder(const std::vector<PoseSequence>& sequences, const EncoderConfig& config) {
  if (sequences.empty()) throw Error(ErrorCode::EmptyDataset, "encoder training needs sequences");
  const auto& first = sequences.front();
  PoseEncoder enc(first.frames, first.bone_count, first.dims, config);

  // 10% held out when the corpus is large enough to spare it.
  std::vector<PoseSequence> train, heldout;
  if (sequences.size() >= 10) {
    const std::size_t n_held = sequences.size() / 10;
    heldout.assign(sequences.end() - static_cast<std::ptrdiff_t>(n_held), sequences.end());
    train.assign(sequences.begin(), sequences.end() - static_cast<std::ptrdiff_t>(n_held));
  } else {
    train = sequences;
    heldout = sequences;
  }
  enc.log_.initial_heldout = enc.reconstruction_error(heldout);

  const nn::Tensor data = enc.flatten(train);
  const std::size_t width = data.cols();
  auto params = enc.encoder_->parameters();
  for (auto* p : enc.decoder_->parameters()) params.push_back(p);
  nn::AdamState adam;
  const nn::AdamOptions opt{config.lr};
  Rng rng(derive_seed(config.seed, "encoder-batches"));
  std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
  const std::size_t batch = static_cast<std::size_t>(std::max(1, config.batch));
  for (int step = 0; step < config.steps; ++step) {
    nn::Tensor x({batch, width});
    for (std::size_t i = 0; i < batch; ++i) {
      const std::size_t idx = pick(rng);
      std::copy(data.data() + idx * width, data.data() + (idx + 1) * width, x.data() + i * width);
    }
    nn::zero_grad(params);
    nn::Tensor grad;
    const double loss = nn::mse_loss(enc.decoder_->forward_train(enc.encoder_->forward_train(x)), x, &grad);
    if (!std::isfinite(loss)) throw Error(ErrorCode::NonFiniteLoss, "encoder training diverged at step " + std::to_string(step));
    enc.encoder_->backward(enc.decoder_->backward(grad));
    nn::adam_step(params, adam, opt);
  }
  nn::round_to_f32(params);
  enc.log_.final_heldout = enc.reconstruction_error(heldout);
  return enc;
}

// ---------------------------------------------------------------------------

GestureStats gesture_stats(const Latents& latents) {
  if (latents.rows() < 2) throw Error(ErrorCode::TooFewSamples, "need at least two samples");
  if (!latents.allFinite()) throw Error(ErrorCode::NonFiniteInput, "non-finite latent");
  GestureStats s;
  s.sample_count = static_cast<std::size_t>(latents.rows());
  s.mu = latents.colwise().mean().transpose();
  const Eigen::MatrixXd centered = latents.rowwise() - s.mu.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(latents.rows() - 1);
  s.sigma = 0.5 * (cov + cov.transpose());
  return s;
}

GestureStats gesture_stats(const PoseEncoder& encoder, const std::vector<PoseSequence>& sequences) {
  if (sequences.size() < 2) throw Error(ErrorCode::TooFewSamples, "need at least two sequences");
  return gesture_stats(encoder.encode_all(sequences));
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

double psd_sqrt_trace(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

}  // namespace

double fgd(const GestureStats& a, const GestureStats& b, FgdVariant variant) {
  if (a.mu.size() != b.mu.size() || a.sigma.rows() != a.mu.size() || b.sigma.rows() != b.mu.size())
    throw Error(ErrorCode::DimMismatch, "latent dimensions differ");
  if (!a.mu.allFinite() || !b.mu.allFinite() || !a.sigma.allFinite() || !b.sigma.allFinite())
    throw Error(ErrorCode::NonFiniteInput, "non-finite statistics");
  const Eigen::VectorXd dmu = a.mu - b.mu;
  if (variant == FgdVariant::PaperLiteral) {
    const Eigen::MatrixXd prod = a.sigma * b.sigma;
    return dmu.norm() + (a.sigma + b.sigma - 2.0 * prod * prod).trace();
  }
  if (a.mu == b.mu && a.sigma == b.sigma) return 0.0;
  const Eigen::MatrixXd root_a = psd_sqrt(a.sigma);
  const double cross = psd_sqrt_trace(root_a * b.sigma * root_a);
  const double value = dmu.squaredNorm() + a.sigma.trace() + b.sigma.trace() - 2.0 * cross;
  return std::max(0.0, value);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> diversity_subsets(std::size_t count, int n,
                                                                                std::uint64_t seed) {
  if (n < 1 || count < 2 * static_cast<std::size_t>(n))
    throw Error(ErrorCode::TooFewSamples,
                "diversity needs " + std::to_string(2 * n) + " samples, got " + std::to_string(count));
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto un = static_cast<std::size_t>(n);
  return {std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(un)),
          std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(un),
                                   order.begin() + static_cast<std::ptrdiff_t>(2 * un))};
}

double diversity(const Latents& latents, int n, std::uint64_t seed) {
  const auto [a, b] = diversity_subsets(static_cast<std::size_t>(latents.rows()), n, seed);
  Eigen::VectorXd mean_a = Eigen::VectorXd::Zero(latents.cols());
  Eigen::VectorXd mean_b = Eigen::VectorXd::Zero(latents.cols());
  for (std::size_t i : a) mean_a += latents.row(static_cast<Eigen::Index>(i)).transpose();
  for (std::size_t i : b) mean_b += latents.row(static_cast<Eigen::Index>(i)).transpose();
  return (mean_a - mean_b).norm() / n;
}

double diversity(const PoseEncoder& encoder, const std::vector<PoseSequence>& sequences, int n, std::uint64_t seed) {
  return diversity(encoder.encode_all(sequences), n, seed);
}

}  // namespace gesture::metrics
