#include "gesture/lifter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include "gesture/error.hpp"
#include "gesture/nn/optim.hpp"
#include "gesture/pose_tensor.hpp"
#include "gesture/rng.hpp"

namespace gesture::lifter {

namespace {

std::string upsample_name(Upsample u) { return u == Upsample::Repeat ? "repeat" : "linear"; }

Upsample parse_upsample(const std::string& s) {
  if (s == "repeat") return Upsample::Repeat;
  if (s == "linear") return Upsample::Linear;
  throw Error(ErrorCode::ConfigInvalid, "lifter.upsample must be 'repeat' or 'linear', got '" + s + "'");
}

std::vector<PoseSequence> projected(const std::vector<synth::GesturePair>& pairs) {
  std::vector<PoseSequence> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(skeleton::project_2d(p.pose));
  return out;
}

std::vector<PoseSequence> targets(const std::vector<synth::GesturePair>& pairs) {
  std::vector<PoseSequence> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.pose);
  return out;
}

}  // namespace

void LifterConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, "lifter: " + why); };
  if (conv_stack.empty()) fail("conv_stack must not be empty");
  for (const auto& [k, d] : conv_stack)
    if (k < 1 || d < 1) fail("kernel and dilation must be >= 1");
  if (channels < 1) fail("channels must be >= 1");
  if (upsample_factor < 1) fail("upsample_factor must be >= 1");
  if (!(lr > 0) || batch < 1 || train_steps < 0) fail("invalid training hyper-parameters");
}

void to_json(nlohmann::json& j, const LifterConfig& c) {
  nlohmann::json stack = nlohmann::json::array();
  for (const auto& [k, d] : c.conv_stack) stack.push_back({k, d});
  j = nlohmann::json{{"conv_stack", stack},         {"channels", c.channels},
                     {"upsample_factor", c.upsample_factor}, {"upsample", upsample_name(c.upsample)},
                     {"lr", c.lr},                  {"batch", c.batch},
                     {"train_steps", c.train_steps}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, LifterConfig& c) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "lifter config must be an object");
  LifterConfig out = c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "conv_stack") {
        out.conv_stack.clear();
        for (const auto& e : value) {
          if (!e.is_array() || e.size() != 2)
            throw Error(ErrorCode::ConfigInvalid, "lifter.conv_stack entries must be [kernel, dilation]");
          out.conv_stack.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
      } else if (key == "channels") out.channels = value.get<int>();
      else if (key == "upsample_factor") out.upsample_factor = value.get<int>();
      else if (key == "upsample") out.upsample = parse_upsample(value.get<std::string>());
      else if (key == "lr") out.lr = value.get<double>();
      else if (key == "batch") out.batch = value.get<int>();
      else if (key == "train_steps") out.train_steps = value.get<int>();
      else if (key == "seed") out.seed = value.get<std::uint64_t>();
      else throw Error(ErrorCode::ConfigInvalid, "unknown lifter key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ConfigInvalid, "lifter." + key + ": " + e.what());
    }
  }
  c = out;
}

// ---------------------------------------------------------------------------

Tensor upsample_time(const Tensor& x, int factor, Upsample mode) {
  if (x.rank() != 3) throw Error(ErrorCode::ShapeMismatch, "upsample expects [B, N, W]");
  const std::size_t batch = x.dim(0), frames = x.dim(1), width = x.dim(2);
  const auto f = static_cast<std::size_t>(factor);
  Tensor out({batch, frames * f, width});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t u = 0; u < frames * f; ++u) {
      double* dst = out.data() + (b * frames * f + u) * width;
      if (mode == Upsample::Repeat || frames == 1) {
        const double* src = x.data() + (b * frames + u / f) * width;
        std::copy(src, src + width, dst);
        continue;
      }
      const double pos = std::clamp((static_cast<double>(u) + 0.5) / factor - 0.5, 0.0, double(frames - 1));
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const std::size_t hi = std::min(lo + 1, frames - 1);
      const double w = pos - static_cast<double>(lo);
      const double* a = x.data() + (b * frames + lo) * width;
      const double* c = x.data() + (b * frames + hi) * width;
      for (std::size_t k = 0; k < width; ++k) dst[k] = (1.0 - w) * a[k] + w * c[k];
    }
  return out;
}

Tensor downsample_time(const Tensor& x, int factor) {
  const auto f = static_cast<std::size_t>(factor);
  if (x.rank() != 3 || x.dim(1) % f != 0)
    throw Error(ErrorCode::ShapeMismatch, "downsample expects [B, N * factor, W]");
  const std::size_t batch = x.dim(0), frames = x.dim(1) / f, width = x.dim(2);
  Tensor out({batch, frames, width});
  const double inv = 1.0 / factor;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t n = 0; n < frames; ++n) {
      double* dst = out.data() + (b * frames + n) * width;
      for (std::size_t r = 0; r < f; ++r) {
        const double* src = x.data() + (b * frames * f + n * f + r) * width;
        for (std::size_t k = 0; k < width; ++k) dst[k] += src[k];
      }
      for (std::size_t k = 0; k < width; ++k) dst[k] *= inv;
    }
  return out;
}

// ---------------------------------------------------------------------------

TrainedLifter::TrainedLifter(LifterConfig config, int frames, int bone_count, double fps)
    : config_(std::move(config)), frames_(frames), bone_count_(bone_count), fps_(fps),
      net_(std::make_unique<nn::Sequential>()) {
  config_.validate();
  if (receptive_field() > config_.upsample_factor * frames_)
    std::cerr << "warning: lifter receptive field " << receptive_field() << " exceeds upsampled length "
              << config_.upsample_factor * frames_ << "\n";
  using nn::LayerSpec;
  const auto edge = nn::Padding::Edge;
  const auto& stack = config_.conv_stack;
  net_->add(LayerSpec::conv1d(bone_count * 2, config_.channels, stack[0].first, stack[0].second, edge), "lifter.conv0")
      .add(LayerSpec::act(nn::ActivationKind::Relu), "lifter.relu0");
  for (std::size_t i = 1; i < stack.size(); ++i) {
    auto block = std::make_unique<nn::Sequential>(true);
    const std::string name = "lifter.conv" + std::to_string(i);
    block->add(LayerSpec::conv1d(config_.channels, config_.channels, stack[i].first, stack[i].second, edge), name)
        .add(LayerSpec::act(nn::ActivationKind::Relu), name + ".relu");
    net_->add(std::move(block));
  }
  net_->add(LayerSpec::dense(config_.channels, bone_count * 3), "lifter.head");
  Rng rng(derive_seed(config_.seed, "lifter-init"));
  net_->init(rng);
  nn::round_to_f32(net_->parameters());
}

TrainedLifter::TrainedLifter(TrainedLifter&&) noexcept = default;
TrainedLifter& TrainedLifter::operator=(TrainedLifter&&) noexcept = default;
TrainedLifter::~TrainedLifter() = default;

int TrainedLifter::receptive_field() const { return nn::receptive_field(config_.conv_stack); }

void TrainedLifter::check_input(const PoseSequence& seq2d) const {
  if (seq2d.dims != 2 || seq2d.bone_count != bone_count_)
    throw Error(ErrorCode::DimensionMismatch, "lifter expects " + std::to_string(bone_count_) +
                                                  " 2D bones, got " + std::to_string(seq2d.bone_count) + " x " +
                                                  std::to_string(seq2d.dims) + "D");
}

Tensor TrainedLifter::run(const Tensor& x2d) const {
  const Tensor up = upsample_time(x2d, config_.upsample_factor, config_.upsample);
  return downsample_time(net_->forward(up), config_.upsample_factor);
}

PoseSequence TrainedLifter::predict_raw(const PoseSequence& seq2d) const {
  check_input(seq2d);
  const std::vector<PoseSequence> one{seq2d};
  return tensor_to_poses(run(poses_to_tensor(one)), bone_count_, 3, seq2d.fps).front();
}

PoseSequence TrainedLifter::lift(const PoseSequence& seq2d) const {
  PoseSequence out = predict_raw(seq2d);
  skeleton::renormalize(out);
  return out;
}

std::vector<PoseSequence> TrainedLifter::lift_all(const std::vector<PoseSequence>& seqs2d) const {
  std::vector<PoseSequence> out;
  out.reserve(seqs2d.size());
  for (const auto& s : seqs2d) out.push_back(lift(s));
  return out;
}

nn::ModelParams TrainedLifter::params() const { return nn::collect_params(net_->parameters(), config_.seed); }

void TrainedLifter::load(const nn::ModelParams& params) { nn::assign_params(params, net_->parameters()); }

std::string TrainedLifter::checksum() const { return nn::sha256_hex(nn::checkpoint_bytes(params())); }

void TrainedLifter::save(const std::filesystem::path& path) const {
  nn::save_checkpoint(params(), path);
  nlohmann::json side{{"kind", "lifter"},
                      {"config", config_},
                      {"frames", frames_},
                      {"bone_count", bone_count_},
                      {"fps", fps_},
                      {"receptive_field", receptive_field()},
                      {"train_log",
                       {{"initial_val_mpjpe", log_.initial_val_mpjpe},
                        {"val_mpjpe", log_.val_mpjpe},
                        {"final_train_loss", log_.final_train_loss},
                        {"steps", log_.steps}}},
                      {"sha256", checksum()}};
  std::ofstream out(path.string() + ".json", std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string() + ".json");
  out << side.dump(2) << "\n";
}

TrainedLifter TrainedLifter::load_file(const std::filesystem::path& path) {
  std::ifstream in(path.string() + ".json");
  if (!in) throw Error(ErrorCode::MissingCheckpoint, path.string() + ".json");
  const auto side = nlohmann::json::parse(in);
  TrainedLifter out(side.at("config").get<LifterConfig>(), side.at("frames").get<int>(),
                    side.at("bone_count").get<int>(), side.at("fps").get<double>());
  out.load(nn::load_checkpoint(path));
  const auto& log = side.at("train_log");
  out.log_.initial_val_mpjpe = log.at("initial_val_mpjpe").get<double>();
  out.log_.val_mpjpe = log.at("val_mpjpe").get<double>();
  out.log_.final_train_loss = log.at("final_train_loss").get<double>();
  out.log_.steps = log.at("steps").get<int>();
  return out;
}

// ---------------------------------------------------------------------------

TrainedLifter train_lifter(const synth::GestureDataset& dataset3d, const LifterConfig& config) {
  config.validate();
  if (dataset3d.dims != 3)
    throw Error(ErrorCode::DimensionMismatch, "lifter trains on 3D data, got " + std::to_string(dataset3d.dims) + "D");
  if (dataset3d.pairs.empty()) throw Error(ErrorCode::EmptyDataset, "no training pairs");
  TrainedLifter lifter(config, dataset3d.seq_len, dataset3d.bone_count, dataset3d.fps);

  std::vector<synth::GesturePair> train_pairs, val_pairs;
  if (dataset3d.size() >= 10) {
    const auto n_val = static_cast<std::ptrdiff_t>(dataset3d.size() / 10);
    train_pairs.assign(dataset3d.pairs.begin(), dataset3d.pairs.end() - n_val);
    val_pairs.assign(dataset3d.pairs.end() - n_val, dataset3d.pairs.end());
  } else {
    train_pairs = dataset3d.pairs;
    val_pairs = dataset3d.pairs;
  }
  const auto val_in = projected(val_pairs);
  const auto val_gt = targets(val_pairs);
  lifter.log_.initial_val_mpjpe = mpjpe(lifter.lift_all(val_in), val_gt);

  const auto train_in = projected(train_pairs);
  const auto train_gt = targets(train_pairs);
  const Tensor x_all = poses_to_tensor(train_in);
  const Tensor y_all = poses_to_tensor(train_gt);
  const std::size_t frames = x_all.dim(1);
  const std::size_t in_stride = frames * x_all.dim(2), out_stride = frames * y_all.dim(2);

  auto params = lifter.net_->parameters();
  nn::AdamState adam;
  const nn::AdamOptions opt{config.lr};
  Rng rng(derive_seed(config.seed, "lifter-train"));
  std::uniform_int_distribution<std::size_t> pick(0, train_pairs.size() - 1);
  const auto batch = static_cast<std::size_t>(config.batch);
  double loss = 0.0;
  for (int step = 0; step < config.train_steps; ++step) {
    Tensor x({batch, frames, x_all.dim(2)}), y({batch, frames, y_all.dim(2)});
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t idx = pick(rng);
      std::copy(x_all.data() + idx * in_stride, x_all.data() + (idx + 1) * in_stride, x.data() + b * in_stride);
      std::copy(y_all.data() + idx * out_stride, y_all.data() + (idx + 1) * out_stride, y.data() + b * out_stride);
    }
    nn::zero_grad(params);
    const int f = config.upsample_factor;
    const Tensor hidden = lifter.net_->forward_train(upsample_time(x, f, config.upsample));
    Tensor grad;
    loss = nn::mse_loss(downsample_time(hidden, f), y, &grad);
    if (!std::isfinite(loss))
      throw Error(ErrorCode::NonFiniteLoss, "lifter loss is not finite at step " + std::to_string(step));
    // downsampling averages each group, so every upsampled frame gets grad / f
    Tensor spread = upsample_time(grad, f, Upsample::Repeat);
    for (double& v : spread.values()) v /= f;
    lifter.net_->backward(spread);
    nn::adam_step(params, adam, opt);
  }
  nn::round_to_f32(params);

  lifter.log_.steps = config.train_steps;
  lifter.log_.final_train_loss = loss;
  lifter.log_.val_mpjpe = mpjpe(lifter.lift_all(val_in), val_gt);
  return lifter;
}

// ---------------------------------------------------------------------------

double mpjpe(const PoseSequence& pred, const PoseSequence& gt) {
  if (pred.frames != gt.frames || pred.bone_count != gt.bone_count || pred.dims != gt.dims ||
      pred.data.size() != gt.data.size())
    throw Error(ErrorCode::ShapeMismatch, "mpjpe needs equal shapes");
  if (pred.frames == 0 || pred.bone_count == 0) return 0.0;
  double total = 0.0;
  const auto dims = static_cast<std::size_t>(pred.dims);
  for (std::size_t v = 0; v < pred.data.size(); v += dims) {
    double sq = 0.0;
    for (std::size_t k = 0; k < dims; ++k) {
      const double d = pred.data[v + k] - gt.data[v + k];
      sq += d * d;
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(pred.frames * pred.bone_count);
}

double mpjpe(const std::vector<PoseSequence>& pred, const std::vector<PoseSequence>& gt) {
  if (pred.size() != gt.size()) throw Error(ErrorCode::ShapeMismatch, "mpjpe needs equal-length sets");
  if (pred.empty()) throw Error(ErrorCode::EmptyDataset, "mpjpe of empty sets");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += mpjpe(pred[i], gt[i]);
  return total / static_cast<double>(pred.size());
}

}  // namespace gesture::lifter
