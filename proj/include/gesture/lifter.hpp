#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gesture/nn/checkpoint.hpp"
#include "gesture/nn/layers.hpp"
#include "gesture/synth_data.hpp"
#include "json.hpp"

namespace gesture::lifter {

using nn::Tensor;
using skeleton::PoseSequence;

enum class Upsample { Repeat, Linear };

struct LifterConfig {
  std::vector<std::pair<int, int>> conv_stack{{3, 1}, {3, 3}, {3, 9}};  // (kernel, dilation)
  int channels = 48;
  int upsample_factor = 8;
  Upsample upsample = Upsample::Repeat;
  double lr = 1e-3;
  int batch = 16;
  int train_steps = 1500;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const LifterConfig&) const = default;
};

void to_json(nlohmann::json& j, const LifterConfig& c);
void from_json(const nlohmann::json& j, LifterConfig& c);

/// Repeats (or linearly interpolates) every frame `factor` times along time.
/// x: [B, N, W] -> [B, N * factor, W].
Tensor upsample_time(const Tensor& x, int factor, Upsample mode);
/// Averages consecutive groups of `factor` frames. [B, N * factor, W] -> [B, N, W].
Tensor downsample_time(const Tensor& x, int factor);

struct LifterLog {
  double initial_val_mpjpe = 0.0;
  double val_mpjpe = 0.0;
  double final_train_loss = 0.0;
  int steps = 0;
};

/// Temporal convolutional network from 2D to 3D bone directions. The first
/// stack entry maps the input to `channels`; the rest are residual
/// conv + ReLU blocks; a dense head emits bone_count * 3 values per frame.
class TrainedLifter {
 public:
  TrainedLifter(LifterConfig config, int frames, int bone_count, double fps);
  TrainedLifter(TrainedLifter&&) noexcept;
  TrainedLifter& operator=(TrainedLifter&&) noexcept;
  ~TrainedLifter();

  const LifterConfig& config() const { return config_; }
  const LifterLog& log() const { return log_; }
  int frames() const { return frames_; }
  int bone_count() const { return bone_count_; }
  int receptive_field() const;

  /// Network output before unit renormalization.
  PoseSequence predict_raw(const PoseSequence& seq2d) const;
  /// Lifted 3D sequence with unit bone vectors. Throws DimensionMismatch.
  PoseSequence lift(const PoseSequence& seq2d) const;
  std::vector<PoseSequence> lift_all(const std::vector<PoseSequence>& seqs2d) const;

  nn::ModelParams params() const;
  void load(const nn::ModelParams& params);
  std::string checksum() const;
  void save(const std::filesystem::path& path) const;
  static TrainedLifter load_file(const std::filesystem::path& path);

  friend TrainedLifter train_lifter(const synth::GestureDataset& dataset3d, const LifterConfig& config);

 private:
  void check_input(const PoseSequence& seq2d) const;
  Tensor run(const Tensor& x2d) const;

  LifterConfig config_;
  int frames_, bone_count_;
  double fps_;
  std::unique_ptr<nn::Sequential> net_;
  LifterLog log_;
};

/// Fits the lifter on (project_2d(seq), seq) pairs by mean squared error.
/// Throws DimensionMismatch for a 2D dataset, EmptyDataset when empty.
TrainedLifter train_lifter(const synth::GestureDataset& dataset3d, const LifterConfig& config);

/// Mean over frames and bones of the Euclidean distance between vectors.
/// Throws ShapeMismatch.
double mpjpe(const PoseSequence& pred, const PoseSequence& gt);
double mpjpe(const std::vector<PoseSequence>& pred, const std::vector<PoseSequence>& gt);

}  // namespace gesture::lifter
