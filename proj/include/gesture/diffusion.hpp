#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gesture/nn/checkpoint.hpp"
#include "gesture/nn/layers.hpp"
#include "gesture/synth_data.hpp"
#include "json.hpp"

namespace gesture::diffusion {

using nn::Tensor;
using skeleton::PoseSequence;
using synth::SpeechTrack;

/// Noise-schedule constants for T steps, indexed 0..T-1.
struct DiffusionSchedule {
  int steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  /// Linear beta between `beta_start` and `beta_end`, both multiplied by
  /// 1000 / steps so short chains still end near pure noise; capped at 0.999.
  static DiffusionSchedule linear(int steps, double beta_start = 1e-4, double beta_end = 0.02);

  /// Throws InvalidConfig if any invariant fails (beta in (0,1), alpha_bar
  /// strictly decreasing, alpha_bar[T-1] < 0.01).
  void validate() const;
};

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.
Tensor forward_sample(const Tensor& x0, int t, const Tensor& eps, const DiffusionSchedule& schedule);

/// (1 + w) eps_cond - w eps_uncond.
Tensor guided_eps(const Tensor& eps_cond, const Tensor& eps_uncond, double w);

/// One ancestral step with sigma_t^2 = beta_t. `z` must be zero at t = 0.
Tensor sample_step(const Tensor& x_t, int t, const Tensor& eps_hat, const DiffusionSchedule& schedule,
                   const Tensor& z);

struct DenoiserSpec {
  int model_dim = 32;
  int heads = 2;
  int blocks = 2;
  int mlp_hidden = 64;
  int cond_hidden = 16;
  int cond_embed = 16;
  int time_embed = 16;
  bool operator==(const DenoiserSpec&) const = default;
};

struct GeneratorConfig {
  int dims = 3;
  double p_uncond = 0.1;
  double guidance_weight = 0.5;
  int steps = 100;  // T
  std::string schedule = "linear";
  double beta_start = 1e-4;
  double beta_end = 0.02;
  DenoiserSpec denoiser;
  double lr = 3e-3;  // peak; cosine-decayed to zero over train_steps
  int batch = 32;
  int train_steps = 2000;
  bool post_normalize = true;  // only applied to 3D output
  std::uint64_t seed = 0;

  void validate() const;
  DiffusionSchedule make_schedule() const;
  bool operator==(const GeneratorConfig&) const = default;
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);

/// Noise-prediction network: speech features pass through a small temporal
/// conv encoder (or are replaced by a learned null embedding when masked),
/// then get concatenated with the noisy poses and a timestep embedding along
/// the feature axis and fed to a transformer trunk whose input projection is a
/// width-3 temporal convolution.
class Denoiser {
 public:
  Denoiser(int pose_width, int feature_dim, const DenoiserSpec& spec);

  /// x_t: [B, N, pose_width]; cond: [B, N, feature_dim] (ignored rows where
  /// masked[i]); steps: one timestep per batch element.
  Tensor forward(const Tensor& x_t, std::span<const int> steps, const Tensor& cond,
                 const std::vector<char>& masked) const;
  Tensor forward_train(const Tensor& x_t, std::span<const int> steps, const Tensor& cond,
                       const std::vector<char>& masked);
  void backward(const Tensor& grad_out);

  std::vector<nn::Parameter*> parameters();
  void init(Rng& rng);

  int pose_width() const { return pose_width_; }
  int feature_dim() const { return feature_dim_; }

 private:
  Tensor assemble(const Tensor& x_t, std::span<const int> steps, const Tensor& cond_embedded,
                  const std::vector<char>& masked) const;

  int pose_width_, feature_dim_;
  DenoiserSpec spec_;
  nn::Sequential cond_encoder_;
  nn::Parameter null_embedding_;
  nn::Sequential trunk_;
  std::vector<char> masked_cache_;
  bool has_cache_ = false;
};

struct TrainLog {
  double initial_heldout_loss = 0.0;
  double final_heldout_loss = 0.0;
  double final_train_loss = 0.0;
  double masked_fraction = 0.0;
  int steps = 0;
};

class TrainedGenerator {
 public:
  TrainedGenerator(GeneratorConfig config, int frames, int bone_count, int feature_dim, double fps);

  const GeneratorConfig& config() const { return config_; }
  const DiffusionSchedule& schedule() const { return schedule_; }
  const TrainLog& log() const { return log_; }
  int dims() const { return config_.dims; }
  int frames() const { return frames_; }
  int bone_count() const { return bone_count_; }

  /// `count` samples for one speech track; chain i uses noise seeded from
  /// (seed, i). Throws FrameMismatch when the track length differs.
  std::vector<PoseSequence> generate(const SpeechTrack& speech, int count, std::uint64_t seed) const;
  /// One sample per track, chain i seeded from (seed, i).
  std::vector<PoseSequence> generate_batch(std::span<const SpeechTrack> speech, std::uint64_t seed) const;

  /// Denoising MSE on the given pairs with (t, eps, mask) drawn from `seed`.
  double denoising_loss(const std::vector<synth::GesturePair>& pairs, std::uint64_t seed) const;

  nn::ModelParams params() const;
  void load(const nn::ModelParams& params);
  std::string checksum() const;
  void save(const std::filesystem::path& path) const;
  static TrainedGenerator load_file(const std::filesystem::path& path);

  friend TrainedGenerator train(const synth::GestureDataset& dataset, const GeneratorConfig& config);

 private:
  bool unconditional() const { return config_.p_uncond >= 1.0; }
  std::vector<PoseSequence> sample(std::span<const SpeechTrack> speech, std::span<const std::uint64_t> seeds) const;
  Tensor normalize(const Tensor& x) const;
  Tensor denormalize(const Tensor& x) const;

  GeneratorConfig config_;
  int frames_, bone_count_, feature_dim_;
  double fps_;
  DiffusionSchedule schedule_;
  std::unique_ptr<Denoiser> denoiser_;
  nn::Parameter data_mean_, data_std_;
  TrainLog log_;
};

/// Trains the denoiser to predict eps by MSE, masking each element's speech
/// with probability p_uncond. Throws DimensionMismatch or NonFiniteLoss.
TrainedGenerator train(const synth::GestureDataset& dataset, const GeneratorConfig& config);

}  // namespace gesture::diffusion
