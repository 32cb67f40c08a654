#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "gesture/nn/checkpoint.hpp"
#include "gesture/nn/layers.hpp"
#include "gesture/skeleton.hpp"

namespace gesture::metrics {

using skeleton::PoseSequence;

// ---------------------------------------------------------------------------
// Beat consistency

struct BeatSet {
  std::vector<double> times;  // seconds, strictly increasing
};

struct BCParams {
  double sigma = 0.1;
  double threshold = 0.05;  // rad/frame
  void validate() const;
};

/// Mean over bones of the angle between consecutive frames' directions.
/// Entry 0 is zero (no predecessor).
std::vector<double> angle_velocity(const PoseSequence& seq);

/// Interior frames that are strict local maxima of angle velocity and
/// exceed the threshold. Throws TooShort for fewer than two frames.
BeatSet extract_kinematic_beats(const PoseSequence& seq, const BCParams& params);

/// Mean over audio beats of exp(-d^2 / (2 sigma^2)), d the distance to the
/// nearest kinematic beat. Empty inputs throw EmptyAudioBeats /
/// EmptyKinematicBeats.
double beat_consistency(const BeatSet& audio, const BeatSet& kinematic, double sigma);

// ---------------------------------------------------------------------------
// Pose encoder

struct EncoderConfig {
  int latent_dim = 32;
  int hidden = 128;
  int steps = 1500;
  int batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

/// Latent samples, one row per sequence.
using Latents = Eigen::MatrixXd;

/// MLP autoencoder over flattened pose sequences; only the encoder half is
/// used for metrics. Encoding is deterministic and thread-safe.
class PoseEncoder {
 public:
  PoseEncoder(int frames, int bone_count, int dims, const EncoderConfig& config);
  PoseEncoder(PoseEncoder&&) noexcept;
  PoseEncoder& operator=(PoseEncoder&&) noexcept;
  ~PoseEncoder();

  int latent_dim() const { return config_.latent_dim; }
  int dims() const { return dims_; }
  int frames() const { return frames_; }
  int bone_count() const { return bone_count_; }
  const EncoderConfig& config() const { return config_; }

  Eigen::VectorXd encode(const PoseSequence& seq) const;
  Latents encode_all(const std::vector<PoseSequence>& seqs) const;
  /// Mean squared reconstruction error over `seqs`.
  double reconstruction_error(const std::vector<PoseSequence>& seqs) const;

  nn::ModelParams params() const;
  void load(const nn::ModelParams& params);
  /// SHA-256 of the serialized parameters.
  std::string checksum() const;

  void save(const std::filesystem::path& path) const;
  static PoseEncoder load_file(const std::filesystem::path& path);

  struct TrainLog {
    double initial_heldout = 0.0;
    double final_heldout = 0.0;
  };
  const TrainLog& log() const { return log_; }

  friend PoseEncoder train_encoder(const std::vector<PoseSequence>&, const EncoderConfig&);

 private:
  nn::Tensor flatten(const std::vector<PoseSequence>& seqs) const;

  int frames_, bone_count_, dims_;
  EncoderConfig config_;
  std::unique_ptr<nn::Sequential> encoder_;
  std::unique_ptr<nn::Sequential> decoder_;
  TrainLog log_;
};

/// Throws EmptyDataset for no sequences.
PoseEncoder train_encoder(const std::vector<PoseSequence>& sequences, const EncoderConfig& config);

// ---------------------------------------------------------------------------
// Distribution statistics

struct GestureStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  std::size_t sample_count = 0;
};

/// Sample mean and unbiased covariance of latent rows. Throws TooFewSamples.
GestureStats gesture_stats(const Latents& latents);
GestureStats gesture_stats(const PoseEncoder& encoder, const std::vector<PoseSequence>& sequences);

enum class FgdVariant { Standard, PaperLiteral };

/// Frechet distance between Gaussian fits:
/// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2), clamped at 0
/// and exactly 0 for identical statistics. `PaperLiteral` evaluates
/// |mu_a - mu_b| + Tr(S_a + S_b - 2 (S_a S_b)^2), for comparison only.
double fgd(const GestureStats& a, const GestureStats& b, FgdVariant variant = FgdVariant::Standard);

/// Index sets A and B (disjoint, size n each) drawn by seeded shuffle.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> diversity_subsets(std::size_t count, int n,
                                                                                std::uint64_t seed);

/// |mean(A) - mean(B)|_2 over two disjoint random subsets of size n.
/// Throws TooFewSamples when fewer than 2n latents are given.
double diversity(const Latents& latents, int n, std::uint64_t seed);
double diversity(const PoseEncoder& encoder, const std::vector<PoseSequence>& sequences, int n, std::uint64_t seed);

}  // namespace gesture::metrics
