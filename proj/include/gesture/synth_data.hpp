#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gesture/skeleton.hpp"
#include "json.hpp"

namespace gesture::synth {

using skeleton::PoseSequence;
using skeleton::SkeletonTopology;

/// Per-frame conditioning features plus the planted beat times (seconds).
struct SpeechTrack {
  int frames = 0;
  int feature_dim = 4;
  double fps = 15.0;
  std::vector<double> features;  // frames x feature_dim
  std::vector<double> beat_times;

  double feature(int f, int k) const {
    return features[static_cast<std::size_t>(f) * feature_dim + k];
  }
  bool operator==(const SpeechTrack&) const = default;
};

enum class AmbiguityMode { None, Mirror };

struct SynthConfig {
  int num_sequences = 800;
  int seq_len = 34;
  double fps = 15.0;
  int feature_dim = 4;
  double beat_rate_hz = 1.5;
  double pulse_amplitude = 0.15;  // rad/frame at the pulse peak
  double baseline_motion_amplitude = 0.1;  // rad
  AmbiguityMode ambiguity_mode = AmbiguityMode::Mirror;
  double ambiguity_mix = 0.5;
  double noise_std = 0.003;
  /// When non-empty every sequence gets exactly these beats instead of a
  /// random beat train.
  std::vector<double> fixed_beat_times;

  /// Throws InvalidConfig.
  void validate() const;
  bool operator==(const SynthConfig&) const = default;
};

void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);

struct GesturePair {
  PoseSequence pose;
  SpeechTrack speech;
  bool operator==(const GesturePair&) const = default;
};

struct GestureDataset {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t version = kVersion;
  double fps = 15.0;
  int seq_len = 34;
  int bone_count = 9;
  int dims = 3;
  int feature_dim = 4;
  std::uint64_t seed = 0;
  SynthConfig generator_config;
  std::vector<GesturePair> pairs;

  std::size_t size() const { return pairs.size(); }
  std::vector<PoseSequence> poses() const;
  std::vector<SpeechTrack> speech() const;
  bool operator==(const GestureDataset&) const = default;
};

/// Frame index a beat time is planted at.
int beat_frame(double time, double fps);

GestureDataset generate(const SynthConfig& config, const SkeletonTopology& topo, std::uint64_t seed);

/// Seeded shuffled partition into (train, rest).
std::pair<GestureDataset, GestureDataset> split(const GestureDataset& dataset, double train_fraction,
                                                std::uint64_t seed);

/// Same dataset with every pose replaced by its depth-dropped projection.
GestureDataset project_dataset(const GestureDataset& dataset);

/// Binary "GDB1" file plus a JSON sidecar at `<path>.json`.
void save_dataset(const GestureDataset& dataset, const std::filesystem::path& path);
GestureDataset load_dataset(const std::filesystem::path& path);

void write_dataset(const GestureDataset& dataset, std::ostream& out);
GestureDataset read_dataset(std::istream& in);

}  // namespace gesture::synth
