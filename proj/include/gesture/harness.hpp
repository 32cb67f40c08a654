#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gesture/diffusion.hpp"
#include "gesture/lifter.hpp"
#include "gesture/metrics.hpp"
#include "gesture/synth_data.hpp"
#include "json.hpp"

namespace gesture::harness {

enum class Setting {
  Gt3d,
  Gt2d,
  Gen3d,
  Gen2d,
  Gen2dLift,
  Gen3dTo2d,
  UncondGen3d,
  UncondGen2d,
  UncondGen2dLift,
  UncondGen3dTo2d,
};

inline constexpr Setting kAllSettings[] = {
    Setting::Gt3d,        Setting::Gt2d,        Setting::Gen3d,           Setting::Gen2d,
    Setting::Gen2dLift,   Setting::Gen3dTo2d,   Setting::UncondGen3d,     Setting::UncondGen2d,
    Setting::UncondGen2dLift, Setting::UncondGen3dTo2d,
};

std::string_view setting_name(Setting s);
/// Throws ConfigInvalid for an unknown name.
Setting parse_setting(std::string_view name);
/// Evaluation space, 3 or 2.
int setting_space(Setting s);

/// Trained models an experiment needs; each maps to one artifact file.
enum class Artifact { Generator3d, Generator2d, UncondGenerator3d, UncondGenerator2d, Lifter, Encoder3d, Encoder2d };

std::string_view artifact_name(Artifact a);

struct ExperimentConfig {
  std::uint64_t seed = 0;
  synth::SynthConfig corpus;
  double train_fraction = 0.8;
  std::vector<Setting> settings{std::begin(kAllSettings), std::end(kAllSettings)};
  diffusion::GeneratorConfig generator;
  lifter::LifterConfig lifter;
  metrics::EncoderConfig encoder;
  metrics::BCParams bc;
  int diversity_n = 64;
  int samples = 512;
  metrics::FgdVariant fgd_variant = metrics::FgdVariant::Standard;
  std::filesystem::path artifacts = "artifacts";
  /// Train artifacts that are not on disk; when false they must exist.
  bool train_missing = true;
  /// Evaluate independent settings and train independent models concurrently.
  bool parallel = false;

  /// Throws ConfigInvalid.
  void validate() const;
  /// Artifacts required by `settings`.
  std::vector<Artifact> required_artifacts() const;
  /// SHA-256 over the result-determining fields.
  std::string hash() const;
};

/// Component `seed` keys are rejected: every seed derives from `seed`.
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Substream seeds derived from the master seed by tag.
struct SeedPlan {
  std::uint64_t master, corpus, split, lifter, encoder3d, encoder2d, sampling, diversity;
  std::uint64_t generator(Artifact a) const;
  static SeedPlan from(std::uint64_t master);
};

/// Component configs with the derived seeds filled in.
diffusion::GeneratorConfig generator_config(const ExperimentConfig& c, Artifact a);
lifter::LifterConfig lifter_config(const ExperimentConfig& c);
metrics::EncoderConfig encoder_config(const ExperimentConfig& c, int space);

std::filesystem::path dataset_path(const ExperimentConfig& c);
std::filesystem::path artifact_path(const ExperimentConfig& c, Artifact a);

/// Corpus from disk when present and matching, generated (and saved) otherwise.
synth::GestureDataset prepare_dataset(const ExperimentConfig& c);
/// (train, test) split of the corpus.
std::pair<synth::GestureDataset, synth::GestureDataset> split_dataset(const ExperimentConfig& c,
                                                                      const synth::GestureDataset& corpus);

/// Trains one artifact on the training split and saves it.
void train_artifact(const ExperimentConfig& c, const synth::GestureDataset& train, Artifact a);

struct MetricRow {
  Setting setting = Setting::Gt3d;
  int space = 3;
  double fgd = 0.0;
  double bc = 0.0;
  double diversity = 0.0;
  std::optional<double> mpjpe;
  int n_diversity = 0;
  double bc_sigma = 0.0;
  double beat_threshold = 0.0;
  std::string encoder_sha;
  std::uint64_t seed = 0;

  // Metadata only.
  double bc_beat_pooled = 0.0;
  int sequences = 0;
  int sequences_without_kinematic_beats = 0;
  std::map<std::string, std::string> checkpoints;  // artifact name -> sha256
};

struct MetricReport {
  std::vector<MetricRow> rows;  // 3D rows first, then 2D, each in setting order
  nlohmann::json metadata;
};

/// Loads or trains every required model, generates each setting's gestures and
/// scores them against the test split in that setting's space. Module errors
/// are rethrown with the failing setting named.
MetricReport run_experiment(const ExperimentConfig& config);

inline constexpr const char* kCsvHeader =
    "setting,space,fgd,bc,diversity,mpjpe,n_diversity,bc_sigma,beat_threshold,encoder_sha,seed";

void write_csv(const MetricReport& report, std::ostream& out);
std::vector<MetricRow> read_csv(std::istream& in);
/// Tables grouped like the published ones: conditional 3D and 2D blocks, then
/// the unconditional ablation, with published numbers as footnotes.
void write_markdown(const std::vector<MetricRow>& rows, const nlohmann::json& metadata, std::ostream& out);

/// results.csv, metadata.json and report.md under `dir`.
void write_report(const MetricReport& report, const std::filesystem::path& dir);

}  // namespace gesture::harness
