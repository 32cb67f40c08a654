#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "gesture/nn/layers.hpp"

namespace gesture::nn {

/// Named parameter tensors in declaration order.
struct ModelParams {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t version = kVersion;
  std::uint64_t init_seed = 0;  // recorded in sidecars, not in the CKP1 payload
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& at(const std::string& name) const;
  bool operator==(const ModelParams& other) const { return version == other.version && tensors == other.tensors; }
};

/// Snapshot of parameter values. Throws InvalidConfig on duplicate names.
ModelParams collect_params(const std::vector<Parameter*>& params, std::uint64_t init_seed = 0);

/// Copies values into `params` by name; throws ShapeMismatch or
/// MissingCheckpoint when the two sets disagree.
void assign_params(const ModelParams& source, const std::vector<Parameter*>& params);

/// Rounds every value to float so checkpoints reproduce the live model exactly.
void round_to_f32(const std::vector<Parameter*>& params);

void write_checkpoint(const ModelParams& params, std::ostream& out);
ModelParams read_checkpoint(std::istream& in);
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

/// Serialized CKP1 bytes.
std::string checkpoint_bytes(const ModelParams& params);

std::string sha256_hex(const std::string& bytes);

}  // namespace gesture::nn
