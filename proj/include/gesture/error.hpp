#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gesture {

enum class ErrorCode {
  ZeroBoneLength,
  DimensionMismatch,
  InvalidTopology,
  InvalidConfig,
  InvalidFraction,
  ShapeMismatch,
  NoForwardState,
  StepOutOfRange,
  NoiseAtFinalStep,
  NonFiniteLoss,
  FrameMismatch,
  EmptyDataset,
  TooFewSamples,
  DimMismatch,
  NonFiniteInput,
  TooShort,
  EmptyAudioBeats,
  EmptyKinematicBeats,
  MissingCheckpoint,
  ConfigInvalid,
  BadFormat,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Single exception type used across the library; `code()` identifies the
/// failure class so callers (and tests) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gesture
