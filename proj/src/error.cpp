#include "gesture/error.hpp"

namespace gesture {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroBoneLength: return "ZeroBoneLength";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidTopology: return "InvalidTopology";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidFraction: return "InvalidFraction";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NoForwardState: return "NoForwardState";
    case ErrorCode::StepOutOfRange: return "StepOutOfRange";
    case ErrorCode::NoiseAtFinalStep: return "NoiseAtFinalStep";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::FrameMismatch: return "FrameMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::EmptyAudioBeats: return "EmptyAudioBeats";
    case ErrorCode::EmptyKinematicBeats: return "EmptyKinematicBeats";
    case ErrorCode::MissingCheckpoint: return "MissingCheckpoint";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::BadFormat: return "BadFormat";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace gesture
