#pragma once

#include <span>
#include <vector>

#include "gesture/nn/tensor.hpp"
#include "gesture/skeleton.hpp"
#include "gesture/synth_data.hpp"

namespace gesture {

/// [batch, frames, bones * dims]
nn::Tensor poses_to_tensor(std::span<const skeleton::PoseSequence> seqs);

std::vector<skeleton::PoseSequence> tensor_to_poses(const nn::Tensor& t, int bone_count, int dims, double fps);

/// [batch, frames, feature_dim]
nn::Tensor speech_to_tensor(std::span<const synth::SpeechTrack> tracks);

}  // namespace gesture
