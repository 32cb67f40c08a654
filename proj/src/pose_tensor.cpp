#include "gesture/pose_tensor.hpp"

#include <algorithm>

#include "gesture/error.hpp"

namespace gesture {

nn::Tensor poses_to_tensor(std::span<const skeleton::PoseSequence> seqs) {
  if (seqs.empty()) return nn::Tensor({0, 0, 0});
  const auto& first = seqs.front();
  const std::size_t frames = static_cast<std::size_t>(first.frames);
  const std::size_t width = first.frame_width();
  nn::Tensor t({seqs.size(), frames, width});
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto& s = seqs[i];
    if (s.frames != first.frames || s.bone_count != first.bone_count || s.dims != first.dims)
      throw Error(ErrorCode::DimensionMismatch, "pose sequences differ in shape");
    std::copy(s.data.begin(), s.data.end(), t.data() + i * frames * width);
  }
  return t;
}

std::vector<skeleton::PoseSequence> tensor_to_poses(const nn::Tensor& t, int bone_count, int dims, double fps) {
  if (t.rank() != 3 || t.dim(2) != static_cast<std::size_t>(bone_count * dims))
    throw Error(ErrorCode::ShapeMismatch, "tensor is not [batch, frames, bones * dims]");
  std::vector<skeleton::PoseSequence> out;
  const std::size_t stride = t.dim(1) * t.dim(2);
  for (std::size_t i = 0; i < t.dim(0); ++i) {
    skeleton::PoseSequence s(static_cast<int>(t.dim(1)), bone_count, dims, fps);
    std::copy(t.data() + i * stride, t.data() + (i + 1) * stride, s.data.begin());
    out.push_back(std::move(s));
  }
  return out;
}

nn::Tensor speech_to_tensor(std::span<const synth::SpeechTrack> tracks) {
  if (tracks.empty()) return nn::Tensor({0, 0, 0});
  const auto& first = tracks.front();
  const std::size_t frames = static_cast<std::size_t>(first.frames);
  const std::size_t width = static_cast<std::size_t>(first.feature_dim);
  nn::Tensor t({tracks.size(), frames, width});
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const auto& s = tracks[i];
    if (s.frames != first.frames || s.feature_dim != first.feature_dim)
      throw Error(ErrorCode::FrameMismatch, "speech tracks differ in shape");
    std::copy(s.features.begin(), s.features.end(), t.data() + i * frames * width);
  }
  return t;
}

}  // namespace gesture
