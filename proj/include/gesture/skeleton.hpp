#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gesture::skeleton {

/// Kinematic tree. Bone `b` connects `bone_parent(b)` to `bone_child(b)`;
/// bones are stored in topological order so parents are placed before
/// children when reconstructing positions.
class SkeletonTopology {
 public:
  /// `parents[j]` is the parent of joint j, or -1 for the single root.
  /// Throws InvalidTopology for cycles, multiple roots or bad indices.
  explicit SkeletonTopology(std::vector<int> parents, std::vector<std::string> names = {});

  /// Ten upper-body joints: pelvis, spine, neck, head, L/R shoulder, elbow, wrist.
  static SkeletonTopology upper_body();

  int joint_count() const { return static_cast<int>(parents_.size()); }
  int bone_count() const { return joint_count() - 1; }
  int root_index() const { return root_; }
  const std::vector<int>& parents() const { return parents_; }
  int bone_child(int b) const { return bone_child_[static_cast<std::size_t>(b)]; }
  int bone_parent(int b) const { return parents_[static_cast<std::size_t>(bone_child(b))]; }
  const std::vector<std::string>& joint_names() const { return names_; }

  bool operator==(const SkeletonTopology& other) const { return parents_ == other.parents_; }

 private:
  std::vector<int> parents_;
  std::vector<std::string> names_;
  std::vector<int> bone_child_;
  int root_ = 0;
};

/// Frames x bones x dims directional vectors, frame-major.
struct PoseSequence {
  int frames = 34;
  int bone_count = 9;
  int dims = 3;
  double fps = 15.0;
  std::vector<double> data;

  PoseSequence() = default;
  PoseSequence(int frames, int bone_count, int dims, double fps);

  std::size_t frame_width() const { return static_cast<std::size_t>(bone_count * dims); }
  std::size_t index(int f, int b, int d = 0) const {
    return (static_cast<std::size_t>(f) * bone_count + b) * dims + d;
  }
  double& at(int f, int b, int d) { return data[index(f, b, d)]; }
  double at(int f, int b, int d) const { return data[index(f, b, d)]; }
  std::span<double> vec(int f, int b) { return {data.data() + index(f, b), static_cast<std::size_t>(dims)}; }
  std::span<const double> vec(int f, int b) const {
    return {data.data() + index(f, b), static_cast<std::size_t>(dims)};
  }
  double duration() const { return frames / fps; }

  bool operator==(const PoseSequence&) const = default;
};

/// Absolute joint positions, frames x joints x 3.
struct RawJointSequence {
  int frames = 0;
  int joint_count = 0;
  double fps = 15.0;
  std::vector<double> data;

  RawJointSequence() = default;
  RawJointSequence(int frames, int joint_count, double fps);

  std::array<double, 3> joint(int f, int j) const;
  void set_joint(int f, int j, const std::array<double, 3>& p);
};

inline constexpr double kMinBoneLength = 1e-12;
inline constexpr int kDepthAxis = 2;

PoseSequence to_directional(const RawJointSequence& raw, const SkeletonTopology& topo);

/// Root placed at the origin, each child = parent + length * direction.
RawJointSequence from_directional(const PoseSequence& seq, const SkeletonTopology& topo,
                                  std::span<const double> bone_lengths);

/// Drops the depth coordinate without renormalizing, so near-zero 2D vectors
/// are possible when a bone points along the depth axis.
PoseSequence project_2d(const PoseSequence& seq);

/// Rescales every bone vector to unit length. Zero vectors are left as is.
void renormalize(PoseSequence& seq);

/// Largest |norm - 1| over all bone vectors.
double max_unit_norm_deviation(const PoseSequence& seq);

}  // namespace gesture::skeleton
