#include "gesture/skeleton.hpp"

#include <cmath>
#include <deque>

#include "gesture/error.hpp"

namespace gesture::skeleton {

SkeletonTopology::SkeletonTopology(std::vector<int> parents, std::vector<std::string> names)
    : parents_(std::move(parents)), names_(std::move(names)) {
  const int n = joint_count();
  if (n < 2) throw Error(ErrorCode::InvalidTopology, "need at least two joints");
  if (!names_.empty() && static_cast<int>(names_.size()) != n)
    throw Error(ErrorCode::InvalidTopology, "joint name count does not match joint count");

  int roots = 0;
  std::vector<std::vector<int>> children(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const int p = parents_[static_cast<std::size_t>(j)];
    if (p == -1) {
      ++roots;
      root_ = j;
    } else if (p < 0 || p >= n || p == j) {
      throw Error(ErrorCode::InvalidTopology, "joint " + std::to_string(j) + " has invalid parent");
    } else {
      children[static_cast<std::size_t>(p)].push_back(j);
    }
  }
  if (roots != 1) throw Error(ErrorCode::InvalidTopology, "expected exactly one root");

  // Breadth-first from the root; joints never reached sit on a cycle.
  std::deque<int> queue{root_};
  while (!queue.empty()) {
    const int j = queue.front();
    queue.pop_front();
    for (int c : children[static_cast<std::size_t>(j)]) {
      bone_child_.push_back(c);
      queue.push_back(c);
    }
  }
  if (static_cast<int>(bone_child_.size()) != n - 1)
    throw Error(ErrorCode::InvalidTopology, "parent graph is not a tree");
}

SkeletonTopology SkeletonTopology::upper_body() {
  return SkeletonTopology({-1, 0, 1, 2, 2, 4, 5, 2, 7, 8},
                          {"pelvis", "spine", "neck", "head", "l_shoulder", "l_elbow", "l_wrist",
                           "r_shoulder", "r_elbow", "r_wrist"});
}

PoseSequence::PoseSequence(int frames_, int bone_count_, int dims_, double fps_)
    : frames(frames_), bone_count(bone_count_), dims(dims_), fps(fps_) {
  if (frames < 0 || bone_count < 1 || (dims != 2 && dims != 3) || !(fps > 0))
    throw Error(ErrorCode::DimensionMismatch, "invalid pose sequence shape");
  data.assign(static_cast<std::size_t>(frames) * bone_count * dims, 0.0);
}

RawJointSequence::RawJointSequence(int frames_, int joint_count_, double fps_)
    : frames(frames_), joint_count(joint_count_), fps(fps_) {
  data.assign(static_cast<std::size_t>(frames) * joint_count * 3, 0.0);
}

std::array<double, 3> RawJointSequence::joint(int f, int j) const {
  const std::size_t i = (static_cast<std::size_t>(f) * joint_count + j) * 3;
  return {data[i], data[i + 1], data[i + 2]};
}

void RawJointSequence::set_joint(int f, int j, const std::array<double, 3>& p) {
  const std::size_t i = (static_cast<std::size_t>(f) * joint_count + j) * 3;
  data[i] = p[0];
  data[i + 1] = p[1];
  data[i + 2] = p[2];
}

PoseSequence to_directional(const RawJointSequence& raw, const SkeletonTopology& topo) {
  if (raw.joint_count != topo.joint_count())
    throw Error(ErrorCode::DimensionMismatch, "joint count differs from topology");
  PoseSequence out(raw.frames, topo.bone_count(), 3, raw.fps);
  for (int f = 0; f < raw.frames; ++f) {
    for (int b = 0; b < topo.bone_count(); ++b) {
      const auto child = raw.joint(f, topo.bone_child(b));
      const auto parent = raw.joint(f, topo.bone_parent(b));
      const double dx = child[0] - parent[0];
      const double dy = child[1] - parent[1];
      const double dz = child[2] - parent[2];
      const double len = std::sqrt(dx * dx + dy * dy + dz * dz);
      if (!(len >= kMinBoneLength))
        throw Error(ErrorCode::ZeroBoneLength,
                    "bone " + std::to_string(b) + " at frame " + std::to_string(f));
      out.at(f, b, 0) = dx / len;
      out.at(f, b, 1) = dy / len;
      out.at(f, b, 2) = dz / len;
    }
  }
  return out;
}

RawJointSequence from_directional(const PoseSequence& seq, const SkeletonTopology& topo,
                                  std::span<const double> bone_lengths) {
  if (seq.dims != 3) throw Error(ErrorCode::DimensionMismatch, "from_directional needs 3D vectors");
  if (seq.bone_count != topo.bone_count() ||
      static_cast<int>(bone_lengths.size()) != topo.bone_count())
    throw Error(ErrorCode::DimensionMismatch, "bone count differs from topology");
  for (double len : bone_lengths)
    if (!(len > 0.0)) throw Error(ErrorCode::ZeroBoneLength, "bone lengths must be positive");

  RawJointSequence raw(seq.frames, topo.joint_count(), seq.fps);
  for (int f = 0; f < seq.frames; ++f) {
    raw.set_joint(f, topo.root_index(), {0.0, 0.0, 0.0});
    for (int b = 0; b < topo.bone_count(); ++b) {
      const auto p = raw.joint(f, topo.bone_parent(b));
      const double len = bone_lengths[static_cast<std::size_t>(b)];
      raw.set_joint(f, topo.bone_child(b),
                    {p[0] + len * seq.at(f, b, 0), p[1] + len * seq.at(f, b, 1),
                     p[2] + len * seq.at(f, b, 2)});
    }
  }
  return raw;
}

PoseSequence project_2d(const PoseSequence& seq) {
  if (seq.dims != 3) throw Error(ErrorCode::DimensionMismatch, "project_2d needs 3D vectors");
  PoseSequence out(seq.frames, seq.bone_count, 2, seq.fps);
  for (int f = 0; f < seq.frames; ++f)
    for (int b = 0; b < seq.bone_count; ++b) {
      out.at(f, b, 0) = seq.at(f, b, 0);
      out.at(f, b, 1) = seq.at(f, b, 1);
    }
  return out;
}

void renormalize(PoseSequence& seq) {
  for (int f = 0; f < seq.frames; ++f)
    for (int b = 0; b < seq.bone_count; ++b) {
      auto v = seq.vec(f, b);
      double n2 = 0.0;
      for (double x : v) n2 += x * x;
      if (n2 <= 0.0) continue;
      const double inv = 1.0 / std::sqrt(n2);
      for (double& x : v) x *= inv;
    }
}

double max_unit_norm_deviation(const PoseSequence& seq) {
  double worst = 0.0;
  for (int f = 0; f < seq.frames; ++f)
    for (int b = 0; b < seq.bone_count; ++b) {
      double n2 = 0.0;
      for (double x : seq.vec(f, b)) n2 += x * x;
      worst = std::max(worst, std::abs(std::sqrt(n2) - 1.0));
    }
  return worst;
}

}  // namespace gesture::skeleton
