// Copyright 2026 The msmid Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MSM_KINEMATICS_HPP_
#define MSM_KINEMATICS_HPP_

#include <span>
#include <vector>

#include "msm/model.hpp"

namespace msm {

template <class T>
struct Pose {
  Mat3<T> rotation;  // link frame -> world
  Vec3<T> origin;    // link origin in world
};

// World pose of every link.
template <class T>
std::vector<Pose<T>> forward_kinematics(const ArmModel& model, std::span<const T> q) {
  if (q.size() != static_cast<std::size_t>(model.dof())) {
    throw LogicError("forward_kinematics: q has wrong length");
  }
  std::vector<Pose<T>> poses(model.links().size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Link& link = model.links()[i];
    const Mat3<T> joint = axis_rotation(link.axis, q[i]);
    const Vec3<T> origin = Vec3<T>::from(link.origin);
    if (link.parent < 0) {
      poses[i] = {joint, origin};
    } else {
      const Pose<T>& p = poses[link.parent];
      poses[i] = {p.rotation * joint, p.origin + p.rotation * origin};
    }
  }
  return poses;
}

template <class T>
Vec3<T> via_point_world(const ArmModel& model, const std::vector<Pose<T>>& poses,
                        const ViaPoint& vp) {
  const Vec3<T> local = Vec3<T>::from(vp.offset);
  if (vp.body == kGround) return local;
  const Pose<T>& p = poses[model.body_link(vp.body)];
  return p.origin + p.rotation * local;
}

// Path length of every muscle: sum of straight segments between via-points.
template <class T>
std::vector<T> muscle_lengths(const ArmModel& model, std::span<const T> q) {
  const auto poses = forward_kinematics<T>(model, q);
  std::vector<T> out;
  out.reserve(model.muscles().size());
  for (const MuscleGeometry& m : model.muscles()) {
    T len(0.0);
    Vec3<T> prev = via_point_world(model, poses, m.path.front());
    for (std::size_t k = 1; k < m.path.size(); ++k) {
      const Vec3<T> cur = via_point_world(model, poses, m.path[k]);
      len += norm(cur - prev);
      prev = cur;
    }
    out.push_back(len);
  }
  return out;
}

// Row-major muscles x dof matrix.
struct MomentArms {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  double operator()(int i, int j) const { return data[i * cols + j]; }
  double& operator()(int i, int j) { return data[i * cols + j]; }
};

// J[i][j] = d l_i / d q_j, obtained by differentiating muscle_lengths.
// Positive means the path lengthens as q_j increases.
MomentArms moment_arms(const ArmModel& model, std::span<const double> q);

struct MuscleState {
  std::vector<double> length;    // m
  std::vector<double> velocity;  // m/s, positive when lengthening
  MomentArms moment_arm;
};

MuscleState muscle_state(const ArmModel& model, std::span<const double> q,
                         std::span<const double> qdot);

// Joint torques tau = -J^T F: tension shortens the path.
template <class T>
std::vector<T> joint_torques(const MomentArms& J, std::span<const T> force) {
  if (force.size() != static_cast<std::size_t>(J.rows)) {
    throw LogicError("joint_torques: force length does not match moment arms");
  }
  std::vector<T> tau(J.cols, T(0.0));
  std::vector<double> column(J.rows);
  for (int j = 0; j < J.cols; ++j) {
    if constexpr (std::is_same_v<T, double>) {
      double s = 0.0;
      for (int i = 0; i < J.rows; ++i) s -= J(i, j) * force[i];
      tau[j] = s;
    } else {
      for (int i = 0; i < J.rows; ++i) column[i] = -J(i, j);
      tau[j] = ad::dot(force, std::span<const double>(column));
    }
  }
  return tau;
}

}  // namespace msm

#endif  // MSM_KINEMATICS_HPP_
