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

// Musculoskeletal model description and physical parameter blocks.
//
// A body owns one or more revolute joint axes that share the same origin in
// the parent frame. Internally each axis becomes a "link"; every link but the
// last of a body is massless, and the body's frame is its last link's frame.
// A frame rotates with its joint about the joint origin and is aligned with
// its parent at zero angle.

#ifndef MSM_MODEL_HPP_
#define MSM_MODEL_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "msm/linalg.hpp"

namespace msm {

inline constexpr int kGround = -1;

struct ViaPoint {
  int body = kGround;  // kGround for world-fixed points
  Vec3d offset;        // metres, in the body frame
};

struct MuscleGeometry {
  std::string name;
  std::vector<ViaPoint> path;
};

struct Body {
  std::string name;
  int parent = kGround;
  std::vector<Vec3d> joint_axes;  // unit vectors, parent-frame at zero angle
  Vec3d joint_origin;             // in the parent body frame
};

struct Link {
  int parent = -1;  // link index, -1 for ground
  Vec3d axis;
  Vec3d origin;     // joint origin in the parent link frame
  int body = -1;    // body whose inertia this link carries, or -1
};

class ArmModel {
 public:
  ArmModel() = default;
  ArmModel(std::vector<Body> bodies, std::vector<MuscleGeometry> muscles,
           Vec3d gravity);

  const std::vector<Body>& bodies() const { return bodies_; }
  const std::vector<MuscleGeometry>& muscles() const { return muscles_; }
  const std::vector<Link>& links() const { return links_; }
  const Vec3d& gravity() const { return gravity_; }
  void set_gravity(const Vec3d& g) { gravity_ = g; }
  // Fixed viscous joint damping, N m s / rad per DoF (zeros by default). It
  // is part of the known model, not a learnable parameter.
  const std::vector<double>& joint_damping() const { return damping_; }
  void set_joint_damping(std::vector<double> d);

  int dof() const { return static_cast<int>(links_.size()); }
  int body_count() const { return static_cast<int>(bodies_.size()); }
  int muscle_count() const { return static_cast<int>(muscles_.size()); }
  // Link whose frame is the body frame.
  int body_link(int body) const { return body_link_[body]; }
  int body_index(std::string_view name) const;

 private:
  std::vector<Body> bodies_;
  std::vector<MuscleGeometry> muscles_;
  std::vector<Link> links_;
  std::vector<int> body_link_;
  Vec3d gravity_{0.0, 0.0, -9.81};
  std::vector<double> damping_;
};

template <class T>
struct MuscleParams {
  T l_opt{};  // optimal fibre length, m
  T f_max{};  // maximum isometric force, N
  T v_max{};  // maximum contraction velocity, optimal lengths per second
};

// Inertia about the centre of mass, stored (xx, yy, zz, xy, xz, yz).
template <class T>
struct BoneParams {
  T mass{};
  Vec3<T> com;
  std::array<T, 6> inertia{};
};

inline constexpr int kMuscleParamCount = 3;
inline constexpr int kBoneParamCount = 10;

// Flattened order: muscles in model order as [l_opt, f_max, v_max], then
// bones in model order as [m, cx, cy, cz, Ixx, Iyy, Izz, Ixy, Ixz, Iyz].
template <class T>
struct FullParams {
  std::vector<MuscleParams<T>> muscles;
  std::vector<BoneParams<T>> bones;

  std::size_t size() const {
    return kMuscleParamCount * muscles.size() + kBoneParamCount * bones.size();
  }
};

using FullParamsd = FullParams<double>;
using BoneParamsd = BoneParams<double>;

std::vector<double> flatten(const FullParamsd& p);
FullParamsd unflatten(std::span<const double> flat, int muscles, int bones);

// Offset of bone `b`'s block in the flattened vector.
inline std::size_t bone_offset(int muscles, int b) {
  return kMuscleParamCount * muscles + kBoneParamCount * b;
}

// Human-readable names in flattened order, e.g. "BIClong.f_max".
std::vector<std::string> param_names(const ArmModel& model);

// Throws LogicError describing the first violated physical invariant:
// positive muscle scalars and mass, SPD inertia obeying the triangle
// inequality on principal moments.
void validate_params(const FullParamsd& p);
bool inertia_is_physical(const std::array<double, 6>& inertia, double tol = 0.0);

template <class T, class U>
FullParams<T> cast_params(const FullParams<U>& p) {
  FullParams<T> r;
  r.muscles.reserve(p.muscles.size());
  for (const auto& m : p.muscles) r.muscles.push_back({T(m.l_opt), T(m.f_max), T(m.v_max)});
  r.bones.reserve(p.bones.size());
  for (const auto& b : p.bones) {
    BoneParams<T> o;
    o.mass = T(b.mass);
    o.com = Vec3<T>::from(b.com);
    for (int i = 0; i < 6; ++i) o.inertia[i] = T(b.inertia[i]);
    r.bones.push_back(o);
  }
  return r;
}

template <class U>
FullParamsd params_value(const FullParams<U>& p) {
  FullParamsd r;
  for (const auto& m : p.muscles)
    r.muscles.push_back({value_of(m.l_opt), value_of(m.f_max), value_of(m.v_max)});
  for (const auto& b : p.bones) {
    BoneParams<double> o;
    o.mass = value_of(b.mass);
    for (int i = 0; i < 3; ++i) o.com[i] = value_of(b.com[i]);
    for (int i = 0; i < 6; ++i) o.inertia[i] = value_of(b.inertia[i]);
    r.bones.push_back(o);
  }
  return r;
}

struct LoadedModel {
  ArmModel model;
  FullParamsd ground_truth;
  std::vector<double> rest_posture;  // initial q for data generation
  std::uint64_t hash = 0;            // FNV-1a of the file text
};

enum class ModelCheck {
  kGeneric,  // tree structure, geometry, parameters
  kArm,      // additionally: 3 bodies, 5 DoF, 8 muscles
};

// Parses `msmmodel v1` text. Throws FormatError on schema violations and
// LogicError on invariant violations.
LoadedModel parse_model(std::string_view text, ModelCheck check = ModelCheck::kArm);
LoadedModel load_model_file(const std::string& path, ModelCheck check = ModelCheck::kArm);

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace msm

#endif  // MSM_MODEL_HPP_
