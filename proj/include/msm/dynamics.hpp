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

// Rigid-body dynamics of the link tree in spatial-vector form, (angular,
// linear) ordering, every quantity expressed in its own link frame at the
// joint origin. Templated on the scalar so the same recursions serve
// simulation (double) and identification (DiffScalar).

#ifndef MSM_DYNAMICS_HPP_
#define MSM_DYNAMICS_HPP_

#include <span>
#include <vector>

#include "msm/kinematics.hpp"
#include "msm/muscle.hpp"

namespace msm {

template <class T>
struct Motion {
  Vec3<T> ang;
  Vec3<T> lin;
};

template <class T>
struct Force {
  Vec3<T> ang;
  Vec3<T> lin;
};

// 6x6 symmetric inertia [[A, B], [B^T, C]] about the link origin.
template <class T>
struct SpatialInertia {
  Mat3<T> A;
  Mat3<T> B;
  Mat3<T> C;

  Force<T> operator*(const Motion<T>& m) const {
    return {A * m.ang + B * m.lin, B.transpose() * m.ang + C * m.lin};
  }
};

template <class T>
SpatialInertia<T> operator+(const SpatialInertia<T>& a, const SpatialInertia<T>& b) {
  return {a.A + b.A, a.B + b.B, a.C + b.C};
}

// From mass, centre of mass and inertia about the centre of mass.
template <class T>
SpatialInertia<T> rigid_inertia(const BoneParams<T>& b) {
  const Mat3<T> cx = skew(b.com);
  const Mat3<T> I = symmetric_from6(b.inertia);
  return {I - b.mass * (cx * cx), b.mass * cx, b.mass * Mat3<T>::identity()};
}

// From the linear parameterization theta = (m, m*c, I about the link origin
// as xx, yy, zz, xy, xz, yz).
template <class T>
SpatialInertia<T> linear_inertia(std::span<const T> theta) {
  if (theta.size() != 10) throw LogicError("linear_inertia: need 10 parameters");
  const Vec3<T> h{theta[1], theta[2], theta[3]};
  std::array<T, 6> io{theta[4], theta[5], theta[6], theta[7], theta[8], theta[9]};
  return {symmetric_from6(io), skew(h), theta[0] * Mat3<T>::identity()};
}

template <class T>
Motion<T> cross_motion(const Motion<T>& v, const Motion<T>& m) {
  return {cross(v.ang, m.ang), cross(v.ang, m.lin) + cross(v.lin, m.ang)};
}

template <class T>
Force<T> cross_force(const Motion<T>& v, const Force<T>& f) {
  return {cross(v.ang, f.ang) + cross(v.lin, f.lin), cross(v.ang, f.lin)};
}

// Parent -> child coordinate transform of a revolute link: the child frame is
// the parent frame rotated by `rot` (child -> parent) about `r`.
template <class T>
struct LinkTransform {
  Mat3<T> rot;
  Vec3<T> r;

  Motion<T> to_child(const Motion<T>& m) const {
    const Mat3<T> rt = rot.transpose();
    return {rt * m.ang, rt * (m.lin + cross(m.ang, r))};
  }
  Force<T> to_parent(const Force<T>& f) const {
    const Vec3<T> lin = rot * f.lin;
    return {rot * f.ang + cross(r, lin), lin};
  }
  // X^T I X: child-frame inertia expressed at the parent frame.
  SpatialInertia<T> to_parent(const SpatialInertia<T>& I) const {
    const Mat3<T> rt = rot.transpose();
    const Mat3<T> A = rot * (I.A * rt);
    const Mat3<T> B = rot * (I.B * rt);
    const Mat3<T> C = rot * (I.C * rt);
    const Mat3<T> rx = skew(r);
    const Mat3<T> rxC = rx * C;
    return {A + rx * B.transpose() - B * rx - rxC * rx, B + rxC, C};
  }
};

template <class T>
LinkTransform<T> link_transform(const Link& link, const T& q) {
  return {axis_rotation(link.axis, q), Vec3<T>::from(link.origin)};
}

// Per-link inertia, zero for the massless links inside compound joints.
template <class T>
std::vector<SpatialInertia<T>> link_inertias(const ArmModel& model,
                                             std::span<const BoneParams<T>> bones) {
  if (bones.size() != static_cast<std::size_t>(model.body_count())) {
    throw LogicError("link_inertias: one bone parameter block per body required");
  }
  std::vector<SpatialInertia<T>> out(model.links().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int b = model.links()[i].body;
    if (b >= 0) out[i] = rigid_inertia(bones[b]);
  }
  return out;
}

template <class T>
std::vector<SpatialInertia<T>> link_inertias_linear(const ArmModel& model,
                                                    std::span<const T> theta) {
  if (theta.size() != static_cast<std::size_t>(kBoneParamCount * model.body_count())) {
    throw LogicError("link_inertias_linear: 10 parameters per body required");
  }
  std::vector<SpatialInertia<T>> out(model.links().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int b = model.links()[i].body;
    if (b >= 0) out[i] = linear_inertia<T>(theta.subspan(kBoneParamCount * b, kBoneParamCount));
  }
  return out;
}

namespace detail {
template <class T>
void check_sizes(const ArmModel& model, std::size_t a, std::size_t b, std::size_t c,
                 std::size_t inertias) {
  const std::size_t n = model.links().size();
  if (a != n || b != n || c != n || inertias != n) {
    throw LogicError("dynamics: argument sizes do not match the model");
  }
}
}  // namespace detail

// Articulated Body Algorithm: qddot solving M(q) qddot + h(q, qdot) = tau.
// Throws NumericError when an articulated inertia is not positive along its
// joint axis.
template <class T>
std::vector<T> aba(const ArmModel& model, std::span<const T> q, std::span<const T> qd,
                   std::span<const T> tau, std::span<const SpatialInertia<T>> inertia) {
  detail::check_sizes<T>(model, q.size(), qd.size(), tau.size(), inertia.size());
  const auto& links = model.links();
  const std::size_t n = links.size();

  std::vector<LinkTransform<T>> X(n);
  std::vector<Motion<T>> v(n), c(n);
  std::vector<SpatialInertia<T>> IA(inertia.begin(), inertia.end());
  std::vector<Force<T>> pA(n);

  for (std::size_t i = 0; i < n; ++i) {
    const Vec3<T> s = Vec3<T>::from(links[i].axis);
    X[i] = link_transform(links[i], q[i]);
    const Motion<T> vj{qd[i] * s, Vec3<T>{}};
    if (links[i].parent < 0) {
      v[i] = vj;
      c[i] = Motion<T>{};
    } else {
      const Motion<T> vp = X[i].to_child(v[links[i].parent]);
      v[i] = {vp.ang + vj.ang, vp.lin};
      c[i] = cross_motion(v[i], vj);
    }
    pA[i] = cross_force(v[i], inertia[i] * v[i]);
  }

  std::vector<Vec3<T>> U_ang(n), U_lin(n);
  std::vector<T> D(n), u(n);
  for (std::size_t k = n; k-- > 0;) {
    const Vec3<T> s = Vec3<T>::from(links[k].axis);
    const SpatialInertia<T>& I = IA[k];
    U_ang[k] = I.A * s;
    U_lin[k] = I.B.transpose() * s;
    D[k] = dot(s, U_ang[k]);
    if (!(value_of(D[k]) > 0.0)) {
      throw NumericError("aba: articulated inertia not positive definite (invalid bone parameters)");
    }
    u[k] = tau[k] - dot(s, pA[k].ang);
    const int parent = links[k].parent;
    if (parent < 0) continue;

    const T inv = T(1.0) / D[k];
    const Vec3<T> ua = inv * U_ang[k];
    const Vec3<T> ul = inv * U_lin[k];
    const SpatialInertia<T> Ia{I.A - outer(U_ang[k], ua), I.B - outer(U_ang[k], ul),
                               I.C - outer(U_lin[k], ul)};
    const Force<T> Iac = Ia * c[k];
    const T uk = u[k];
    const Force<T> pa{pA[k].ang + Iac.ang + uk * ua, pA[k].lin + Iac.lin + uk * ul};
    IA[parent] = IA[parent] + X[k].to_parent(Ia);
    const Force<T> fp = X[k].to_parent(pa);
    pA[parent].ang += fp.ang;
    pA[parent].lin += fp.lin;
  }

  const Vec3d& g = model.gravity();
  const Motion<T> a0{Vec3<T>{}, Vec3<T>{T(-g[0]), T(-g[1]), T(-g[2])}};
  std::vector<Motion<T>> a(n);
  std::vector<T> qdd(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3<T> s = Vec3<T>::from(links[i].axis);
    const int parent = links[i].parent;
    const Motion<T> ap = X[i].to_child(parent < 0 ? a0 : a[parent]);
    a[i] = {ap.ang + c[i].ang, ap.lin + c[i].lin};
    qdd[i] = (u[i] - dot(U_ang[i], a[i].ang) - dot(U_lin[i], a[i].lin)) / D[i];
    a[i].ang += qdd[i] * s;
  }
  return qdd;
}

// Recursive Newton-Euler inverse dynamics, gravity included.
template <class T>
std::vector<T> rnea(const ArmModel& model, std::span<const T> q, std::span<const T> qd,
                    std::span<const T> qdd, std::span<const SpatialInertia<T>> inertia,
                    bool with_gravity = true) {
  detail::check_sizes<T>(model, q.size(), qd.size(), qdd.size(), inertia.size());
  const auto& links = model.links();
  const std::size_t n = links.size();
  std::vector<LinkTransform<T>> X(n);
  std::vector<Motion<T>> v(n), a(n);
  std::vector<Force<T>> f(n);
  const Vec3d& g = with_gravity ? model.gravity() : Vec3d{0.0, 0.0, 0.0};
  const Motion<T> a0{Vec3<T>{}, Vec3<T>{T(-g[0]), T(-g[1]), T(-g[2])}};

  for (std::size_t i = 0; i < n; ++i) {
    const Vec3<T> s = Vec3<T>::from(links[i].axis);
    X[i] = link_transform(links[i], q[i]);
    const int parent = links[i].parent;
    const Motion<T> vp = parent < 0 ? Motion<T>{} : X[i].to_child(v[parent]);
    const Motion<T> ap = X[i].to_child(parent < 0 ? a0 : a[parent]);
    const Motion<T> vj{qd[i] * s, Vec3<T>{}};
    v[i] = {vp.ang + vj.ang, vp.lin};
    const Motion<T> cv = cross_motion(v[i], vj);
    a[i] = {ap.ang + qdd[i] * s + cv.ang, ap.lin + cv.lin};
    const Force<T> Ia = inertia[i] * a[i];
    const Force<T> b = cross_force(v[i], inertia[i] * v[i]);
    f[i] = {Ia.ang + b.ang, Ia.lin + b.lin};
  }
  std::vector<T> tau(n);
  for (std::size_t k = n; k-- > 0;) {
    tau[k] = dot(Vec3<T>::from(links[k].axis), f[k].ang);
    const int parent = links[k].parent;
    if (parent < 0) continue;
    const Force<T> fp = X[k].to_parent(f[k]);
    f[parent].ang += fp.ang;
    f[parent].lin += fp.lin;
  }
  return tau;
}

template <class T>
std::vector<T> forward_dynamics(const ArmModel& model, std::span<const T> q,
                                std::span<const T> qd, std::span<const T> tau,
                                std::span<const BoneParams<T>> bones) {
  const auto I = link_inertias<T>(model, bones);
  return aba<T>(model, q, qd, tau, I);
}

template <class T>
std::vector<T> inverse_dynamics(const ArmModel& model, std::span<const T> q,
                                std::span<const T> qd, std::span<const T> qdd,
                                std::span<const BoneParams<T>> bones) {
  const auto I = link_inertias<T>(model, bones);
  return rnea<T>(model, q, qd, qdd, I);
}

// Muscle forces -> joint torques (minus joint damping) -> ABA, with muscle kinematics supplied by
// the caller (the dataset record) and all parameters possibly active.
template <class T>
std::vector<T> predict_qddot(const ArmModel& model, std::span<const double> q,
                             std::span<const double> qd, std::span<const double> activation,
                             const FullParams<T>& params, std::span<const double> length,
                             std::span<const double> velocity, const MomentArms& J) {
  const std::size_t nm = model.muscles().size();
  if (activation.size() != nm || length.size() != nm || velocity.size() != nm ||
      params.muscles.size() != nm) {
    throw LogicError("predict_qddot: muscle quantities do not match the model");
  }
  std::vector<T> force(nm);
  for (std::size_t i = 0; i < nm; ++i) {
    force[i] = hill_force(params.muscles[i], T(length[i]), T(velocity[i]), activation[i]);
  }
  std::vector<T> tau = joint_torques<T>(J, force);
  const auto& damping = model.joint_damping();
  for (std::size_t j = 0; j < tau.size(); ++j) {
    if (damping[j] != 0.0) tau[j] = tau[j] - damping[j] * qd[j];
  }
  const std::vector<T> qt(q.begin(), q.end());
  const std::vector<T> qdt(qd.begin(), qd.end());
  return forward_dynamics<T>(model, qt, qdt, tau, params.bones);
}

// Joint-space mass matrix, column j = RNEA with unit qdd_j, zero velocity
// and no gravity. Row-major dof x dof.
std::vector<double> mass_matrix(const ArmModel& model, std::span<const double> q,
                                std::span<const BoneParams<double>> bones);

double kinetic_energy(const ArmModel& model, std::span<const double> q,
                      std::span<const double> qd, std::span<const BoneParams<double>> bones);

}  // namespace msm

#endif  // MSM_DYNAMICS_HPP_
