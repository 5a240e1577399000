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

// Unconstrained encodings of physical parameters.
//
// The learnable vector has one entry per flattened parameter. Scalar entries
// (muscle parameters, mass, centre of mass) are sigmoid multipliers on a
// baseline value,
//
//   p = p0 * 10^(2 * sigmoid(x) - 1),   so p / p0 lies in [0.1, 10].
//
// The six inertia entries of a bone are offsets from the baseline Cholesky
// factor L0 of Sigma = tr(I)/2 * 1 - I, in units of s, the mean diagonal of
// L0:
//
//   L = L0 + s x,  Sigma = L L^T + c * 1,  I = tr(Sigma) * 1 - Sigma,
//
// which is SPD and satisfies the triangle inequality for every real x.
// L entries are ordered (L00, L11, L22, L10, L20, L21).

#ifndef MSM_REPARAM_HPP_
#define MSM_REPARAM_HPP_

#include <array>
#include <span>
#include <vector>

#include "msm/model.hpp"

namespace msm {

inline constexpr double kMinMultiplier = 0.1;
inline constexpr double kMaxMultiplier = 10.0;

struct ReparamConfig {
  double positivity_bias = 1e-6;  // kg, for the squaring encoding
  double cholesky_bias = 1e-7;    // kg m^2
  FullParamsd baseline;
  // Cholesky offsets of every baseline inertia, filled by make_reparam.
  std::vector<std::array<double, 6>> baseline_cholesky;
  // Unit of the inertia offsets per bone: mean diagonal of L0.
  std::vector<double> cholesky_scale;
  // Baseline inertia minus its decoded factor (~1e-19), added back on decode
  // so that x = 0 reproduces the baseline bit for bit.
  std::vector<std::array<double, 6>> baseline_residual;
};

// Validates the baseline and precomputes its Cholesky factors. Throws
// LogicError if the baseline is not physical or not decodable.
ReparamConfig make_reparam(const FullParamsd& baseline, double cholesky_bias = 1e-7,
                           double positivity_bias = 1e-6);

template <class T>
T multiplier_decode(const T& x, double base) {
  using std::exp;
  // 10^y = e^(y ln 10)
  const T y = T(2.0) * sigmoid(x) - T(1.0);
  return T(base) * exp(T(2.302585092994045684) * y);
}

// Throws LogicError unless value / base lies strictly inside (0.1, 10).
double multiplier_encode(double value, double base);

// m = theta^2 + b
template <class T>
T positive_from_square(const T& theta, double bias) {
  return theta * theta + T(bias);
}
double square_from_positive(double value, double bias);

template <class T>
std::array<T, 6> inertia_from_cholesky(const std::array<T, 6>& L, double bias) {
  const T& l00 = L[0];
  const T& l11 = L[1];
  const T& l22 = L[2];
  const T& l10 = L[3];
  const T& l20 = L[4];
  const T& l21 = L[5];
  const T s00 = l00 * l00 + T(bias);
  const T s11 = l10 * l10 + l11 * l11 + T(bias);
  const T s22 = l20 * l20 + l21 * l21 + l22 * l22 + T(bias);
  const T s10 = l10 * l00;
  const T s20 = l20 * l00;
  const T s21 = l20 * l10 + l21 * l11;
  return {s11 + s22, s00 + s22, s00 + s11, -s10, -s20, -s21};
}

// Inverse of inertia_from_cholesky with a positive diagonal. Throws
// LogicError when Sigma - c * 1 is not positive definite.
std::array<double, 6> cholesky_from_inertia(const std::array<double, 6>& inertia,
                                            double bias);

// Full-length learnable vector -> physical parameters.
template <class T>
FullParams<T> decode(std::span<const T> x, const ReparamConfig& cfg) {
  const FullParamsd& p0 = cfg.baseline;
  if (x.size() != p0.size()) throw LogicError("decode: learnable vector has wrong length");
  FullParams<T> out;
  out.muscles.reserve(p0.muscles.size());
  std::size_t i = 0;
  for (const auto& m : p0.muscles) {
    out.muscles.push_back({multiplier_decode(x[i], m.l_opt),
                           multiplier_decode(x[i + 1], m.f_max),
                           multiplier_decode(x[i + 2], m.v_max)});
    i += kMuscleParamCount;
  }
  out.bones.reserve(p0.bones.size());
  for (std::size_t b = 0; b < p0.bones.size(); ++b) {
    const auto& bone = p0.bones[b];
    BoneParams<T> o;
    o.mass = multiplier_decode(x[i], bone.mass);
    for (int k = 0; k < 3; ++k) o.com[k] = multiplier_decode(x[i + 1 + k], bone.com[k]);
    std::array<T, 6> L;
    for (int k = 0; k < 6; ++k) L[k] = T(cfg.baseline_cholesky[b][k]) + cfg.cholesky_scale[b] * x[i + 4 + k];
    o.inertia = inertia_from_cholesky(L, cfg.cholesky_bias);
    for (int k = 0; k < 6; ++k) o.inertia[k] = o.inertia[k] + cfg.baseline_residual[b][k];
    out.bones.push_back(o);
    i += kBoneParamCount;
  }
  return out;
}

// Inverse of decode. Throws LogicError naming the offending parameter or
// bone when `p` is outside the decodable set.
std::vector<double> encode(const FullParamsd& p, const ReparamConfig& cfg);

}  // namespace msm

#endif  // MSM_REPARAM_HPP_
