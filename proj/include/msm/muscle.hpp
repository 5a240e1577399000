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

// Hill-type muscle with an inelastic tendon and no pennation:
//
//   F = a * F_o * fL(l~) * fV(v~) + F_o * fP(l~)
//   l~ = l / l_o,  v~ = v / (l_o * v_max)
//
// Velocity is positive when lengthening; v~ = -1 is maximum shortening.

#ifndef MSM_MUSCLE_HPP_
#define MSM_MUSCLE_HPP_

#include <cmath>

#include "msm/model.hpp"

namespace msm {

namespace curves {

inline constexpr double kLengthWidth = 0.45;
inline constexpr double kShorteningShape = 0.25;
inline constexpr double kLengtheningAsymptote = 1.5;
inline constexpr double kLengtheningShape = 7.5;
inline constexpr double kPassiveShape = 4.0;
// fP reaches 1 at l~ = 1.6.
inline constexpr double kPassiveStrainAtOne = 0.6;

template <class T>
T force_length(const T& lt) {
  using std::exp;
  const T d = lt - T(1.0);
  return exp(-(d * d) / T(kLengthWidth));
}

// Kinks at v~ = 0 (the shortening branch is used) and at v~ = -1, below
// which the curve is clamped to zero.
template <class T>
T force_velocity(const T& vt) {
  if (value_of(vt) <= 0.0) {
    if (value_of(vt) < -1.0) return T(0.0);
    return (T(1.0) + vt) / (T(1.0) - vt / T(kShorteningShape));
  }
  return T(kLengtheningAsymptote) - T(kLengtheningAsymptote - 1.0) * (T(1.0) + vt) /
                                        (T(1.0) + T(kLengtheningShape) * vt);
}

// Zero at and below optimal length.
template <class T>
T passive_force(const T& lt) {
  using std::exp;
  if (value_of(lt) <= 1.0) return T(0.0);
  static const double kNorm = std::exp(kPassiveShape * kPassiveStrainAtOne) - 1.0;
  return (exp(T(kPassiveShape) * (lt - T(1.0))) - T(1.0)) / T(kNorm);
}

}  // namespace curves

// Throws LogicError for activation outside [0, 1] or non-positive length.
template <class T>
T hill_force(const MuscleParams<T>& p, const T& length, const T& velocity,
             double activation) {
  if (!(activation >= 0.0 && activation <= 1.0)) {
    throw LogicError("hill_force: activation outside [0, 1]");
  }
  if (!(value_of(length) > 0.0)) throw LogicError("hill_force: non-positive length");
  const T lt = length / p.l_opt;
  const T vt = velocity / (p.l_opt * p.v_max);
  const T active = T(activation) * curves::force_length(lt) * curves::force_velocity(vt);
  return p.f_max * (active + curves::passive_force(lt));
}

}  // namespace msm

#endif  // MSM_MUSCLE_HPP_
