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

#include "msm/kinematics.hpp"

namespace msm {

MomentArms moment_arms(const ArmModel& model, std::span<const double> q) {
  using ad::DiffScalar;
  ad::Tape tape;
  ad::TapeScope scope(tape);
  std::vector<DiffScalar> qa;
  qa.reserve(q.size());
  for (double v : q) qa.push_back(ad::leaf(v));
  const std::vector<DiffScalar> lengths =
      muscle_lengths<DiffScalar>(model, std::span<const DiffScalar>(qa));

  MomentArms J;
  J.rows = model.muscle_count();
  J.cols = model.dof();
  J.data.assign(static_cast<std::size_t>(J.rows) * J.cols, 0.0);
  for (int i = 0; i < J.rows; ++i) {
    if (lengths[i].is_constant()) continue;  // path fixed in the world
    const ad::Gradient g = ad::backward(lengths[i]);
    for (int j = 0; j < J.cols; ++j) J(i, j) = g[qa[j]];
  }
  return J;
}

MuscleState muscle_state(const ArmModel& model, std::span<const double> q,
                         std::span<const double> qdot) {
  if (qdot.size() != q.size()) throw LogicError("muscle_state: qdot has wrong length");
  MuscleState s;
  s.length = muscle_lengths<double>(model, q);
  s.moment_arm = moment_arms(model, q);
  s.velocity.assign(s.length.size(), 0.0);
  for (int i = 0; i < s.moment_arm.rows; ++i) {
    for (int j = 0; j < s.moment_arm.cols; ++j) {
      s.velocity[i] += s.moment_arm(i, j) * qdot[j];
    }
  }
  return s;
}

}  // namespace msm
