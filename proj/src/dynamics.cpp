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

#include "msm/dynamics.hpp"

namespace msm {

std::vector<double> mass_matrix(const ArmModel& model, std::span<const double> q,
                                std::span<const BoneParams<double>> bones) {
  const auto I = link_inertias<double>(model, bones);
  const std::size_t n = model.links().size();
  const std::vector<double> zero(n, 0.0);
  std::vector<double> M(n * n, 0.0);
  std::vector<double> unit(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    unit[j] = 1.0;
    const auto col = rnea<double>(model, q, zero, unit, I, /*with_gravity=*/false);
    for (std::size_t i = 0; i < n; ++i) M[i * n + j] = col[i];
    unit[j] = 0.0;
  }
  return M;
}

double kinetic_energy(const ArmModel& model, std::span<const double> q,
                      std::span<const double> qd, std::span<const BoneParams<double>> bones) {
  const std::vector<double> M = mass_matrix(model, q, bones);
  const std::size_t n = qd.size();
  double e = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) e += qd[i] * M[i * n + j] * qd[j];
  }
  return 0.5 * e;
}

}  // namespace msm
