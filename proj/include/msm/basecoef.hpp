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

// Base dynamic coefficients of the bone parameters.
//
// Inverse dynamics is linear in theta = (m, m c, I_o) per body, where I_o is
// the inertia about the body origin (xx, yy, zz, xy, xz, yz). Sampling the
// regressor Y (tau = Y theta) at random states and reducing the stack with a
// column-pivoted QR gives the identifiable combinations beta = B theta. B has
// an identity block on the independent columns picked by the pivoting.

#ifndef MSM_BASECOEF_HPP_
#define MSM_BASECOEF_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msm/model.hpp"

namespace msm {

// (m, m c, I about the origin) from the stored (m, c, I about the com) form.
std::array<double, 10> linear_params(const BoneParamsd& b);
// Inverse of linear_params. Throws LogicError for m <= 0.
BoneParamsd bone_from_linear(std::span<const double> theta);
// Stacked over bodies, 10 entries each.
std::vector<double> stacked_theta(std::span<const BoneParamsd> bones);

// Names such as "ulna.mcx" or "radius.Iyz" in stacked order.
std::vector<std::string> theta_names(const ArmModel& model);

// dof x 10 * bodies; column j is RNEA (gravity included) with theta = e_j.
Eigen::MatrixXd regressor(const ArmModel& model, std::span<const double> q,
                          std::span<const double> qd, std::span<const double> qdd);

struct BaseParamMap {
  int rank = 0;
  double tolerance = 1e-8;                // relative to the largest singular value
  std::vector<int> independent;           // theta indices with unit entries in B
  Eigen::MatrixXd B;                      // rank x n
  Eigen::MatrixXd null_space;             // n x (n - rank), B * null_space = 0
  Eigen::VectorXd singular_values;        // of the column-scaled stack
  std::vector<std::string> column_names;  // theta names
};

// Random states: q uniform in [-pi, pi], qd and qdd uniform in [-2, 2].
// Throws LogicError for fewer than 200 samples and NumericError when the
// independent block is too ill-conditioned to invert.
BaseParamMap base_parameters(const ArmModel& model, int samples = 500, std::uint64_t seed = 1,
                             double tolerance = 1e-8);

Eigen::VectorXd coefficients(const BaseParamMap& map, std::span<const double> theta);

// Largest |Y theta - Y_independent beta| over fresh random states.
double projection_residual(const BaseParamMap& map, const ArmModel& model,
                           std::span<const double> theta, int samples, std::uint64_t seed);

struct CoefficientError {
  double truth = 0.0;
  double estimate = 0.0;
  double error = 0.0;     // percent, or absolute when `absolute`
  bool absolute = false;  // |truth| < 1e-12
};

std::vector<CoefficientError> coefficient_error(std::span<const BoneParamsd> estimate,
                                                std::span<const BoneParamsd> truth,
                                                const BaseParamMap& map);

// "radius.Ixx + 0.3 ulna.mcz - ..." with entries below 1e-10 omitted.
std::string coefficient_expression(const BaseParamMap& map, int k);

// Text table: index, composition, truth, estimate, % error.
std::string coefficient_report(const BaseParamMap& map, std::span<const CoefficientError> errors);

}  // namespace msm

#endif  // MSM_BASECOEF_HPP_
