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

#include "msm/basecoef.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

#include "msm/dynamics.hpp"
#include "msm/error.hpp"

namespace msm {
namespace {

Eigen::Matrix3d sym(const std::array<double, 6>& v) {
  Eigen::Matrix3d m;
  m << v[0], v[3], v[4], v[3], v[1], v[5], v[4], v[5], v[2];
  return m;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& c) {
  Eigen::Matrix3d m;
  m << 0, -c.z(), c.y(), c.z(), 0, -c.x(), -c.y(), c.x(), 0;
  return m;
}

std::array<double, 6> six(const Eigen::Matrix3d& m) {
  return {m(0, 0), m(1, 1), m(2, 2), m(0, 1), m(0, 2), m(1, 2)};
}

// Stacked regressor over random states.
Eigen::MatrixXd sample_stack(const ArmModel& model, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> rate(-2.0, 2.0);
  const int n = model.dof();
  const int cols = kBoneParamCount * model.body_count();
  Eigen::MatrixXd W(static_cast<Eigen::Index>(samples) * n, cols);
  std::vector<double> q(n), qd(n), qdd(n);
  for (int s = 0; s < samples; ++s) {
    for (int j = 0; j < n; ++j) {
      q[j] = angle(rng);
      qd[j] = rate(rng);
      qdd[j] = rate(rng);
    }
    W.middleRows(static_cast<Eigen::Index>(s) * n, n) = regressor(model, q, qd, qdd);
  }
  return W;
}

}  // namespace

std::array<double, 10> linear_params(const BoneParamsd& b) {
  const Eigen::Vector3d c(b.com[0], b.com[1], b.com[2]);
  const Eigen::Matrix3d cx = skew(c);
  const auto io = six(sym(b.inertia) - b.mass * cx * cx);
  return {b.mass, b.mass * c.x(), b.mass * c.y(), b.mass * c.z(),
          io[0], io[1], io[2], io[3], io[4], io[5]};
}

BoneParamsd bone_from_linear(std::span<const double> theta) {
  if (theta.size() != 10) throw LogicError("bone_from_linear: need 10 parameters");
  if (!(theta[0] > 0.0)) throw LogicError("bone_from_linear: mass must be positive");
  BoneParamsd b;
  b.mass = theta[0];
  const Eigen::Vector3d c(theta[1] / b.mass, theta[2] / b.mass, theta[3] / b.mass);
  for (int k = 0; k < 3; ++k) b.com[k] = c(k);
  const Eigen::Matrix3d cx = skew(c);
  b.inertia = six(sym({theta[4], theta[5], theta[6], theta[7], theta[8], theta[9]}) +
                  b.mass * cx * cx);
  return b;
}

std::vector<double> stacked_theta(std::span<const BoneParamsd> bones) {
  std::vector<double> out;
  out.reserve(kBoneParamCount * bones.size());
  for (const auto& b : bones) {
    const auto t = linear_params(b);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

std::vector<std::string> theta_names(const ArmModel& model) {
  static const char* kSuffix[] = {"m", "mcx", "mcy", "mcz", "Ixx", "Iyy", "Izz", "Ixy", "Ixz", "Iyz"};
  std::vector<std::string> out;
  for (const Body& b : model.bodies()) {
    for (const char* s : kSuffix) out.push_back(b.name + "." + s);
  }
  return out;
}

Eigen::MatrixXd regressor(const ArmModel& model, std::span<const double> q,
                          std::span<const double> qd, std::span<const double> qdd) {
  const int n = model.dof();
  const int cols = kBoneParamCount * model.body_count();
  Eigen::MatrixXd Y(n, cols);
  std::vector<double> theta(cols, 0.0);
  for (int j = 0; j < cols; ++j) {
    theta[j] = 1.0;
    const auto I = link_inertias_linear<double>(model, theta);
    const auto tau = rnea<double>(model, q, qd, qdd, I);
    for (int i = 0; i < n; ++i) Y(i, j) = tau[i];
    theta[j] = 0.0;
  }
  return Y;
}

BaseParamMap base_parameters(const ArmModel& model, int samples, std::uint64_t seed,
                             double tolerance) {
  if (samples < 200) throw LogicError("base_parameters: need at least 200 samples");
  if (!(tolerance > 0.0)) throw LogicError("base_parameters: tolerance must be positive");
  const Eigen::MatrixXd W = sample_stack(model, samples, seed);
  const Eigen::Index n = W.cols();

  // Unit-norm columns so the rank test and the pivoting do not depend on units.
  Eigen::VectorXd scale = W.colwise().norm().transpose();
  const double top = scale.maxCoeff();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (scale(j) <= 1e-14 * top) scale(j) = 0.0;
  }
  Eigen::MatrixXd Ws = W;
  for (Eigen::Index j = 0; j < n; ++j) {
    Ws.col(j) = scale(j) > 0.0 ? Eigen::VectorXd(W.col(j) / scale(j))
                               : Eigen::VectorXd::Zero(W.rows());
  }

  BaseParamMap map;
  map.tolerance = tolerance;
  map.column_names = theta_names(model);
  map.singular_values = Eigen::JacobiSVD<Eigen::MatrixXd>(Ws).singularValues();
  const double smax = map.singular_values(0);
  int r = 0;
  while (r < map.singular_values.size() && map.singular_values(r) > tolerance * smax) ++r;
  map.rank = r;

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Ws);
  const auto& perm = qr.colsPermutation().indices();
  const Eigen::MatrixXd R = qr.matrixR().topRows(n).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd R1 = R.topLeftCorner(r, r);
  const Eigen::MatrixXd R2 = R.topRightCorner(r, n - r);
  const double cond = std::abs(R1(0, 0)) / std::abs(R1(r - 1, r - 1));
  if (!(cond < 1.0 / tolerance)) {
    throw NumericError("base_parameters: ill-conditioned regressor stack, use more samples");
  }
  // Scaled coordinates: beta_s = theta_s1 + R1^-1 R2 theta_s2.
  const Eigen::MatrixXd K = R1.triangularView<Eigen::Upper>().solve(R2);

  map.B = Eigen::MatrixXd::Zero(r, n);
  map.null_space = Eigen::MatrixXd::Zero(n, n - r);
  for (int i = 0; i < r; ++i) {
    const int ci = perm(i);
    map.independent.push_back(ci);
    map.B(i, ci) = 1.0;
    for (Eigen::Index k = 0; k < n - r; ++k) {
      const int ck = perm(r + k);
      // Back to physical units: beta_i = theta_ci + K(i,k) s_ck / s_ci theta_ck.
      map.B(i, ck) = K(i, k) * scale(ck) / scale(ci);
    }
  }
  for (Eigen::Index k = 0; k < n - r; ++k) {
    const int ck = perm(r + k);
    map.null_space(ck, k) = 1.0;
    for (int i = 0; i < r; ++i) map.null_space(perm(i), k) = -map.B(i, ck);
  }
  for (Eigen::Index k = 0; k < map.null_space.cols(); ++k) map.null_space.col(k).normalize();
  return map;
}

Eigen::VectorXd coefficients(const BaseParamMap& map, std::span<const double> theta) {
  if (static_cast<Eigen::Index>(theta.size()) != map.B.cols()) {
    throw LogicError("coefficients: theta has wrong length");
  }
  return map.B * Eigen::Map<const Eigen::VectorXd>(theta.data(), theta.size());
}

double projection_residual(const BaseParamMap& map, const ArmModel& model,
                           std::span<const double> theta, int samples, std::uint64_t seed) {
  const Eigen::MatrixXd W = sample_stack(model, samples, seed);
  const Eigen::VectorXd beta = coefficients(map, theta);
  Eigen::MatrixXd Wb(W.rows(), map.rank);
  for (int i = 0; i < map.rank; ++i) Wb.col(i) = W.col(map.independent[i]);
  const Eigen::VectorXd full = W * Eigen::Map<const Eigen::VectorXd>(theta.data(), theta.size());
  return (full - Wb * beta).cwiseAbs().maxCoeff();
}

std::vector<CoefficientError> coefficient_error(std::span<const BoneParamsd> estimate,
                                                std::span<const BoneParamsd> truth,
                                                const BaseParamMap& map) {
  if (estimate.size() != truth.size()) throw LogicError("coefficient_error: shape mismatch");
  const Eigen::VectorXd be = coefficients(map, stacked_theta(estimate));
  const Eigen::VectorXd bt = coefficients(map, stacked_theta(truth));
  std::vector<CoefficientError> out(map.rank);
  for (int k = 0; k < map.rank; ++k) {
    CoefficientError& e = out[k];
    e.truth = bt(k);
    e.estimate = be(k);
    e.absolute = std::abs(bt(k)) < 1e-12;
    e.error = e.absolute ? std::abs(be(k) - bt(k)) : 100.0 * std::abs(be(k) - bt(k)) / std::abs(bt(k));
  }
  return out;
}

std::string coefficient_expression(const BaseParamMap& map, int k) {
  std::ostringstream s;
  bool first = true;
  char buf[32];
  for (Eigen::Index j = 0; j < map.B.cols(); ++j) {
    const double w = map.B(k, j);
    if (std::abs(w) < 1e-10) continue;
    if (first) {
      if (w < 0) s << "-";
    } else {
      s << (w < 0 ? " - " : " + ");
    }
    if (std::abs(std::abs(w) - 1.0) > 1e-12) {
      std::snprintf(buf, sizeof buf, "%.6g ", std::abs(w));
      s << buf;
    }
    s << map.column_names[j];
    first = false;
  }
  return s.str();
}

std::string coefficient_report(const BaseParamMap& map, std::span<const CoefficientError> errors) {
  std::ostringstream s;
  char buf[128];
  std::snprintf(buf, sizeof buf, "base coefficients: %d of %zu (tolerance %.1e)\n", map.rank,
                map.column_names.size(), map.tolerance);
  s << buf;
  std::snprintf(buf, sizeof buf, "%4s  %14s  %14s  %12s  %s\n", "k", "truth", "estimate", "error",
                "composition");
  s << buf;
  for (std::size_t k = 0; k < errors.size(); ++k) {
    const auto& e = errors[k];
    std::snprintf(buf, sizeof buf, "%4zu  %14.6e  %14.6e  %11.4g%s  ", k, e.truth, e.estimate,
                  e.error, e.absolute ? "a" : "%");
    s << buf << coefficient_expression(map, static_cast<int>(k)) << "\n";
  }
  return s.str();
}

}  // namespace msm
