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

#include "msm/reparam.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "test_util.hpp"

namespace msm {
namespace {

using testing::fixture;
using testing::Rng;

TEST(Multiplier, RangeAndInverse) {
  EXPECT_DOUBLE_EQ(multiplier_decode(0.0, 3.0), 3.0);
  EXPECT_NEAR(multiplier_decode(1e3, 3.0), 30.0, 1e-12);
  EXPECT_NEAR(multiplier_decode(-1e3, 3.0), 0.3, 1e-15);
  EXPECT_NEAR(multiplier_decode(multiplier_encode(7.5, 3.0), 3.0), 7.5, 1e-14);
  EXPECT_NEAR(multiplier_decode(multiplier_encode(-0.5, -2.0), -2.0), -0.5, 1e-15);
  EXPECT_EQ(multiplier_encode(3.0, 3.0), 0.0);
  EXPECT_THROW(multiplier_encode(31.0, 3.0), LogicError);
  EXPECT_THROW(multiplier_encode(0.3, 3.0), LogicError);
  EXPECT_THROW(multiplier_encode(-1.0, 3.0), LogicError);  // sign flip
}

TEST(Squaring, Examples) {
  EXPECT_EQ(positive_from_square(0.0, 1e-6), 1e-6);
  EXPECT_DOUBLE_EQ(positive_from_square(square_from_positive(2.5, 1e-6), 1e-6), 2.5);
  EXPECT_THROW(square_from_positive(1e-7, 1e-6), LogicError);
}

TEST(Cholesky, StatedExamples) {
  const double c = 1e-7;
  const auto zero = inertia_from_cholesky<double>({0, 0, 0, 0, 0, 0}, c);
  for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(zero[k], 2.0 * c);
  for (int k = 3; k < 6; ++k) EXPECT_EQ(zero[k], 0.0);
  const auto unit = inertia_from_cholesky<double>({1, 1, 1, 0, 0, 0}, 0.0);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(unit[k], 2.0);
  for (int k = 3; k < 6; ++k) EXPECT_EQ(unit[k], 0.0);
}

TEST(Cholesky, RoundTripAndRejection) {
  Rng rng(201);
  for (int k = 0; k < 1000; ++k) {
    const auto b = rng.bone();
    const auto L = cholesky_from_inertia(b.inertia, 1e-7);
    EXPECT_GT(L[0], 0.0);
    EXPECT_GT(L[1], 0.0);
    EXPECT_GT(L[2], 0.0);
    const auto back = inertia_from_cholesky(L, 1e-7);
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(back[i], b.inertia[i], 1e-15);
  }
  // A flat disc has Sigma with a zero eigenvalue.
  EXPECT_THROW(cholesky_from_inertia({1.0, 1.0, 2.0, 0, 0, 0}, 1e-7), LogicError);
}

bool physical(const FullParamsd& p) {
  try {
    validate_params(p);
    return true;
  } catch (const LogicError&) {
    return false;
  }
}

// Smallest margin lambda_i + lambda_j - lambda_k over the principal moments.
double triangle_margin(const std::array<double, 6>& I) {
  Eigen::Matrix3d m;
  m << I[0], I[3], I[4], I[3], I[1], I[5], I[4], I[5], I[2];
  const Eigen::Vector3d l = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(m).eigenvalues();
  return l(0) + l(1) - l(2);
}

TEST(Decode, RandomVectorsAlwaysDecodeToPhysicalParameters) {
  const ReparamConfig cfg = make_reparam(fixture().ground_truth);
  const std::vector<double> base = flatten(cfg.baseline);
  Rng rng(202);
  int failures = 0, bound_violations = 0;
  double worst_margin = 1.0;
  std::vector<double> x(54);
  for (int k = 0; k < 100000; ++k) {
    const double spread = rng.uniform(0.1, 20.0);
    for (double& v : x) v = spread * rng.normal();
    const FullParamsd p = decode<double>(x, cfg);
    if (!physical(p)) ++failures;
    const std::vector<double> flat = flatten(p);
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const std::size_t in_bone = i < 24 ? 0 : (i - 24) % 10;
      if (i >= 24 && in_bone >= 4) continue;  // inertia entries are not multipliers
      const double ratio = flat[i] / base[i];
      // Saturated sigmoids round to the bound itself.
      if (!(ratio >= kMinMultiplier * (1 - 1e-14) && ratio <= kMaxMultiplier * (1 + 1e-14))) {
        ++bound_violations;
      }
    }
    for (const auto& b : p.bones) worst_margin = std::min(worst_margin, triangle_margin(b.inertia));
  }
  EXPECT_EQ(failures, 0);
  EXPECT_EQ(bound_violations, 0);
  EXPECT_GT(worst_margin, 0.0);
}

TEST(Decode, EncodeThenDecodeIsIdentity) {
  const ReparamConfig cfg = make_reparam(fixture().ground_truth);
  EXPECT_EQ(encode(cfg.baseline, cfg), std::vector<double>(54, 0.0));
  Rng rng(203);
  double worst = 0.0;
  for (int k = 0; k < 100000; ++k) {
    // Physical parameters within the decodable range of the baseline.
    FullParamsd p = cfg.baseline;
    for (auto& m : p.muscles) {
      m.l_opt *= std::pow(10.0, rng.uniform(-0.95, 0.95));
      m.f_max *= std::pow(10.0, rng.uniform(-0.95, 0.95));
      m.v_max *= std::pow(10.0, rng.uniform(-0.95, 0.95));
    }
    for (auto& b : p.bones) {
      const auto fresh = rng.bone();
      b.mass *= std::pow(10.0, rng.uniform(-0.95, 0.95));
      for (int i = 0; i < 3; ++i) b.com[i] *= std::pow(10.0, rng.uniform(-0.95, 0.95));
      b.inertia = fresh.inertia;
    }
    const auto x = encode(p, cfg);
    const auto back = flatten(decode<double>(x, cfg));
    const auto ref = flatten(p);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      worst = std::max(worst, std::abs(back[i] - ref[i]) / std::abs(ref[i]));
    }
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Decode, DecodeThenEncodeIsIdentity) {
  const ReparamConfig cfg = make_reparam(fixture().ground_truth);
  Rng rng(204);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    auto x = rng.vec(54, -4.0, 4.0);
    // Cholesky offsets on the scale of the baseline factor, diagonal kept
    // positive so the factor is the canonical one. Far larger offsets give
    // inertias whose condition number exceeds 1/eps.
    for (int b = 0; b < 3; ++b) {
      for (int d = 0; d < 6; ++d) {
        const std::size_t i = bone_offset(8, b) + 4 + d;
        x[i] = (d < 3 ? rng.uniform(-0.5, 2.0) * cfg.baseline_cholesky[b][d]
                      : rng.uniform(-0.05, 0.05)) /
               cfg.cholesky_scale[b];
      }
    }
    const auto back = encode(decode<double>(x, cfg), cfg);
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(back[i] - x[i]));
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Decode, ErrorsNameTheParameter) {
  const ReparamConfig cfg = make_reparam(fixture().ground_truth);
  FullParamsd p = cfg.baseline;
  p.muscles[3].f_max *= 20.0;
  try {
    encode(p, cfg);
    FAIL() << "expected LogicError";
  } catch (const LogicError& e) {
    EXPECT_NE(std::string(e.what()).find("muscle 3 f_max"), std::string::npos) << e.what();
  }
  p = cfg.baseline;
  p.bones[1].inertia = {1.0, 1.0, 2.0, 0, 0, 0};
  try {
    encode(p, cfg);
    FAIL() << "expected LogicError";
  } catch (const LogicError& e) {
    EXPECT_NE(std::string(e.what()).find("bone 1 inertia"), std::string::npos) << e.what();
  }
  EXPECT_THROW(decode<double>(std::vector<double>(53, 0.0), cfg), LogicError);
}

TEST(Decode, AutodiffMatchesFiniteDifferences) {
  const ReparamConfig cfg = make_reparam(fixture().ground_truth);
  Rng rng(205);
  const auto x0 = rng.vec(54, -1.0, 1.0);
  // Scalar functional: weighted sum of every decoded entry.
  const auto w = rng.vec(54, -1.0, 1.0);
  auto f = [&](std::span<const ad::DiffScalar> x) {
    const auto p = decode<ad::DiffScalar>(x, cfg);
    ad::DiffScalar s(0.0);
    std::size_t i = 0;
    for (const auto& m : p.muscles) {
      s += w[i] * m.l_opt + w[i + 1] * m.f_max + w[i + 2] * m.v_max;
      i += 3;
    }
    for (const auto& b : p.bones) {
      s += w[i++] * b.mass;
      for (int k = 0; k < 3; ++k) s += w[i++] * b.com[k];
      for (int k = 0; k < 6; ++k) s += w[i++] * b.inertia[k];
    }
    return s;
  };
  EXPECT_LT(ad::check_gradient(f, x0, 1e-6), 1e-6);
}

}  // namespace
}  // namespace msm
