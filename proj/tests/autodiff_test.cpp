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

#include "msm/autodiff.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

namespace msm::ad {
namespace {

using Fn = std::function<DiffScalar(std::span<const DiffScalar>)>;

TEST(Leaf, IdentityAndIndependence) {
  Tape tape;
  TapeScope scope(tape);
  const DiffScalar x = leaf(3.0);
  const DiffScalar y = leaf(-2.0);
  EXPECT_EQ(x.value(), 3.0);
  const Gradient g = backward(x);
  EXPECT_EQ(g[x], 1.0);
  EXPECT_EQ(g[y], 0.0);
}

TEST(Leaf, RejectsNonFinite) {
  Tape tape;
  TapeScope scope(tape);
  EXPECT_THROW(leaf(std::numeric_limits<double>::quiet_NaN()), NumericError);
  EXPECT_THROW(leaf(std::numeric_limits<double>::infinity()), NumericError);
}

TEST(Leaf, NeedsActiveTape) { EXPECT_THROW(leaf(1.0), LogicError); }

TEST(Elementary, StatedExamples) {
  Tape tape;
  TapeScope scope(tape);
  const DiffScalar z = leaf(0.0);
  EXPECT_DOUBLE_EQ(backward(sigmoid(z))[z], 0.25);

  const DiffScalar x = leaf(3.0);
  EXPECT_DOUBLE_EQ(backward(x * x)[x], 6.0);

  const DiffScalar five = leaf(5.0);
  const DiffScalar m = max(five, DiffScalar(5.0));
  EXPECT_EQ(backward(m)[five], 1.0);
  // Tie with the active operand second: the first (constant) argument wins.
  const DiffScalar m2 = max(DiffScalar(5.0), five);
  EXPECT_TRUE(m2.is_constant());
}

TEST(Elementary, NonSmoothConventions) {
  Tape tape;
  TapeScope scope(tape);
  const DiffScalar zero = leaf(0.0);
  EXPECT_EQ(backward(abs(zero))[zero], 1.0);
  const DiffScalar lo = leaf(1.0);
  EXPECT_EQ(backward(clamp(lo, 1.0, 2.0))[lo], 1.0);
  const DiffScalar hi = leaf(2.0);
  EXPECT_EQ(backward(clamp(hi, 1.0, 2.0))[hi], 1.0);
  const DiffScalar out = leaf(3.0);
  EXPECT_TRUE(clamp(out, 1.0, 2.0).is_constant());
  const DiffScalar a = leaf(4.0);
  const DiffScalar b = leaf(4.0);
  const Gradient g = backward(min(a, b));
  EXPECT_EQ(g[a], 1.0);
  EXPECT_EQ(g[b], 0.0);
}

TEST(Elementary, DomainErrors) {
  Tape tape;
  TapeScope scope(tape);
  const DiffScalar neg = leaf(-1.0);
  const DiffScalar zero = leaf(0.0);
  EXPECT_THROW(log(neg), NumericError);
  EXPECT_THROW(log(zero), NumericError);
  EXPECT_THROW(sqrt(neg), NumericError);
  EXPECT_THROW(leaf(1.0) / zero, NumericError);
  EXPECT_THROW(exp(leaf(1000.0)), NumericError);
}

TEST(Backward, SumAndSin) {
  Tape tape;
  TapeScope scope(tape);
  const DiffScalar x = leaf(1.0);
  const DiffScalar y = leaf(2.0);
  const Gradient g = backward(x + y);
  EXPECT_EQ(g[x], 1.0);
  EXPECT_EQ(g[y], 1.0);
  const DiffScalar t = leaf(0.0);
  EXPECT_EQ(backward(sin(t))[t], 1.0);
}

TEST(Backward, RepeatedCallsIdentical) {
  Tape tape;
  TapeScope scope(tape);
  const DiffScalar x = leaf(0.7);
  const DiffScalar y = leaf(-1.3);
  const DiffScalar f = exp(x * y) + sin(x) / (2.0 + cos(y));
  const Gradient g1 = backward(f);
  const Gradient g2 = backward(f);
  EXPECT_EQ(g1.adjoints(), g2.adjoints());
}

TEST(Backward, RejectsForeignLoss) {
  Tape a;
  DiffScalar stale;
  {
    TapeScope scope(a);
    stale = leaf(1.0) * 2.0;
  }
  Tape b;
  TapeScope scope(b);
  leaf(1.0);
  EXPECT_THROW(backward(stale), LogicError);
  EXPECT_THROW(backward(DiffScalar(3.0)), LogicError);
  a.reset();
}

TEST(Backward, StaleAfterReset) {
  Tape tape;
  TapeScope scope(tape);
  const DiffScalar x = leaf(2.0);
  const DiffScalar y = x * x;
  tape.reset();
  leaf(0.0);
  leaf(0.0);
  EXPECT_THROW(backward(y), LogicError);
}

TEST(Backward, SeededVectorJacobian) {
  Tape tape;
  TapeScope scope(tape);
  const DiffScalar x = leaf(2.0);
  const std::vector<DiffScalar> out{x * x, 3.0 * x};
  const std::vector<double> seed{0.5, 2.0};
  const Gradient g = backward(out, seed);
  EXPECT_DOUBLE_EQ(g[x], 0.5 * 4.0 + 2.0 * 3.0);
}

TEST(FusedDot, MatchesExpandedProducts) {
  Tape tape;
  TapeScope scope(tape);
  std::vector<DiffScalar> a{leaf(1.0), leaf(-2.0), DiffScalar(0.5)};
  std::vector<DiffScalar> b{leaf(3.0), DiffScalar(4.0), leaf(2.0)};
  const DiffScalar d = dot(a, b);
  EXPECT_DOUBLE_EQ(d.value(), 3.0 - 8.0 + 1.0);
  const Gradient g = backward(d);
  EXPECT_EQ(g[a[0]], 3.0);
  EXPECT_EQ(g[a[1]], 4.0);
  EXPECT_EQ(g[b[0]], 1.0);
  EXPECT_EQ(g[b[2]], 0.5);
  // Same leaf twice accumulates both partials.
  const DiffScalar x = leaf(3.0);
  std::vector<DiffScalar> xx{x};
  EXPECT_EQ(backward(dot(xx, xx))[x], 6.0);
}

// Finite-difference oracle at 1000 random points per operation, kept 1e-3
// away from kinks and domain edges.
struct OpCase {
  const char* name;
  Fn f;
  double lo;
  double hi;
  int arity;
};

TEST(Elementary, MatchFiniteDifferences) {
  const std::vector<OpCase> cases = {
      {"add", [](auto x) { return x[0] + x[1]; }, -5, 5, 2},
      {"sub", [](auto x) { return x[0] - x[1]; }, -5, 5, 2},
      {"mul", [](auto x) { return x[0] * x[1]; }, -5, 5, 2},
      {"div", [](auto x) { return x[0] / x[1]; }, 0.5, 5, 2},
      {"neg", [](auto x) { return -x[0]; }, -5, 5, 1},
      {"sin", [](auto x) { return sin(x[0]); }, -5, 5, 1},
      {"cos", [](auto x) { return cos(x[0]); }, -5, 5, 1},
      {"exp", [](auto x) { return exp(x[0]); }, -3, 3, 1},
      {"log", [](auto x) { return log(x[0]); }, 0.1, 10, 1},
      {"sqrt", [](auto x) { return sqrt(x[0]); }, 0.1, 10, 1},
      {"pow", [](auto x) { return pow(x[0], 2.5); }, 0.1, 4, 1},
      {"powv", [](auto x) { return pow(x[0], x[1]); }, 0.2, 3, 2},
      {"abs", [](auto x) { return abs(x[0]); }, -5, 5, 1},
      {"min", [](auto x) { return min(x[0], x[1]); }, -5, 5, 2},
      {"max", [](auto x) { return max(x[0], x[1]); }, -5, 5, 2},
      {"sigmoid", [](auto x) { return sigmoid(x[0]); }, -8, 8, 1},
      {"clamp", [](auto x) { return clamp(x[0], -1.0, 1.0); }, -3, 3, 1},
      {"dot", [](auto x) { return dot(x.subspan(0, 2), x.subspan(2, 2)); }, -3, 3, 4},
  };
  std::mt19937_64 rng(7);
  for (const OpCase& c : cases) {
    std::uniform_real_distribution<double> u(c.lo, c.hi);
    double worst = 0.0;
    int tested = 0;
    while (tested < 1000) {
      std::vector<double> x(c.arity);
      for (double& v : x) v = u(rng);
      const bool near_kink =
          (std::string(c.name) == "abs" && std::fabs(x[0]) < 1e-3) ||
          (std::string(c.name) == "clamp" &&
           (std::fabs(x[0] - 1.0) < 1e-3 || std::fabs(x[0] + 1.0) < 1e-3)) ||
          ((std::string(c.name) == "min" || std::string(c.name) == "max") &&
           std::fabs(x[0] - x[1]) < 1e-3);
      if (near_kink) continue;
      worst = std::max(worst, check_gradient(c.f, x, 1e-6));
      ++tested;
    }
    EXPECT_LT(worst, 1e-6) << c.name;
  }
}

// Random ten-operation composites of smooth ops.
TEST(Backward, RandomCompositeMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> pick(0, 6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> ops(10);
    for (int& o : ops) o = pick(rng);
    const Fn f = [ops](std::span<const DiffScalar> x) {
      DiffScalar acc = x[0];
      for (std::size_t k = 0; k < ops.size(); ++k) {
        const DiffScalar& y = x[k % x.size()];
        switch (ops[k]) {
          case 0: acc = acc + y; break;
          case 1: acc = acc * y; break;
          case 2: acc = sin(acc) - y; break;
          case 3: acc = acc / (2.0 + cos(y)); break;
          case 4: acc = exp(0.3 * acc) * y; break;
          case 5: acc = sigmoid(acc + y); break;
          default: acc = sqrt(1.0 + acc * acc) + y; break;
        }
      }
      return acc;
    };
    const std::vector<double> x{u(rng), u(rng), u(rng)};
    EXPECT_LT(check_gradient(f, x, 1e-6), 1e-6) << "trial " << trial;
  }
}

TEST(CheckGradient, QuadraticIsExactAndStepValidated) {
  const Fn quad = [](std::span<const DiffScalar> x) {
    return 3.0 * x[0] * x[0] + x[0] * x[1] - 2.0 * x[1] * x[1] + x[1];
  };
  const std::vector<double> x{0.4, -1.7};
  EXPECT_LT(check_gradient(quad, x, 1e-6), 1e-9);
  EXPECT_THROW(check_gradient(quad, x, 0.0), LogicError);
}

TEST(Determinism, BitIdenticalAcrossTapes) {
  auto run = [] {
    Tape tape;
    TapeScope scope(tape);
    std::vector<DiffScalar> x{leaf(0.3), leaf(-0.8), leaf(1.9)};
    DiffScalar acc = 0.0;
    for (int k = 0; k < 500; ++k) acc = acc + sin(x[k % 3] * acc + 0.01 * k);
    const Gradient g = backward(acc);
    return std::vector<double>{acc.value(), g[x[0]], g[x[1]], g[x[2]]};
  };
  EXPECT_EQ(run(), run());
}

// Reverse sweep cost is linear in tape length.
TEST(Backward, SweepCostLinear) {
  auto time_sweep = [](int length) {
    Tape tape;
    TapeScope scope(tape);
    tape.reserve(4 * length, 8 * length);
    const DiffScalar x = leaf(0.1);
    DiffScalar acc = x;
    for (int k = 0; k < length; ++k) acc = sin(acc) * 0.5 + x;
    std::vector<double> samples;
    for (int r = 0; r < 9; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const Gradient g = backward(acc);
      const auto t1 = std::chrono::steady_clock::now();
      EXPECT_TRUE(std::isfinite(g[x]));
      samples.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(samples.begin(), samples.end());
    return samples[samples.size() / 2];
  };
  const double t1 = time_sweep(200000);
  const double t2 = time_sweep(400000);
  EXPECT_LT(t2 / t1, 2.2) << "t1=" << t1 << " t2=" << t2;
}

}  // namespace
}  // namespace msm::ad
