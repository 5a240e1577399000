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

#include <cmath>
#include <string>

namespace msm {

double multiplier_encode(double value, double base) {
  const double ratio = value / base;
  if (!(ratio > kMinMultiplier && ratio < kMaxMultiplier)) {
    throw LogicError("multiplier_encode: ratio " + std::to_string(ratio) +
                     " outside (0.1, 10)");
  }
  // logit((log10(ratio) + 1) / 2)
  const double s = 0.5 * (std::log10(ratio) + 1.0);
  return std::log(s / (1.0 - s));
}

double square_from_positive(double value, double bias) {
  if (!(value > bias)) throw LogicError("square_from_positive: value must exceed the bias");
  return std::sqrt(value - bias);
}

std::array<double, 6> cholesky_from_inertia(const std::array<double, 6>& inertia,
                                            double bias) {
  const double half_trace = 0.5 * (inertia[0] + inertia[1] + inertia[2]);
  // Sigma - c * 1, lower triangle
  const double a00 = half_trace - inertia[0] - bias;
  const double a11 = half_trace - inertia[1] - bias;
  const double a22 = half_trace - inertia[2] - bias;
  const double a10 = -inertia[3];
  const double a20 = -inertia[4];
  const double a21 = -inertia[5];
  if (!(a00 > 0.0)) throw LogicError("cholesky_from_inertia: not positive definite");
  const double l00 = std::sqrt(a00);
  const double l10 = a10 / l00;
  const double l20 = a20 / l00;
  const double d11 = a11 - l10 * l10;
  if (!(d11 > 0.0)) throw LogicError("cholesky_from_inertia: not positive definite");
  const double l11 = std::sqrt(d11);
  const double l21 = (a21 - l20 * l10) / l11;
  const double d22 = a22 - l20 * l20 - l21 * l21;
  if (!(d22 > 0.0)) throw LogicError("cholesky_from_inertia: not positive definite");
  return {l00, l11, std::sqrt(d22), l10, l20, l21};
}

ReparamConfig make_reparam(const FullParamsd& baseline, double cholesky_bias,
                           double positivity_bias) {
  if (!(cholesky_bias > 0.0) || !(positivity_bias > 0.0)) {
    throw LogicError("make_reparam: biases must be positive");
  }
  validate_params(baseline);
  ReparamConfig cfg;
  cfg.cholesky_bias = cholesky_bias;
  cfg.positivity_bias = positivity_bias;
  cfg.baseline = baseline;
  for (std::size_t b = 0; b < baseline.bones.size(); ++b) {
    try {
      cfg.baseline_cholesky.push_back(cholesky_from_inertia(baseline.bones[b].inertia,
                                                            cholesky_bias));
    } catch (const LogicError&) {
      throw LogicError("make_reparam: bone " + std::to_string(b) +
                       " inertia is not decodable with the Cholesky bias");
    }
    const auto& L0 = cfg.baseline_cholesky.back();
    cfg.cholesky_scale.push_back((L0[0] + L0[1] + L0[2]) / 3.0);
    const auto back = inertia_from_cholesky(L0, cholesky_bias);
    std::array<double, 6> r;
    for (int k = 0; k < 6; ++k) r[k] = baseline.bones[b].inertia[k] - back[k];
    cfg.baseline_residual.push_back(r);
  }
  return cfg;
}

std::vector<double> encode(const FullParamsd& p, const ReparamConfig& cfg) {
  const FullParamsd& p0 = cfg.baseline;
  if (p.muscles.size() != p0.muscles.size() || p.bones.size() != p0.bones.size()) {
    throw LogicError("encode: parameter shape differs from the baseline");
  }
  std::vector<double> x;
  x.reserve(p.size());
  auto scalar = [&](double v, double base, const std::string& what) {
    try {
      x.push_back(multiplier_encode(v, base));
    } catch (const LogicError& e) {
      throw LogicError("encode: " + what + ": " + e.what());
    }
  };
  for (std::size_t m = 0; m < p.muscles.size(); ++m) {
    const std::string tag = "muscle " + std::to_string(m);
    scalar(p.muscles[m].l_opt, p0.muscles[m].l_opt, tag + " l_opt");
    scalar(p.muscles[m].f_max, p0.muscles[m].f_max, tag + " f_max");
    scalar(p.muscles[m].v_max, p0.muscles[m].v_max, tag + " v_max");
  }
  for (std::size_t b = 0; b < p.bones.size(); ++b) {
    const std::string tag = "bone " + std::to_string(b);
    scalar(p.bones[b].mass, p0.bones[b].mass, tag + " mass");
    for (int k = 0; k < 3; ++k) scalar(p.bones[b].com[k], p0.bones[b].com[k], tag + " com");
    std::array<double, 6> L;
    try {
      L = cholesky_from_inertia(p.bones[b].inertia, cfg.cholesky_bias);
    } catch (const LogicError&) {
      throw LogicError("encode: " + tag + " inertia: Sigma - c*1 is not positive definite");
    }
    for (int k = 0; k < 6; ++k) x.push_back((L[k] - cfg.baseline_cholesky[b][k]) / cfg.cholesky_scale[b]);
  }
  return x;
}

}  // namespace msm
