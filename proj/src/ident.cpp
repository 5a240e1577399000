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

#include "msm/ident.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "msm/dynamics.hpp"

namespace msm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Visits every scalar of `p` in flattened order.
template <class P, class F>
void for_each_entry(P& p, F&& f) {
  std::size_t i = 0;
  for (auto& m : p.muscles) {
    f(m.l_opt, i++);
    f(m.f_max, i++);
    f(m.v_max, i++);
  }
  for (auto& b : p.bones) {
    f(b.mass, i++);
    for (int k = 0; k < 3; ++k) f(b.com[k], i++);
    for (auto& v : b.inertia) f(v, i++);
  }
}

double record_error(const ArmModel& model, const TrajectoryRecord& r, const FullParamsd& p) {
  const auto qdd =
      predict_qddot<double>(model, r.q, r.qd, r.a, p, r.length, r.velocity, r.moment_arm);
  double s = 0.0;
  for (std::size_t j = 0; j < qdd.size(); ++j) {
    const double e = qdd[j] - r.qdd[j];
    s += e * e;
  }
  return s;
}

void check_problem(const LossProblem& p, Batch batch, std::size_t x_size) {
  if (p.model == nullptr) throw LogicError("loss: problem has no model");
  if (batch.empty()) throw LogicError("loss: empty batch");
  if (x_size != p.reparam.baseline.size() || p.active.size() != x_size) {
    throw LogicError("loss: learnable vector has wrong length");
  }
}

// Decoded entries that depend on an active learnable entry. The six inertia
// entries of a bone all depend on each of its six Cholesky offsets.
std::vector<char> decoded_active(const LossProblem& p) {
  std::vector<char> out = p.active;
  const int nm = static_cast<int>(p.reparam.baseline.muscles.size());
  for (std::size_t b = 0; b < p.reparam.baseline.bones.size(); ++b) {
    const std::size_t off = bone_offset(nm, static_cast<int>(b)) + 4;
    const bool any = std::any_of(out.begin() + off, out.begin() + off + 6, [](char c) { return c; });
    std::fill(out.begin() + off, out.begin() + off + 6, any ? 1 : 0);
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

}  // namespace

LossProblem make_problem(const ArmModel& model, const FullParamsd& baseline, double variance,
                         std::vector<char> active) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw LogicError("make_problem: variance must be positive");
  }
  LossProblem p;
  p.model = &model;
  p.reparam = make_reparam(baseline);
  p.variance = variance;
  p.active = active.empty() ? std::vector<char>(baseline.size(), 1) : std::move(active);
  if (p.active.size() != baseline.size()) {
    throw LogicError("make_problem: active mask has wrong length");
  }
  return p;
}

double nmse(const ArmModel& model, const FullParamsd& params, Batch batch, double variance) {
  if (batch.empty()) throw LogicError("nmse: empty batch");
  if (!(variance > 0.0)) throw LogicError("nmse: variance must be positive");
  double s = 0.0;
  for (const TrajectoryRecord* r : batch) s += record_error(model, *r, params);
  return s / (static_cast<double>(batch.size()) * variance);
}

double nmse(const ArmModel& model, const FullParamsd& params, const TrajectoryDataset& data,
            double variance) {
  std::vector<const TrajectoryRecord*> all;
  all.reserve(data.size());
  for (const auto& r : data.records) all.push_back(&r);
  return nmse(model, params, all, variance);
}

ad::DiffScalar loss_fd(Batch batch, std::span<const ad::DiffScalar> x, const LossProblem& p) {
  check_problem(p, batch, x.size());
  const FullParams<ad::DiffScalar> params = decode<ad::DiffScalar>(x, p.reparam);
  ad::DiffScalar total(0.0);
  for (const TrajectoryRecord* r : batch) {
    const auto qdd = predict_qddot<ad::DiffScalar>(*p.model, r->q, r->qd, r->a, params, r->length,
                                                   r->velocity, r->moment_arm);
    for (std::size_t j = 0; j < qdd.size(); ++j) {
      const ad::DiffScalar e = qdd[j] - r->qdd[j];
      total += e * e;
    }
  }
  return total / (static_cast<double>(batch.size()) * p.variance);
}

double loss_value(Batch batch, std::span<const double> x, const LossProblem& p) {
  check_problem(p, batch, x.size());
  return nmse(*p.model, decode<double>(x, p.reparam), batch, p.variance);
}

double loss_and_gradient(Batch batch, std::span<const double> x, const LossProblem& p,
                         std::span<double> grad) {
  check_problem(p, batch, x.size());
  if (grad.size() != x.size()) throw LogicError("loss_and_gradient: gradient has wrong length");
  const std::size_t n = x.size();
  thread_local ad::Tape tape;
  ad::TapeScope scope(tape);

  const FullParamsd decoded = decode<double>(x, p.reparam);
  const std::vector<char> active = decoded_active(p);
  std::vector<double> d_params(n, 0.0);
  std::vector<ad::DiffScalar> handle(n);
  std::vector<double> seeds;
  double sq = 0.0;
  for (const TrajectoryRecord* r : batch) {
    tape.reset();
    FullParams<ad::DiffScalar> params = cast_params<ad::DiffScalar>(decoded);
    for_each_entry(params, [&](ad::DiffScalar& v, std::size_t i) {
      if (active[i]) v = handle[i] = ad::leaf(v.value());
    });
    const auto qdd = predict_qddot<ad::DiffScalar>(*p.model, r->q, r->qd, r->a, params, r->length,
                                                   r->velocity, r->moment_arm);
    seeds.resize(qdd.size());
    for (std::size_t j = 0; j < qdd.size(); ++j) {
      const double e = qdd[j].value() - r->qdd[j];
      sq += e * e;
      seeds[j] = 2.0 * e;
    }
    const ad::Gradient g = ad::backward(qdd, seeds);
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i]) d_params[i] += g[handle[i]];
    }
  }
  const double scale = 1.0 / (static_cast<double>(batch.size()) * p.variance);

  // Chain rule through the decoding.
  tape.reset();
  std::vector<ad::DiffScalar> xs(x.begin(), x.end());
  for (std::size_t i = 0; i < n; ++i) {
    if (p.active[i]) xs[i] = ad::leaf(x[i]);
  }
  FullParams<ad::DiffScalar> dec = decode<ad::DiffScalar>(xs, p.reparam);
  std::vector<ad::DiffScalar> outputs;
  outputs.reserve(n);
  seeds.assign(n, 0.0);
  for_each_entry(dec, [&](ad::DiffScalar& v, std::size_t i) {
    outputs.push_back(v);
    seeds[i] = d_params[i] * scale;
  });
  const ad::Gradient gx = ad::backward(outputs, seeds);
  for (std::size_t i = 0; i < n; ++i) grad[i] = p.active[i] ? gx[xs[i]] : 0.0;
  return sq * scale;
}

// ---------------------------------------------------------------------------

AdamState make_adam(std::size_t n, double lr) {
  if (!(lr > 0.0)) throw LogicError("make_adam: learning rate must be positive");
  AdamState s;
  s.lr = lr;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  return s;
}

void adam_step(AdamState& s, std::span<double> x, std::span<const double> g) {
  if (x.size() != g.size() || s.m.size() != x.size() || s.v.size() != x.size()) {
    throw LogicError("adam_step: size mismatch");
  }
  for (double v : g) {
    if (!std::isfinite(v)) throw NumericError("adam_step: non-finite gradient");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < x.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g[i] * g[i];
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    x[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

// ---------------------------------------------------------------------------

Annealer::Annealer(std::vector<double> lower, std::vector<double> upper, AnnealParams params,
                   std::uint64_t seed)
    : lower_(std::move(lower)), upper_(std::move(upper)), params_(params), rng_(seed) {
  if (lower_.empty() || lower_.size() != upper_.size()) {
    throw LogicError("Annealer: bounds must be non-empty and of equal length");
  }
  for (std::size_t i = 0; i < lower_.size(); ++i) {
    if (!(lower_[i] < upper_[i])) throw LogicError("Annealer: lower bound not below upper bound");
  }
  if (!(params_.visit > 1.0 && params_.visit < 3.0)) {
    throw LogicError("Annealer: visit parameter must lie in (1, 3)");
  }
  if (!(params_.initial_temperature > 0.0)) {
    throw LogicError("Annealer: initial temperature must be positive");
  }
  if (!(params_.accept < 1.0)) throw LogicError("Annealer: acceptance parameter must be < 1");
  update_temperature();
}

double Annealer::visit_scale(double temperature, double qv) {
  using std::numbers::pi;
  const double f1 = std::exp(std::log(temperature) / (qv - 1.0));
  const double f2 = std::exp((4.0 - qv) * std::log(qv - 1.0));
  const double f3 = std::exp((2.0 - qv) * std::log(2.0) / (qv - 1.0));
  const double f4 = std::sqrt(pi) * f1 * f2 / (f3 * (3.0 - qv));
  const double f5 = 1.0 / (qv - 1.0) - 0.5;
  const double d1 = 2.0 - f5;
  const double f6 = pi * (1.0 - f5) / std::sin(pi * (1.0 - f5)) / std::exp(std::lgamma(d1));
  return std::exp(-(qv - 1.0) * std::log(f6 / f4) / (3.0 - qv));
}

void Annealer::update_temperature() {
  const double qv = params_.visit;
  const double t1 = std::exp((qv - 1.0) * std::log(2.0)) - 1.0;
  const double t2 = std::exp((qv - 1.0) * std::log(static_cast<double>(outer_) + 2.0)) - 1.0;
  temperature_ = params_.initial_temperature * t1 / t2;
  visit_sigma_ = visit_scale(temperature_, qv);
}

double Annealer::visit_draw() {
  constexpr double kTailLimit = 1e8;
  const double qv = params_.visit;
  const double x = visit_sigma_ * normal_(rng_);
  const double y = normal_(rng_);
  const double den = std::exp((qv - 1.0) * std::log(std::abs(y)) / (3.0 - qv));
  double v = x / den;
  if (v > kTailLimit) v = kTailLimit * unit_(rng_);
  if (v < -kTailLimit) v = -kTailLimit * unit_(rng_);
  return v;
}

std::vector<double> Annealer::propose(std::span<const double> x) {
  constexpr double kMinVisitBound = 1e-10;
  if (x.size() != dim()) throw LogicError("Annealer::propose: point has wrong length");
  std::vector<double> out(x.begin(), x.end());
  auto wrap = [&](std::size_t i) {
    const double range = upper_[i] - lower_[i];
    const double a = out[i] - lower_[i];
    const double b = std::fmod(a, range) + range;
    out[i] = std::fmod(b, range) + lower_[i];
    if (std::abs(out[i] - lower_[i]) < kMinVisitBound) out[i] += kMinVisitBound;
  };
  const std::size_t d = dim();
  if (static_cast<std::size_t>(chain_) < d) {
    for (std::size_t i = 0; i < d; ++i) {
      out[i] += visit_draw();
      wrap(i);
    }
  } else {
    const std::size_t i = static_cast<std::size_t>(chain_) - d;
    out[i] += visit_draw();
    wrap(i);
  }
  return out;
}

bool Annealer::accept(double e_new, double e_cur) {
  if (e_new < e_cur) return true;
  const double r = unit_(rng_);
  const double qa = params_.accept;
  const double step_temperature = temperature_ / (static_cast<double>(outer_) + 1.0);
  const double base = 1.0 - (1.0 - qa) * (e_new - e_cur) / step_temperature;
  const double p = base <= 0.0 ? 0.0 : std::exp(std::log(base) / (1.0 - qa));
  return r <= p;
}

bool Annealer::advance() {
  if (static_cast<std::size_t>(++chain_) < 2 * dim()) return false;
  chain_ = 0;
  ++outer_;
  update_temperature();
  if (temperature_ / params_.initial_temperature < params_.restart_ratio) {
    outer_ = 0;
    update_temperature();
    return true;
  }
  return false;
}

std::vector<double> Annealer::random_point() {
  std::vector<double> x(dim());
  for (std::size_t i = 0; i < dim(); ++i) x[i] = lower_[i] + (upper_[i] - lower_[i]) * unit_(rng_);
  return x;
}

AnnealResult simulated_annealing(const AnnealHooks& hooks, std::vector<double> x0,
                                 std::vector<double> lower, std::vector<double> upper,
                                 const AnnealParams& params, std::uint64_t seed, long budget) {
  if (budget <= 0) throw LogicError("simulated_annealing: budget must be positive");
  if (!hooks.energy) throw LogicError("simulated_annealing: no energy function");
  if (hooks.slots < 1) throw LogicError("simulated_annealing: need at least one slot");
  if (x0.size() != lower.size()) throw LogicError("simulated_annealing: x0 has wrong length");

  Annealer ann(std::move(lower), std::move(upper), params, seed);
  const int slots = hooks.slots;
  AnnealResult res;
  std::vector<double> cur = x0, best = std::move(x0);
  std::vector<double> e_cur(slots, kNaN), e_best(slots, kNaN);
  auto evaluate = [&](const std::vector<double>& x, int slot) {
    ++res.energy_evaluations;
    return hooks.energy(x, slot);
  };
  auto known = [&](std::vector<double>& cache, const std::vector<double>& x, int slot) {
    if (std::isnan(cache[slot])) cache[slot] = evaluate(x, slot);
    return cache[slot];
  };

  const long dim = static_cast<long>(cur.size());
  long not_improved = 0;
  long it = 0;
  while (it < budget) {
    const int slot = static_cast<int>(it % slots);
    bool new_best = false;
    const double ec = known(e_cur, cur, slot);
    if (std::isnan(e_best[slot]) && cur == best) e_best[slot] = ec;
    std::vector<double> cand = ann.propose(cur);
    const double e = evaluate(cand, slot);
    if (ann.accept(e, ec)) {
      cur = std::move(cand);
      e_cur.assign(slots, kNaN);
      e_cur[slot] = e;
      if (e < known(e_best, best, slot)) {
        best = cur;
        e_best = e_cur;
        new_best = true;
      }
    }
    not_improved = new_best ? 0 : not_improved + 1;
    if (ann.advance()) {
      cur = ann.random_point();
      e_cur.assign(slots, kNaN);
      ++res.restarts;
    }
    if (hooks.on_iteration) hooks.on_iteration(it, best, known(e_best, best, slot));
    ++it;

    if (hooks.local_search && it < budget && (new_best || not_improved >= dim)) {
      std::vector<double> x = best;
      const long used = hooks.local_search(x, it, budget - it);
      ++res.local_searches;
      it += used;
      const int last = static_cast<int>((it - 1) % slots);
      const double el = evaluate(x, last);
      if (el < known(e_best, best, last)) {
        best = std::move(x);
        e_best.assign(slots, kNaN);
        e_best[last] = el;
        cur = best;
        e_cur = e_best;
      }
      not_improved = 0;
    }
  }
  res.x = std::move(best);
  return res;
}

// ---------------------------------------------------------------------------

std::string method_name(Method m) { return "M" + std::to_string(static_cast<int>(m)); }

Method parse_method(const std::string& s) {
  if (s.size() == 2 && (s[0] == 'M' || s[0] == 'm') && s[1] >= '1' && s[1] <= '5') {
    return static_cast<Method>(s[1] - '0');
  }
  throw FormatError("unknown method '" + s + "' (expected M1..M5)");
}

std::string subset_name(Subset s) {
  switch (s) {
    case Subset::kMuscleOnly:
      return "muscle-only";
    case Subset::kFull:
      return "full";
    case Subset::kFullMinusInertia:
      return "full-minus-inertia";
  }
  return "full";
}

Subset parse_subset(const std::string& s) {
  if (s == "muscle-only") return Subset::kMuscleOnly;
  if (s == "full") return Subset::kFull;
  if (s == "full-minus-inertia") return Subset::kFullMinusInertia;
  throw FormatError("unknown parameter subset '" + s + "'");
}

bool uses_gradients(Method m) { return m == Method::kM3 || m == Method::kM4 || m == Method::kM5; }
bool uses_annealing(Method m) { return m == Method::kM1 || m == Method::kM2 || m == Method::kM5; }

MethodConfig default_config(Method m, long iterations) {
  MethodConfig c;
  c.method = m;
  c.iterations = iterations;
  c.subset = (m == Method::kM1 || m == Method::kM3) ? Subset::kMuscleOnly : Subset::kFull;
  return c;
}

std::vector<char> active_mask(const ArmModel& model, Subset s) {
  const int nm = model.muscle_count();
  const int nb = static_cast<int>(model.bodies().size());
  std::vector<char> mask(kMuscleParamCount * nm + kBoneParamCount * nb, 1);
  for (int b = 0; b < nb; ++b) {
    const std::size_t off = bone_offset(nm, b);
    if (s == Subset::kMuscleOnly) {
      std::fill(mask.begin() + off, mask.begin() + off + kBoneParamCount, 0);
    } else if (s == Subset::kFullMinusInertia) {
      std::fill(mask.begin() + off + 4, mask.begin() + off + kBoneParamCount, 0);
    }
  }
  return mask;
}

Criteria parameter_criteria(const FullParamsd& estimate, const FullParamsd& truth) {
  if (estimate.muscles.size() != truth.muscles.size() ||
      estimate.bones.size() != truth.bones.size()) {
    throw LogicError("parameter_criteria: parameter shapes differ");
  }
  const std::vector<double> e = flatten(estimate);
  const std::vector<double> t = flatten(truth);
  const std::size_t nm = kMuscleParamCount * truth.muscles.size();
  double diff2 = 0.0, norm2 = 0.0, rel = 0.0, rel_m = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] == 0.0) throw LogicError("parameter_criteria: zero ground-truth entry");
    const double d = e[i] - t[i];
    diff2 += d * d;
    norm2 += t[i] * t[i];
    const double r = std::abs(d) / std::abs(t[i]);
    rel += r;
    if (i < nm) rel_m += r;
  }
  Criteria c;
  c.c2 = 100.0 * std::sqrt(diff2 / norm2);
  c.c3 = 100.0 * rel / static_cast<double>(t.size());
  c.c3m = nm == 0 ? 0.0 : 100.0 * rel_m / static_cast<double>(nm);
  return c;
}

std::vector<double> running_min(std::span<const double> v) {
  std::vector<double> out(v.size());
  double m = kInf;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = m = std::min(m, v[i]);
  return out;
}

RunRecord run_method(const MethodConfig& cfg, const RunInputs& in, std::uint64_t seed) {
  if (in.model == nullptr || in.truth == nullptr || in.train == nullptr) {
    throw LogicError("run_method: missing model, ground truth or dataset");
  }
  if (in.train->size() == 0) throw LogicError("run_method: empty training set");
  if (cfg.iterations < 0 || cfg.batch_size == 0 || cfg.c2_every < 1) {
    throw LogicError("run_method: invalid iteration budget or batch size");
  }
  using Clock = std::chrono::steady_clock;
  const Clock::time_point start = Clock::now();

  RunRecord rec;
  rec.method = cfg.method;
  rec.subset = cfg.subset;
  rec.seed = seed;
  rec.iterations = cfg.iterations;
  rec.batch_size = cfg.batch_size;
  rec.learning_rate = cfg.learning_rate;
  rec.anneal = cfg.anneal;
  rec.bones_frozen = cfg.subset == Subset::kMuscleOnly;
  rec.initial = in.initial != nullptr ? *in.initial : sample_initial_guess(*in.truth, seed);

  const double variance = in.variance > 0.0 ? in.variance : qdd_variance(*in.train);
  const LossProblem prob =
      make_problem(*in.model, rec.initial, variance, active_mask(*in.model, cfg.subset));
  const auto batches = make_batches(*in.train, cfg.batch_size);
  const long nb = static_cast<long>(batches.size());
  const std::size_t n = rec.initial.size();
  std::vector<double> x(n, 0.0);
  std::vector<double> grad(n, 0.0);
  rec.c1.reserve(cfg.iterations);
  rec.iteration_seconds.reserve(cfg.iterations);

  Clock::time_point last = Clock::now();
  auto tick = [&] {
    const Clock::time_point now = Clock::now();
    rec.iteration_seconds.push_back(std::chrono::duration<double>(now - last).count());
    last = now;
  };
  auto log_c2 = [&](long it, std::span<const double> xe) {
    if (it % cfg.c2_every != 0) return;
    rec.c2_iteration.push_back(it);
    rec.c2.push_back(parameter_criteria(decode<double>(xe, prob.reparam), *in.truth).c2);
  };
  auto finite = [](double v) {
    if (!std::isfinite(v)) throw NumericError("non-finite loss");
    return v;
  };
  auto adam_iteration = [&](AdamState& st, std::vector<double>& xa, long it) {
    const double l = finite(loss_and_gradient(batches[it % nb], xa, prob, grad));
    ++rec.gradient_evaluations;
    ++rec.loss_evaluations;
    adam_step(st, xa, grad);
    rec.c1.push_back(l);
    log_c2(it, xa);
    tick();
    return l;
  };

  try {
    if (uses_annealing(cfg.method)) {
      // Annealing runs on the active entries.
      std::vector<std::size_t> index;
      std::vector<double> lower, upper;
      const int nmus = static_cast<int>(rec.initial.muscles.size());
      for (std::size_t i = 0; i < n; ++i) {
        if (!prob.active[i]) continue;
        double bound = cfg.multiplier_bound;
        if (i >= bone_offset(nmus, 0) && (i - bone_offset(nmus, 0)) % kBoneParamCount >= 4) {
          bound = cfg.cholesky_bound;
        }
        index.push_back(i);
        lower.push_back(-bound);
        upper.push_back(bound);
      }
      auto to_full = [&](std::span<const double> u) {
        std::vector<double> xf(n, 0.0);
        for (std::size_t k = 0; k < index.size(); ++k) xf[index[k]] = u[k];
        return xf;
      };

      AnnealHooks hooks;
      hooks.slots = static_cast<int>(nb);
      hooks.energy = [&](std::span<const double> u, int slot) {
        ++rec.loss_evaluations;
        return finite(loss_value(batches[slot], to_full(u), prob));
      };
      hooks.on_iteration = [&](long it, std::span<const double> best, double e) {
        rec.c1.push_back(e);
        log_c2(it, to_full(best));
        tick();
      };
      if (cfg.method == Method::kM5) {
        hooks.local_search = [&](std::vector<double>& u, long it, long remaining) {
          std::vector<double> xa = to_full(u);
          AdamState st = make_adam(n, cfg.learning_rate);
          std::vector<double> history;
          const long cap = std::min(cfg.local_max_iterations, remaining);
          long used = 0;
          while (used < cap) {
            const double l = adam_iteration(st, xa, it + used);
            ++used;
            const std::size_t w = static_cast<std::size_t>(cfg.local_window);
            if (history.size() >= w) {
              const double avg =
                  std::accumulate(history.end() - w, history.end(), 0.0) / static_cast<double>(w);
              if (l > avg) break;
            }
            history.push_back(l);
          }
          for (std::size_t k = 0; k < index.size(); ++k) u[k] = xa[index[k]];
          return used;
        };
      }
      if (cfg.iterations > 0) {
        const std::uint64_t sa_seed = seed * 0x9E3779B97F4A7C15ULL + 0x5851F42D4C957F2DULL;
        const AnnealResult ar = simulated_annealing(hooks, std::vector<double>(index.size(), 0.0),
                                                    lower, upper, cfg.anneal, sa_seed,
                                                    cfg.iterations);
        x = to_full(ar.x);
        rec.local_searches = ar.local_searches;
      }
    } else {
      AdamState st = make_adam(n, cfg.learning_rate);
      for (long it = 0; it < cfg.iterations; ++it) adam_iteration(st, x, it);
    }
    rec.final_params = decode<double>(x, prob.reparam);
    rec.final_c1 = finite(nmse(*in.model, rec.final_params, *in.train, variance));
    rec.final_criteria = parameter_criteria(rec.final_params, *in.truth);
  } catch (const NumericError& e) {
    rec.failed = true;
    rec.failure = e.what();
    rec.final_params = decode<double>(x, prob.reparam);
    rec.final_c1 = kInf;
    rec.final_criteria = {kInf, kInf, kInf};
  }
  rec.total_seconds = seconds_since(start);
  return rec;
}

}  // namespace msm
