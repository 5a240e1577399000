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
#include <atomic>
#include <string>

namespace msm::ad {
namespace {

std::atomic<std::uint32_t> g_next_serial{1};

std::uint32_t next_serial() { return g_next_serial.fetch_add(1); }

Tape& require_tape() {
  if (detail::active == nullptr) detail::throw_no_tape();
  return *detail::active;
}

inline double checked(double v, const char* op) {
  if (!std::isfinite(v)) detail::throw_non_finite(op);
  return v;
}

inline DiffScalar unary(double v, const DiffScalar& a, double da, const char* op) {
  checked(v, op);
  if (a.is_constant()) return DiffScalar(v);
  return detail::record_unary(v, a, da, op);
}

using detail::binary;

}  // namespace

namespace detail {

void throw_non_finite(const char* op) {
  throw NumericError(std::string("non-finite result in ") + op);
}

DiffScalar record_unary(double v, const DiffScalar& a, double da, const char* op) {
  return require_tape().record1(v, a, checked(da, op));
}

void throw_no_tape() { throw LogicError("no active tape on this thread"); }

}  // namespace detail

Tape::Tape() : serial_(next_serial()) { edge_begin_.push_back(0); }

void Tape::reset() {
  edge_begin_.clear();
  edge_begin_.push_back(0);
  edge_parent_.clear();
  edge_partial_.clear();
  leaf_count_ = 0;
  serial_ = next_serial();
}

void Tape::reserve(std::size_t nodes, std::size_t edges) {
  edge_begin_.reserve(nodes + 1);
  edge_parent_.reserve(edges);
  edge_partial_.reserve(edges);
}

DiffScalar Tape::new_leaf(double v) {
  if (!std::isfinite(v)) throw NumericError("non-finite leaf value");
  ++leaf_count_;
  return finish(v);
}

DiffScalar Tape::record(double v, const DiffScalar* parents,
                        const double* partials, std::size_t n) {
  const std::size_t first = edge_parent_.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (parents[i].is_constant()) continue;
    push_edge(parents[i], partials[i]);
  }
  if (edge_parent_.size() == first) return DiffScalar(v);
  return finish(v);
}

DiffScalar Tape::record_products(double v, const DiffScalar* a, const DiffScalar* b,
                                 std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!a[i].is_constant()) {
      push_edge(a[i], b[i].value_);
    }
    if (!b[i].is_constant()) {
      push_edge(b[i], a[i].value_);
    }
  }
  return finish(v);
}

DiffScalar Tape::record1(double v, const DiffScalar& a, double da) {
  push_edge(a, da);
  return finish(v);
}

std::vector<double> Tape::sweep(std::span<const DiffScalar> outputs,
                                std::span<const double> seeds) const {
  if (outputs.size() != seeds.size()) {
    throw LogicError("backward: outputs and seeds differ in length");
  }
  std::vector<double> adjoint(size(), 0.0);
  std::size_t top = 0;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    if (outputs[k].is_constant()) continue;
    if (!owns(outputs[k])) throw LogicError("backward: output not on this tape");
    adjoint[outputs[k].id_] += seeds[k];
    top = std::max(top, static_cast<std::size_t>(outputs[k].id_) + 1);
  }
  for (std::size_t n = top; n-- > 0;) {
    const double w = adjoint[n];
    if (w == 0.0) continue;
    for (std::uint32_t e = edge_begin_[n]; e < edge_begin_[n + 1]; ++e) {
      adjoint[edge_parent_[e]] += w * edge_partial_[e];
    }
  }
  return adjoint;
}

TapeScope::TapeScope(Tape& tape) : previous_(detail::active) { detail::active = &tape; }
TapeScope::~TapeScope() { detail::active = previous_; }

Tape* active_tape() { return detail::active; }

DiffScalar leaf(double value) { return require_tape().new_leaf(value); }

Gradient backward(const DiffScalar& loss) {
  Tape& tape = require_tape();
  if (!tape.owns(loss)) throw LogicError("backward: loss not on the active tape");
  const double seed = 1.0;
  return Gradient(tape.sweep({&loss, 1}, {&seed, 1}), tape.serial());
}

Gradient backward(std::span<const DiffScalar> outputs,
                  std::span<const double> seeds) {
  Tape& tape = require_tape();
  return Gradient(tape.sweep(outputs, seeds), tape.serial());
}

DiffScalar operator/(const DiffScalar& a, const DiffScalar& b) {
  if (b.value() == 0.0) throw NumericError("division by zero");
  // a / b rather than a * (1 / b): values match plain double arithmetic.
  const double v = a.value() / b.value();
  const double inv = 1.0 / b.value();
  return binary(v, a, inv, b, -v * inv, "div");
}

DiffScalar sin(const DiffScalar& a) {
  return unary(std::sin(a.value()), a, std::cos(a.value()), "sin");
}

DiffScalar cos(const DiffScalar& a) {
  return unary(std::cos(a.value()), a, -std::sin(a.value()), "cos");
}

DiffScalar exp(const DiffScalar& a) {
  const double v = std::exp(a.value());
  return unary(v, a, v, "exp");
}

DiffScalar log(const DiffScalar& a) {
  if (!(a.value() > 0.0)) throw NumericError("log of non-positive value");
  return unary(std::log(a.value()), a, 1.0 / a.value(), "log");
}

DiffScalar sqrt(const DiffScalar& a) {
  if (a.value() < 0.0) throw NumericError("sqrt of negative value");
  const double v = std::sqrt(a.value());
  if (a.is_constant()) return DiffScalar(v);
  if (v == 0.0) throw NumericError("sqrt derivative undefined at 0");
  return unary(v, a, 0.5 / v, "sqrt");
}

DiffScalar pow(const DiffScalar& a, double p) {
  const double v = std::pow(a.value(), p);
  return unary(v, a, p * std::pow(a.value(), p - 1.0), "pow");
}

DiffScalar pow(const DiffScalar& a, const DiffScalar& p) {
  if (p.is_constant()) return pow(a, p.value());
  if (!(a.value() > 0.0)) throw NumericError("pow with active exponent needs a positive base");
  const double v = std::pow(a.value(), p.value());
  return binary(v, a, p.value() * std::pow(a.value(), p.value() - 1.0), p,
                v * std::log(a.value()), "pow");
}

DiffScalar abs(const DiffScalar& a) {
  return unary(std::fabs(a.value()), a, a.value() >= 0.0 ? 1.0 : -1.0, "abs");
}

// Ties resolve to the first argument.
DiffScalar min(const DiffScalar& a, const DiffScalar& b) {
  return a.value() <= b.value() ? a : b;
}

DiffScalar max(const DiffScalar& a, const DiffScalar& b) {
  return a.value() >= b.value() ? a : b;
}

DiffScalar sigmoid(const DiffScalar& a) {
  const double s = msm::sigmoid(a.value());
  return unary(s, a, s * (1.0 - s), "sigmoid");
}

// At the bounds the interior derivative (1) is used.
DiffScalar clamp(const DiffScalar& a, double lo, double hi) {
  if (lo > hi) throw LogicError("clamp: lo > hi");
  if (a.value() < lo) return DiffScalar(lo);
  if (a.value() > hi) return DiffScalar(hi);
  return a;
}

DiffScalar dot(std::span<const DiffScalar> a, std::span<const DiffScalar> b) {
  if (a.size() != b.size()) throw LogicError("dot: length mismatch");
  double v = 0.0;
  bool active = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    v += a[i].value() * b[i].value();
    active = active || !a[i].is_constant() || !b[i].is_constant();
  }
  checked(v, "dot");
  if (!active) return DiffScalar(v);
  return require_tape().record_products(v, a.data(), b.data(), a.size());
}

DiffScalar dot(std::span<const DiffScalar> a, std::span<const double> w) {
  if (a.size() != w.size()) throw LogicError("dot: length mismatch");
  double v = 0.0;
  bool active = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    v += a[i].value() * w[i];
    active = active || !a[i].is_constant();
  }
  checked(v, "dot");
  if (!active) return DiffScalar(v);
  return require_tape().record(v, a.data(), w.data(), a.size());
}

DiffScalar sum(std::span<const DiffScalar> a) {
  std::vector<double> ones(a.size(), 1.0);
  return dot(a, std::span<const double>(ones));
}

double check_gradient(
    const std::function<DiffScalar(std::span<const DiffScalar>)>& f,
    std::span<const double> x, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw LogicError("check_gradient: step must be positive and finite");
  }
  Tape tape;
  TapeScope scope(tape);
  std::vector<DiffScalar> leaves;
  leaves.reserve(x.size());
  for (double v : x) leaves.push_back(leaf(v));
  const DiffScalar y = f(leaves);
  const Gradient g = y.is_constant() ? Gradient() : backward(y);

  // Constant inputs evaluate without recording.
  std::vector<DiffScalar> probe(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = DiffScalar(x[i] + h);
    const double fp = f(probe).value();
    probe[i] = DiffScalar(x[i] - h);
    const double fm = f(probe).value();
    probe[i] = DiffScalar(x[i]);
    const double fd = (fp - fm) / (2.0 * h);
    const double err = std::fabs(g[leaves[i]] - fd) / std::max(1.0, std::fabs(fd));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace msm::ad
