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

// Scalar reverse-mode automatic differentiation.
//
// A DiffScalar is a value plus an optional handle into the tape that is active
// on the current thread. Arithmetic between constants (no handle) never
// touches the tape, so the same templated code evaluates plain double
// expressions at full speed and records only what depends on leaves.
//
//   ad::Tape tape;
//   ad::TapeScope scope(tape);
//   auto x = ad::leaf(3.0);
//   auto y = x * x;
//   ad::Gradient g = ad::backward(y);   // g[x] == 6

#ifndef MSM_AUTODIFF_HPP_
#define MSM_AUTODIFF_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "msm/error.hpp"

namespace msm::ad {

class Tape;

class DiffScalar {
 public:
  constexpr DiffScalar() = default;
  constexpr DiffScalar(double v) : value_(v) {}  // NOLINT: implicit constant

  double value() const { return value_; }
  bool is_constant() const { return id_ < 0; }
  std::int32_t id() const { return id_; }
  std::uint32_t tape_serial() const { return serial_; }

 private:
  friend class Tape;
  DiffScalar(double v, std::int32_t id, std::uint32_t serial)
      : value_(v), id_(id), serial_(serial) {}

  double value_ = 0.0;
  std::int32_t id_ = -1;
  std::uint32_t serial_ = 0;
};

// Node storage in topological order. Each node keeps a contiguous run of
// (parent, partial) edges; leaves have none.
class Tape {
 public:
  Tape();

  // Drops every node. Scalars recorded before the reset become stale and are
  // rejected by backward().
  void reset();
  void reserve(std::size_t nodes, std::size_t edges);

  std::size_t size() const { return edge_begin_.size() - 1; }
  std::size_t edge_count() const { return edge_parent_.size(); }
  std::size_t leaf_count() const { return leaf_count_; }
  std::uint32_t serial() const { return serial_; }

  DiffScalar new_leaf(double v);

  // Records a node with up to `n` active parents; constant parents are
  // skipped. Returns a constant if no parent is active.
  DiffScalar record(double v, const DiffScalar* parents, const double* partials,
                    std::size_t n);
  DiffScalar record1(double v, const DiffScalar& a, double da);
  // Node with edges a[i] -> b[i].value() and b[i] -> a[i].value().
  DiffScalar record_products(double v, const DiffScalar* a, const DiffScalar* b, std::size_t n);
  DiffScalar record2(double v, const DiffScalar& a, double da, const DiffScalar& b, double db) {
    if (!a.is_constant()) push_edge(a, da);
    if (!b.is_constant()) push_edge(b, db);
    return finish(v);
  }

  bool owns(const DiffScalar& s) const {
    return !s.is_constant() && s.serial_ == serial_ &&
           static_cast<std::size_t>(s.id_) < size();
  }

  // Reverse sweep seeded with d(output)/d(outputs[k]) = seeds[k]. Returns the
  // adjoint of every node.
  std::vector<double> sweep(std::span<const DiffScalar> outputs,
                            std::span<const double> seeds) const;

 private:
  DiffScalar finish(double v) {
    edge_begin_.push_back(static_cast<std::uint32_t>(edge_parent_.size()));
    return DiffScalar(v, static_cast<std::int32_t>(edge_begin_.size() - 2), serial_);
  }

  void push_edge(const DiffScalar& parent, double partial) {
    edge_parent_.push_back(parent.id_);
    edge_partial_.push_back(partial);
  }
  std::vector<std::uint32_t> edge_begin_;  // size() + 1 entries
  std::vector<std::int32_t> edge_parent_;
  std::vector<double> edge_partial_;
  std::size_t leaf_count_ = 0;
  std::uint32_t serial_;
};

// Binds a tape to the current thread for the lifetime of the scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Tape active on this thread, or nullptr.
Tape* active_tape();

// Gradient of one output with respect to every node of its tape.
class Gradient {
 public:
  Gradient() = default;
  Gradient(std::vector<double> adjoint, std::uint32_t serial)
      : adjoint_(std::move(adjoint)), serial_(serial) {}

  // Zero for constants and for scalars that belong to another tape.
  double operator[](const DiffScalar& s) const {
    if (s.is_constant() || s.tape_serial() != serial_ ||
        static_cast<std::size_t>(s.id()) >= adjoint_.size()) {
      return 0.0;
    }
    return adjoint_[s.id()];
  }
  const std::vector<double>& adjoints() const { return adjoint_; }

 private:
  std::vector<double> adjoint_;
  std::uint32_t serial_ = 0;
};

// New leaf on the active tape. Throws NumericError for non-finite input and
// LogicError when no tape is active.
DiffScalar leaf(double value);

// d(loss)/d(node) for every node of the active tape. Throws LogicError when
// `loss` was not recorded on it.
Gradient backward(const DiffScalar& loss);

// Vector-Jacobian product: sum_k seeds[k] * d(outputs[k])/d(node).
Gradient backward(std::span<const DiffScalar> outputs,
                  std::span<const double> seeds);

namespace detail {
inline thread_local Tape* active = nullptr;

[[noreturn]] void throw_non_finite(const char* op);
[[noreturn]] void throw_no_tape();
DiffScalar record_unary(double v, const DiffScalar& a, double da, const char* op);

inline DiffScalar record_binary(double v, const DiffScalar& a, double da, const DiffScalar& b,
                                double db, const char* op) {
  if (active == nullptr) throw_no_tape();
  if (!std::isfinite(da) || !std::isfinite(db)) throw_non_finite(op);
  return active->record2(v, a, da, b, db);
}

// Constant operands stay off the tape; only mixed or active ones record.
inline DiffScalar binary(double v, const DiffScalar& a, double da, const DiffScalar& b,
                         double db, const char* op) {
  if (!std::isfinite(v)) throw_non_finite(op);
  if (a.is_constant() && b.is_constant()) return DiffScalar(v);
  return record_binary(v, a, da, b, db, op);
}
}  // namespace detail

inline DiffScalar operator+(const DiffScalar& a, const DiffScalar& b) {
  return detail::binary(a.value() + b.value(), a, 1.0, b, 1.0, "add");
}
inline DiffScalar operator-(const DiffScalar& a, const DiffScalar& b) {
  return detail::binary(a.value() - b.value(), a, 1.0, b, -1.0, "sub");
}
inline DiffScalar operator*(const DiffScalar& a, const DiffScalar& b) {
  return detail::binary(a.value() * b.value(), a, b.value(), b, a.value(), "mul");
}
DiffScalar operator/(const DiffScalar& a, const DiffScalar& b);
inline DiffScalar operator-(const DiffScalar& a) {
  if (a.is_constant()) return DiffScalar(-a.value());
  return detail::record_unary(-a.value(), a, -1.0, "neg");
}

inline DiffScalar& operator+=(DiffScalar& a, const DiffScalar& b) { return a = a + b; }
inline DiffScalar& operator-=(DiffScalar& a, const DiffScalar& b) { return a = a - b; }
inline DiffScalar& operator*=(DiffScalar& a, const DiffScalar& b) { return a = a * b; }
inline DiffScalar& operator/=(DiffScalar& a, const DiffScalar& b) { return a = a / b; }

inline bool operator<(const DiffScalar& a, const DiffScalar& b) { return a.value() < b.value(); }
inline bool operator>(const DiffScalar& a, const DiffScalar& b) { return a.value() > b.value(); }
inline bool operator<=(const DiffScalar& a, const DiffScalar& b) { return a.value() <= b.value(); }
inline bool operator>=(const DiffScalar& a, const DiffScalar& b) { return a.value() >= b.value(); }

DiffScalar sin(const DiffScalar& a);
DiffScalar cos(const DiffScalar& a);
DiffScalar exp(const DiffScalar& a);
DiffScalar log(const DiffScalar& a);
DiffScalar sqrt(const DiffScalar& a);
DiffScalar pow(const DiffScalar& a, double p);
DiffScalar pow(const DiffScalar& a, const DiffScalar& p);
DiffScalar abs(const DiffScalar& a);
DiffScalar min(const DiffScalar& a, const DiffScalar& b);
DiffScalar max(const DiffScalar& a, const DiffScalar& b);
DiffScalar sigmoid(const DiffScalar& a);
DiffScalar clamp(const DiffScalar& a, double lo, double hi);

// Fused n-ary nodes: one tape node regardless of length.
DiffScalar dot(std::span<const DiffScalar> a, std::span<const DiffScalar> b);
DiffScalar dot(std::span<const DiffScalar> a, std::span<const double> w);
DiffScalar sum(std::span<const DiffScalar> a);

// Max over coordinates of |autodiff - central difference| /
// max(1, |central difference|). Evaluates `f` on its own tape.
double check_gradient(
    const std::function<DiffScalar(std::span<const DiffScalar>)>& f,
    std::span<const double> x, double h);

}  // namespace msm::ad

namespace msm {

// Scalar helpers usable from templates instantiated with double or DiffScalar.
inline double value_of(double v) { return v; }
inline double value_of(const ad::DiffScalar& v) { return v.value(); }

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

template <class T>
T dot3(const T* a, const T* b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
template <>
inline ad::DiffScalar dot3(const ad::DiffScalar* a, const ad::DiffScalar* b) {
  return ad::dot(std::span<const ad::DiffScalar>(a, 3),
                 std::span<const ad::DiffScalar>(b, 3));
}

}  // namespace msm

#endif  // MSM_AUTODIFF_HPP_
