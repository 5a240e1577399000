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

// Fixed-size 3-vectors and 3x3 matrices over double or DiffScalar.

#ifndef MSM_LINALG_HPP_
#define MSM_LINALG_HPP_

#include <array>
#include <cmath>

#include "msm/autodiff.hpp"

namespace msm {

template <class T>
struct Vec3 {
  std::array<T, 3> v{};

  Vec3() = default;
  Vec3(T x, T y, T z) : v{x, y, z} {}

  template <class U>
  static Vec3 from(const Vec3<U>& o) {
    return {T(o[0]), T(o[1]), T(o[2])};
  }

  T& operator[](int i) { return v[i]; }
  const T& operator[](int i) const { return v[i]; }
  const T* data() const { return v.data(); }

  Vec3& operator+=(const Vec3& o) {
    for (int i = 0; i < 3; ++i) v[i] += o.v[i];
    return *this;
  }
  Vec3& operator-=(const Vec3& o) {
    for (int i = 0; i < 3; ++i) v[i] -= o.v[i];
    return *this;
  }
};

using Vec3d = Vec3<double>;

template <class T>
Vec3<T> operator+(const Vec3<T>& a, const Vec3<T>& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
template <class T>
Vec3<T> operator-(const Vec3<T>& a, const Vec3<T>& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
template <class T>
Vec3<T> operator-(const Vec3<T>& a) {
  return {-a[0], -a[1], -a[2]};
}
template <class T>
Vec3<T> operator*(const T& s, const Vec3<T>& a) {
  return {s * a[0], s * a[1], s * a[2]};
}
template <class T>
T dot(const Vec3<T>& a, const Vec3<T>& b) {
  return dot3(a.data(), b.data());
}
template <class T>
Vec3<T> cross(const Vec3<T>& a, const Vec3<T>& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}
template <class T>
T norm(const Vec3<T>& a) {
  using std::sqrt;
  return sqrt(dot(a, a));
}

// Row-major 3x3.
template <class T>
struct Mat3 {
  std::array<T, 9> m{};

  static Mat3 zero() { return Mat3{}; }
  static Mat3 identity() {
    Mat3 r;
    r(0, 0) = T(1.0);
    r(1, 1) = T(1.0);
    r(2, 2) = T(1.0);
    return r;
  }
  template <class U>
  static Mat3 from(const Mat3<U>& o) {
    Mat3 r;
    for (int i = 0; i < 9; ++i) r.m[i] = T(o.m[i]);
    return r;
  }

  T& operator()(int r, int c) { return m[3 * r + c]; }
  const T& operator()(int r, int c) const { return m[3 * r + c]; }

  Vec3<T> row(int r) const { return {m[3 * r], m[3 * r + 1], m[3 * r + 2]}; }
  Vec3<T> col(int c) const { return {m[c], m[3 + c], m[6 + c]}; }

  Mat3 transpose() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }
};

using Mat3d = Mat3<double>;

template <class T>
Vec3<T> operator*(const Mat3<T>& a, const Vec3<T>& x) {
  return {dot3(&a.m[0], x.data()), dot3(&a.m[3], x.data()),
          dot3(&a.m[6], x.data())};
}

template <class T>
Mat3<T> operator*(const Mat3<T>& a, const Mat3<T>& b) {
  const Mat3<T> bt = b.transpose();
  Mat3<T> r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = dot3(&a.m[3 * i], &bt.m[3 * j]);
  return r;
}

template <class T>
Mat3<T> operator+(const Mat3<T>& a, const Mat3<T>& b) {
  Mat3<T> r;
  for (int i = 0; i < 9; ++i) r.m[i] = a.m[i] + b.m[i];
  return r;
}

template <class T>
Mat3<T> operator-(const Mat3<T>& a, const Mat3<T>& b) {
  Mat3<T> r;
  for (int i = 0; i < 9; ++i) r.m[i] = a.m[i] - b.m[i];
  return r;
}

template <class T>
Mat3<T> operator*(const T& s, const Mat3<T>& a) {
  Mat3<T> r;
  for (int i = 0; i < 9; ++i) r.m[i] = s * a.m[i];
  return r;
}

template <class T>
Mat3<T> skew(const Vec3<T>& w) {
  Mat3<T> r;
  r(0, 1) = -w[2];
  r(0, 2) = w[1];
  r(1, 0) = w[2];
  r(1, 2) = -w[0];
  r(2, 0) = -w[1];
  r(2, 1) = w[0];
  return r;
}

template <class T>
Mat3<T> outer(const Vec3<T>& a, const Vec3<T>& b) {
  Mat3<T> r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = a[i] * b[j];
  return r;
}

// Rotation by `angle` about the unit vector `axis` (Rodrigues).
template <class T>
Mat3<T> axis_rotation(const Vec3d& axis, const T& angle) {
  using std::cos;
  using std::sin;
  const T s = sin(angle);
  const T c1 = T(1.0) - cos(angle);
  const double x = axis[0], y = axis[1], z = axis[2];
  Mat3<T> r;
  r(0, 0) = T(1.0) - c1 * T(y * y + z * z);
  r(1, 1) = T(1.0) - c1 * T(x * x + z * z);
  r(2, 2) = T(1.0) - c1 * T(x * x + y * y);
  r(0, 1) = c1 * T(x * y) - s * T(z);
  r(1, 0) = c1 * T(x * y) + s * T(z);
  r(0, 2) = c1 * T(x * z) + s * T(y);
  r(2, 0) = c1 * T(x * z) - s * T(y);
  r(1, 2) = c1 * T(y * z) - s * T(x);
  r(2, 1) = c1 * T(y * z) + s * T(x);
  return r;
}

// Symmetric 3x3 from (xx, yy, zz, xy, xz, yz).
template <class T>
Mat3<T> symmetric_from6(const std::array<T, 6>& s) {
  Mat3<T> r;
  r(0, 0) = s[0];
  r(1, 1) = s[1];
  r(2, 2) = s[2];
  r(0, 1) = r(1, 0) = s[3];
  r(0, 2) = r(2, 0) = s[4];
  r(1, 2) = r(2, 1) = s[5];
  return r;
}

template <class T>
std::array<T, 6> symmetric_to6(const Mat3<T>& a) {
  return {a(0, 0), a(1, 1), a(2, 2), a(0, 1), a(0, 2), a(1, 2)};
}

}  // namespace msm

#endif  // MSM_LINALG_HPP_
