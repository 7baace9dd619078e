// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>

namespace srf {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }

  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const { return *this / norm(); }
  Vec3 cwise_mul(const Vec3& o) const { return {x * o.x, y * o.y, z * o.z}; }
  double max_coeff() const { return std::fmax(x, std::fmax(y, z)); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Colors share the vector type; channels are r=x, g=y, b=z.
using Rgb = Vec3;

// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{};

  static Mat3 identity() {
    Mat3 r;
    r.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    return r;
  }

  double operator()(int r, int c) const { return m[r * 3 + c]; }
  double& operator()(int r, int c) { return m[r * 3 + c]; }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
        r(i, j) = s;
      }
    return r;
  }

  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }

  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }

  // Rodrigues rotation from an axis-angle vector (angle = |w|).
  static Mat3 exp(const Vec3& w) {
    const double s2 = w.dot(w);
    double a, b;  // coefficients of [w]x and [w]x^2
    if (s2 < 1e-12) {
      a = 1.0 - s2 / 6.0;
      b = 0.5 - s2 / 24.0;
    } else {
      const double th = std::sqrt(s2);
      a = std::sin(th) / th;
      b = (1.0 - std::cos(th)) / s2;
    }
    Mat3 k;  // skew(w)
    k.m = {0, -w.z, w.y, w.z, 0, -w.x, -w.y, w.x, 0};
    const Mat3 k2 = k * k;
    Mat3 r = Mat3::identity();
    for (int i = 0; i < 9; ++i) r.m[i] += a * k.m[i] + b * k2.m[i];
    return r;
  }
};

// Angle in radians between two rotations.
inline double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const Mat3 d = a.transposed() * b;
  const double tr = d.m[0] + d.m[4] + d.m[8];
  const double c = std::clamp((tr - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

}  // namespace srf
