#pragma once

#include <cmath>

namespace lendsim {

struct Vec2 {
  double v0 = 0.0;
  double v1 = 0.0;
};

struct Mat2 {
  double m00 = 0.0, m01 = 0.0;
  double m10 = 0.0, m11 = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.v0 + b.v0, a.v1 + b.v1}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.v0 - b.v0, a.v1 - b.v1}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.v0, s * a.v1}; }

inline double dot(Vec2 a, Vec2 b) { return a.v0 * b.v0 + a.v1 * b.v1; }

inline Vec2 mul(const Mat2& m, Vec2 x) {
  return {m.m00 * x.v0 + m.m01 * x.v1, m.m10 * x.v0 + m.m11 * x.v1};
}

inline Mat2 outer(Vec2 a, Vec2 b) {
  return {a.v0 * b.v0, a.v0 * b.v1, a.v1 * b.v0, a.v1 * b.v1};
}

inline Mat2 operator+(const Mat2& a, const Mat2& b) {
  return {a.m00 + b.m00, a.m01 + b.m01, a.m10 + b.m10, a.m11 + b.m11};
}

inline Mat2 operator-(const Mat2& a, const Mat2& b) {
  return {a.m00 - b.m00, a.m01 - b.m01, a.m10 - b.m10, a.m11 - b.m11};
}

inline Mat2 operator*(double s, const Mat2& a) {
  return {s * a.m00, s * a.m01, s * a.m10, s * a.m11};
}

inline Mat2 matmul(const Mat2& a, const Mat2& b) {
  return {a.m00 * b.m00 + a.m01 * b.m10, a.m00 * b.m01 + a.m01 * b.m11,
          a.m10 * b.m00 + a.m11 * b.m10, a.m10 * b.m01 + a.m11 * b.m11};
}

inline Mat2 identity2() { return {1.0, 0.0, 0.0, 1.0}; }

inline Mat2 symmetrize(const Mat2& a) {
  const double off = 0.5 * (a.m01 + a.m10);
  return {a.m00, off, off, a.m11};
}

// Solve a 2x2 system by Cramer's rule; caller guarantees det != 0.
inline Vec2 solve2(const Mat2& a, Vec2 b) {
  const double det = a.m00 * a.m11 - a.m01 * a.m10;
  return {(b.v0 * a.m11 - a.m01 * b.v1) / det,
          (a.m00 * b.v1 - b.v0 * a.m10) / det};
}

// Largest eigenvalue of a symmetric 2x2.
inline double eig_max_sym(const Mat2& a) {
  const double tr = a.m00 + a.m11;
  const double d = a.m00 - a.m11;
  const double disc = std::sqrt(d * d + 4.0 * a.m01 * a.m10);
  return 0.5 * (tr + disc);
}

}  // namespace lendsim
