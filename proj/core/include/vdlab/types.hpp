#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace vdlab {

inline constexpr int kMaxDim = 2;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Point on the torus, covector or velocity. Entries past the active dimension are zero.
using Vec = std::array<double, kMaxDim>;

inline double dot(const Vec& a, const Vec& b, int dim) {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) s += a[k] * b[k];
  return s;
}

inline double norm(const Vec& a, int dim) { return std::sqrt(dot(a, a, dim)); }

inline double max_abs(const Vec& a, int dim) {
  double m = 0.0;
  for (int k = 0; k < dim; ++k) m = std::max(m, std::abs(a[k]));
  return m;
}

/// Reduces an angle into [0, 2π).
inline double wrap_angle(double x) {
  double r = std::fmod(x, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

inline Vec wrap_point(Vec x, int dim) {
  for (int k = 0; k < dim; ++k) x[k] = wrap_angle(x[k]);
  return x;
}

}  // namespace vdlab
