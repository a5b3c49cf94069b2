#pragma once

// Unit-ball geometry in dimensions 1..3.

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "starpoly/rng.hpp"

namespace starpoly {

/// Points always carry three coordinates; axes beyond the model
/// dimension stay zero, so distances need no dimension switch.
using Point = std::array<double, 3>;

inline constexpr int kMaxDim = 3;

inline void require_dimension(int d) {
  if (d < 1 || d > kMaxDim) {
    throw std::invalid_argument("unsupported dimension " + std::to_string(d) +
                                " (expected 1, 2 or 3)");
  }
}

inline double norm(const Point& p) noexcept {
  return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
}

inline double distance(const Point& a, const Point& b) noexcept {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

inline Point operator+(const Point& a, const Point& b) noexcept {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Point operator-(const Point& a, const Point& b) noexcept {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Point operator*(double s, const Point& a) noexcept {
  return {s * a[0], s * a[1], s * a[2]};
}
inline double dot(const Point& a, const Point& b) noexcept {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

/// |B_1(0)| in dimension d.
inline double ball_volume(int d) {
  require_dimension(d);
  switch (d) {
    case 1: return 2.0;
    case 2: return std::numbers::pi;
    default: return 4.0 * std::numbers::pi / 3.0;
  }
}

namespace detail {

// Lens volume without argument checks, for inner loops. Requires r >= 0.
inline double overlap_volume_unchecked(int d, double r) noexcept {
  if (r >= 2.0) return 0.0;
  switch (d) {
    case 1: return 2.0 - r;
    case 2: return 2.0 * std::acos(0.5 * r) - 0.5 * r * std::sqrt(4.0 - r * r);
    default: {
      const double gap = 2.0 - r;
      return std::numbers::pi / 12.0 * (4.0 + r) * gap * gap;
    }
  }
}

}  // namespace detail

/// Volume of B_1(a) ∩ B_1(b) for |a - b| = r. This is the exact pair
/// kernel of the occupation-measure energy: ∫ 1_{B_1(y)}(a) 1_{B_1(y)}(b) dy.
inline double overlap_volume(int d, double r) {
  require_dimension(d);
  if (!(r >= 0.0)) throw std::invalid_argument("overlap_volume: separation must be >= 0");
  return detail::overlap_volume_unchecked(d, r);
}

/// Unit vector in R^d.
///
/// For d >= 2 the law is uniform on the sphere (normalized Gaussian).
/// For d = 1 the drift construction uses the fixed direction +1; pass
/// `symmetric = true` to draw ±1 with equal probability instead.
inline Point uniform_sphere_direction(int d, Rng& rng, bool symmetric = false) {
  require_dimension(d);
  if (d == 1) {
    if (!symmetric) return {1.0, 0.0, 0.0};
    return {rng.uniform() < 0.5 ? -1.0 : 1.0, 0.0, 0.0};
  }
  for (;;) {
    Point v{rng.normal(), rng.normal(), d == 3 ? rng.normal() : 0.0};
    const double len = norm(v);
    if (len > 1e-300) return (1.0 / len) * v;
  }
}

}  // namespace starpoly
