#pragma once

// Gauss-Legendre rules on geometrically graded meshes, plus a simple
// adaptive bisection driver.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace starpoly::quad {

struct Rule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule by Newton iteration on P_n.
inline Rule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  Rule r{std::vector<double>(static_cast<std::size_t>(n)), std::vector<double>(static_cast<std::size_t>(n))};
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged node.
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n == 1 ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[static_cast<std::size_t>(i)] = -x;
    r.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    r.weights[static_cast<std::size_t>(i)] = w;
    r.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  if (n == 1) {
    r.nodes[0] = 0.0;
    r.weights[0] = 2.0;
  }
  return r;
}

template <class F>
double integrate(const F& f, double a, double b, const Rule& rule) {
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return acc * half;
}

/// Breakpoints on [a, b]: `levels` cells shrinking by a factor 2 toward
/// each graded end, then `uniform` equal cells across the middle.
inline std::vector<double> graded_breakpoints(double a, double b, int levels, bool toward_a, bool toward_b,
                                              int uniform = 1) {
  if (!(b > a) || levels < 0 || uniform < 1) throw std::invalid_argument("graded_breakpoints: bad mesh");
  // Work on [0, 1] and map back.
  double lo = 0.0, hi = 1.0;
  if (toward_a && toward_b) {
    lo = 0.25;
    hi = 0.75;
  } else if (toward_a) {
    lo = 0.5;
  } else if (toward_b) {
    hi = 0.5;
  }
  std::vector<double> t;
  if (toward_a) {
    t.push_back(0.0);
    for (int l = levels; l >= 1; --l) t.push_back(lo * std::ldexp(1.0, -l));
  }
  for (int u = 0; u <= uniform; ++u) t.push_back(lo + (hi - lo) * u / uniform);
  if (toward_b) {
    for (int l = 1; l <= levels; ++l) t.push_back(1.0 - (1.0 - hi) * std::ldexp(1.0, -l));
    t.push_back(1.0);
  }
  std::vector<double> out;
  out.reserve(t.size());
  for (double s : t) {
    const double x = a + (b - a) * s;
    if (out.empty() || x > out.back()) out.push_back(x);
  }
  out.back() = b;
  return out;
}

/// Composite rule over consecutive breakpoints.
template <class F>
double integrate_mesh(const F& f, const std::vector<double>& breaks, const Rule& rule) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) acc += integrate(f, breaks[i], breaks[i + 1], rule);
  return acc;
}

/// Breakpoints with every cell split in two.
inline std::vector<double> refine(const std::vector<double>& breaks) {
  std::vector<double> out;
  out.reserve(2 * breaks.size());
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    out.push_back(breaks[i]);
    out.push_back(0.5 * (breaks[i] + breaks[i + 1]));
  }
  out.push_back(breaks.back());
  return out;
}

struct Estimate {
  double value = 0.0;
  double error = 0.0;  // |fine − coarse| between two mesh levels
  int levels = 0;
};

namespace detail {

template <class F>
double adaptive_step(const F& f, double a, double b, double whole, double tol, int depth, const Rule& hi) {
  const double mid = 0.5 * (a + b);
  const double left = integrate(f, a, mid, hi);
  const double right = integrate(f, mid, b, hi);
  if (depth <= 0 || std::abs(left + right - whole) <= tol) return left + right;
  return adaptive_step(f, a, mid, left, 0.5 * tol, depth - 1, hi) +
         adaptive_step(f, mid, b, right, 0.5 * tol, depth - 1, hi);
}

}  // namespace detail

/// Adaptive bisection with a 15-point Gauss rule, refined until the
/// two-level difference on every subinterval is below its share of `tol`.
template <class F>
Estimate adaptive(const F& f, double a, double b, double tol = 1e-13, int max_depth = 40) {
  static const Rule hi = gauss_legendre(15);
  const double coarse = integrate(f, a, b, hi);
  const double fine = detail::adaptive_step(f, a, b, coarse, tol, max_depth, hi);
  return {fine, std::abs(fine - coarse), max_depth};
}

}  // namespace starpoly::quad
