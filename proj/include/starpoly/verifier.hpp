#pragma once

// Deterministic quadrature checks of the elementary integrals and
// inequalities the partition-function bound rests on.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "starpoly/analysis.hpp"
#include "starpoly/quadrature.hpp"

namespace starpoly {

/// One verified quantity.
struct QuadResult {
  std::string inequality;
  std::string params;
  double computed = 0.0;
  double bound = 0.0;
  double ratio = 0.0;
  double error = 0.0;  // two-level estimate |fine − coarse|
  int levels = 0;      // grading levels of the fine mesh
  bool pass = false;
  std::string note;
};

/// Verdicts are withheld unless the error estimate is below this fraction
/// of the computed value.
inline constexpr double kErrorGate = 0.01;

inline bool error_gate(double value, double error) { return std::isfinite(value) && error < kErrorGate * std::abs(value); }

namespace detail {

inline std::string fmt_params(const char* fmt, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, fmt, a, b);
  return buf;
}

}  // namespace detail

/// ∫_0^∞ exp(−Kθ²) dθ, truncated at θ = 10/√K, against √π / (2√K).
inline QuadResult quad_gauss_identity(double K) {
  if (!(K > 0.0)) throw std::invalid_argument("quad_gauss_identity: K must be > 0");
  const auto est = quad::adaptive([K](double t) { return std::exp(-K * t * t); }, 0.0, 10.0 / std::sqrt(K), 1e-15);
  QuadResult r;
  r.inequality = "gauss_identity";
  r.params = detail::fmt_params("K=%g", K);
  r.computed = est.value;
  r.bound = std::sqrt(std::numbers::pi) / (2.0 * std::sqrt(K));
  r.ratio = r.computed / r.bound;
  r.error = est.error;
  r.levels = est.levels;
  const double rel = std::abs(r.ratio - 1.0);
  r.pass = rel < 1e-8 && error_gate(r.computed, r.error);
  char buf[64];
  std::snprintf(buf, sizeof buf, "relative error %.3e", rel);
  r.note = buf;
  return r;
}

namespace detail {

// I(K) = ∫_0^1 ∫_0^v v^{-7/8} u^{-3/8} exp(−cK v^{-1} (v^{3/4} − u^{3/4})²) du dv.
// With u = v s, s = w^{8/5} and v = z^{4/3} both power singularities
// cancel against the Jacobians:
//   I(K) = (32/15) ∫_0^1 ∫_0^1 exp(−cK z^{2/3} (1 − w^{6/5})²) dw dz.
// The inner integrand peaks at w = 1 with width ~ (cK z^{2/3})^{-1/2},
// so both meshes are graded toward their endpoints.
inline double master_integral_on(double ck, const std::vector<double>& zb, const std::vector<double>& wb,
                                 const quad::Rule& rule) {
  auto inner = [&](double z) {
    const double a = ck * std::cbrt(z * z);
    return quad::integrate_mesh(
        [a](double w) {
          const double g = 1.0 - std::pow(w, 1.2);
          return std::exp(-a * g * g);
        },
        wb, rule);
  };
  return 32.0 / 15.0 * quad::integrate_mesh(inner, zb, rule);
}

}  // namespace detail

/// I(K) for the master inequality I(K) <= K^{-1/2}; the ratio reported is
/// I(K) √K. Throws when the two mesh levels disagree by more than the gate.
inline QuadResult quad_master_inequality(double K, double c_inner = 1.0, int levels = 30) {
  if (!(K >= 1.0)) throw std::invalid_argument("quad_master_inequality: K must be >= 1");
  if (!(c_inner > 0.0)) throw std::invalid_argument("quad_master_inequality: C_inner must be > 0");
  static const quad::Rule rule = quad::gauss_legendre(12);
  const auto zb = quad::graded_breakpoints(0.0, 1.0, levels, true, true, 4);
  const auto wb = quad::graded_breakpoints(0.0, 1.0, levels, true, true, 4);
  const double coarse = detail::master_integral_on(c_inner * K, zb, wb, rule);
  const double fine = detail::master_integral_on(c_inner * K, quad::refine(zb), quad::refine(wb), rule);
  QuadResult r;
  r.inequality = "master_inequality";
  r.params = detail::fmt_params("K=%g;C_inner=%g", K, c_inner);
  r.computed = fine;
  r.bound = 1.0 / std::sqrt(K);
  r.ratio = fine * std::sqrt(K);
  r.error = std::abs(fine - coarse);
  r.levels = levels + 1;
  if (!error_gate(r.computed, r.error)) throw std::runtime_error("quad_master_inequality: mesh failed to converge");
  r.pass = std::isfinite(r.ratio);
  if (r.ratio > 1.0) r.note = "ratio exceeds 1; constant absorbed into C";
  return r;
}

/// ∫_0^1 v^{-7/8} ∫_0^v u^{-3/8} du dv = 32/15, the K-free majorant of I(K).
inline constexpr double kMasterMajorant = 32.0 / 15.0;

/// Least-squares slope of log(I(K) √K) against log K.
inline double master_trend_slope(const std::vector<QuadResult>& rows) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rows) pts.emplace_back(r.bound, r.ratio);  // bound = K^{-1/2}
  if (pts.size() < 2) throw std::invalid_argument("master_trend_slope: need at least 2 rows");
  double mx = 0.0, my = 0.0;
  for (auto& [b, ratio] : pts) {
    b = -2.0 * std::log(b);  // log K
    ratio = std::log(ratio);
    mx += b;
    my += ratio;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  return sxy / sxx;
}

namespace detail {

// ∫_0^1 x^{-η/2} e^{-x^η} dx on a mesh graded toward 0; the innermost cell
// [0, h] uses the two-term expansion of e^{-x^η}.
inline double eta_integral_on(double eta, const std::vector<double>& breaks, const quad::Rule& rule) {
  const double h = breaks.front();
  const double a = 1.0 - eta / 2.0;
  const double b = 1.0 + eta / 2.0;
  double acc = std::pow(h, a) / a - std::pow(h, b) / b;
  acc += quad::integrate_mesh([eta](double x) { return std::pow(x, -eta / 2.0) * std::exp(-std::pow(x, eta)); },
                              breaks, rule);
  return acc;
}

}  // namespace detail

/// ∫_0^1 x^{-η/2} e^{-x^η} dx for η ∈ (0, 2), finite by comparison with x^{-η/2}.
inline QuadResult quad_eta_integral(double eta, int levels = 60) {
  if (!(eta > 0.0 && eta < 2.0)) throw std::domain_error("quad_eta_integral: eta must lie in (0, 2)");
  static const quad::Rule rule = quad::gauss_legendre(12);
  auto full = quad::graded_breakpoints(0.0, 1.0, levels, true, false, 4);
  full.erase(full.begin());  // drop 0; first cell handled analytically
  const double coarse = detail::eta_integral_on(eta, full, rule);
  auto finer = quad::graded_breakpoints(0.0, 1.0, levels + 1, true, false, 8);
  finer.erase(finer.begin());
  const double fine = detail::eta_integral_on(eta, quad::refine(finer), rule);
  QuadResult r;
  r.inequality = "eta_integral";
  r.params = detail::fmt_params("eta=%g", eta);
  r.computed = fine;
  r.bound = std::exp(-1.0) * 2.0 / (2.0 - eta);  // lower bound from e^{-x^η} >= e^{-1}
  r.ratio = fine / r.bound;
  r.error = std::abs(fine - coarse);
  r.levels = levels + 1;
  if (!error_gate(r.computed, r.error)) throw std::runtime_error("quad_eta_integral: mesh failed to converge");
  r.pass = std::isfinite(fine) && fine >= r.bound;
  return r;
}

/// 1 − cos θ >= C θ² on a uniform grid of `points` over [0, π]; computed is
/// the smallest margin, which must be nonnegative up to rounding.
inline QuadResult check_cosine_bound(double c = 2.0 / (std::numbers::pi * std::numbers::pi), int points = 10000) {
  if (points < 2) throw std::invalid_argument("check_cosine_bound: need at least 2 grid points");
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < points; ++i) {
    const double t = std::numbers::pi * i / (points - 1);
    const double s = std::sin(0.5 * t);
    worst = std::min(worst, 2.0 * s * s - c * t * t);  // 1 − cos t = 2 sin²(t/2)
  }
  QuadResult r;
  r.inequality = "cosine_bound";
  r.params = detail::fmt_params("C=%.17g;points=%g", c, points);
  r.computed = worst;
  r.bound = 0.0;
  r.ratio = 0.0;
  r.error = 0.0;
  r.pass = worst >= -1e-12;
  return r;
}

struct VerifierOptions {
  std::vector<double> gauss_k{1.0, 10.0, 100.0, 1e3, 1e4};
  std::vector<double> master_k{1.0, 10.0, 100.0, 1e3, 1e4};
  std::vector<double> c_inner{0.25, 1.0, 4.0};
  std::vector<double> etas{0.25, 0.5, 1.0, 1.5, 1.9};
  double max_trend_slope = 0.05;
  bool inject_failure = false;  // replaces the cosine constant by a violated one
  int threads = 1;
};

/// Full sweep. Row order: gauss identity per K; per C_inner the master
/// integral per K, its majorant check at K = 1 and its trend; eta per η;
/// the cosine bound.
inline std::vector<QuadResult> run_verifier(const VerifierOptions& opt = {}) {
  std::vector<QuadResult> rows;
  for (double k : opt.gauss_k) rows.push_back(quad_gauss_identity(k));

  // Master integrals dominate the cost; evaluate them concurrently and
  // collect in tuple order.
  std::vector<std::vector<QuadResult>> master(opt.c_inner.size());
  {
    std::vector<std::future<QuadResult>> jobs;
    std::vector<QuadResult> flat;
    auto launch = opt.threads > 1 ? std::launch::async : std::launch::deferred;
    for (double c : opt.c_inner) {
      for (double k : opt.master_k) jobs.push_back(std::async(launch, [k, c] { return quad_master_inequality(k, c); }));
    }
    for (auto& j : jobs) flat.push_back(j.get());
    for (std::size_t ci = 0; ci < opt.c_inner.size(); ++ci) {
      master[ci].assign(flat.begin() + static_cast<long>(ci * opt.master_k.size()),
                        flat.begin() + static_cast<long>((ci + 1) * opt.master_k.size()));
    }
  }
  for (std::size_t ci = 0; ci < opt.c_inner.size(); ++ci) {
    const auto& ms = master[ci];
    rows.insert(rows.end(), ms.begin(), ms.end());

    const auto k1 = std::find_if(ms.begin(), ms.end(), [](const QuadResult& r) { return r.bound == 1.0; });
    if (k1 != ms.end()) {
      QuadResult m = *k1;
      m.inequality = "master_majorant";
      m.bound = kMasterMajorant;
      m.ratio = m.computed / m.bound;
      m.pass = m.computed <= m.bound;
      m.note.clear();
      rows.push_back(m);
    }

    QuadResult t;
    t.inequality = "master_trend";
    t.params = detail::fmt_params("C_inner=%g", opt.c_inner[ci]);
    t.computed = master_trend_slope(ms);
    t.bound = opt.max_trend_slope;
    t.ratio = 0.0;
    const auto peak = std::max_element(ms.begin(), ms.end(),
                                       [](const QuadResult& a, const QuadResult& b) { return a.ratio < b.ratio; });
    t.ratio = peak->ratio;
    t.note = "sup ratio at " + peak->params;
    if (peak == ms.end() - 1) t.note += " (sweep endpoint)";
    t.pass = t.computed <= t.bound;
    rows.push_back(t);
  }

  for (double eta : opt.etas) rows.push_back(quad_eta_integral(eta));
  const double c = 2.0 / (std::numbers::pi * std::numbers::pi);
  rows.push_back(check_cosine_bound(opt.inject_failure ? 1.01 * c + 0.01 : c));
  return rows;
}

inline bool all_pass(const std::vector<QuadResult>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const QuadResult& r) { return r.pass; });
}

}  // namespace starpoly
