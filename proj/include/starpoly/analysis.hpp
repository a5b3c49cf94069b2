#pragma once

// Radius statistics, tail events, exponent regression and the
// probabilistic helpers behind the radius bounds.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "starpoly/geometry.hpp"
#include "starpoly/paths.hpp"
#include "starpoly/rng.hpp"

namespace starpoly {

// ---------------------------------------------------------------------------
// Basic statistics

struct MeanEstimate {
  double mean = 0.0;
  double sigma = 0.0;  // standard error of the mean
};

inline MeanEstimate mean_and_error(std::span<const double> xs) {
  const auto n = xs.size();
  if (n == 0) throw std::invalid_argument("mean_and_error: empty sample");
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
  if (n == 1) return {m, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n))};
}

/// Standard error of the mean of a correlated series by non-overlapping
/// batch means. Trailing values that do not fill a batch are dropped from
/// the error estimate (but not from the mean).
inline MeanEstimate batch_means(std::span<const double> xs, int batches = 20) {
  const auto n = xs.size();
  if (n == 0) throw std::invalid_argument("batch_means: empty sample");
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
  const auto b = static_cast<std::size_t>(std::max(2, batches));
  const auto len = n / b;
  if (len == 0) return mean_and_error(xs);
  std::vector<double> means(b);
  for (std::size_t j = 0; j < b; ++j) {
    means[j] = std::accumulate(xs.begin() + static_cast<long>(j * len), xs.begin() + static_cast<long>((j + 1) * len), 0.0) /
               static_cast<double>(len);
  }
  return {m, mean_and_error(means).sigma};
}

/// Self-normalized weighted mean Σ w f / Σ w with its delta-method error.
inline MeanEstimate weighted_mean(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size() || values.empty()) throw std::invalid_argument("weighted_mean: size mismatch");
  double sw = 0.0, swf = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sw += weights[i];
    swf += weights[i] * values[i];
  }
  if (!(sw > 0.0)) throw std::domain_error("weighted_mean: all weights are zero");
  const double m = swf / sw;
  double var = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double r = weights[i] * (values[i] - m);
    var += r * r;
  }
  return {m, std::sqrt(var) / sw};
}

inline double effective_sample_size(std::span<const double> weights) {
  double s = 0.0, s2 = 0.0;
  for (double w : weights) {
    s += w;
    s2 += w * w;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

/// P(Z > x) for standard normal Z.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov law
/// (small-sample correction of Stephens).
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double dmax = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    dmax = std::max(dmax, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * dmax;
  double q = 0.0;
  if (lambda < 1e-3) {
    q = 1.0;
  } else {
    for (int k = 1; k <= 200; ++k) {
      const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
      q += term;
      if (std::abs(term) < 1e-16) break;
    }
    q = std::clamp(q, 0.0, 1.0);
  }
  return {dmax, q};
}

// ---------------------------------------------------------------------------
// Radius

/// max_{0 <= i <= n} |X_i|; the discrete-time stand-in for sup_t |B_t|.
inline double branch_supremum(const BranchPath& path) {
  double s = 0.0;
  for (const auto& p : path.positions) s = std::max(s, norm(p));
  return s;
}

/// Zero-based rank of the lower median among N values: ⌈N/2⌉ − 1.
constexpr std::size_t lower_median_rank(std::size_t n) noexcept { return (n + 1) / 2 - 1; }

struct RadiusSample {
  std::vector<double> suprema;  // per branch, in branch order
  double radius = 0.0;          // ⌈N/2⌉-th smallest supremum

  bool below(double r1) const noexcept { return radius <= r1; }
  bool above(double r2) const noexcept { return radius >= r2; }
};

inline RadiusSample radius_from_suprema(std::vector<double> suprema) {
  if (suprema.empty()) throw std::invalid_argument("radius_from_suprema: no branches");
  RadiusSample s;
  s.suprema = std::move(suprema);
  auto sorted = s.suprema;
  const auto rank = lower_median_rank(sorted.size());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(rank), sorted.end());
  s.radius = sorted[rank];
  return s;
}

inline RadiusSample radius_median(const StarEnsemble& ens) {
  std::vector<double> sups;
  sups.reserve(ens.branches.size());
  for (const auto& b : ens.branches) sups.push_back(branch_supremum(b));
  return radius_from_suprema(std::move(sups));
}

struct TailRates {
  MeanEstimate below;  // rate of {R_T <= r1}
  MeanEstimate above;  // rate of {R_T >= r2}
};

/// Empirical rates of {R <= r1} and {R >= r2}. Without weights the
/// samples are treated as a correlated chain (batch-means errors); with
/// weights the rates are self-normalized weighted means.
inline TailRates tail_event_rates(std::span<const double> radii, double r1, double r2,
                                  std::optional<std::span<const double>> weights = std::nullopt) {
  if (!(r1 >= 0.0) || !(r2 >= 0.0)) throw std::invalid_argument("tail_event_rates: thresholds must be >= 0");
  std::vector<double> lo(radii.size()), hi(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) {
    lo[i] = radii[i] <= r1 ? 1.0 : 0.0;
    hi[i] = radii[i] >= r2 ? 1.0 : 0.0;
  }
  if (weights) return {weighted_mean(lo, *weights), weighted_mean(hi, *weights)};
  return {batch_means(lo), batch_means(hi)};
}

// ---------------------------------------------------------------------------
// Scaling exponent

struct ExponentFit {
  std::vector<std::pair<double, double>> points;  // (T, R)
  double slope = 0.0;
  double intercept = 0.0;   // in log space
  double residual = 0.0;    // residual standard deviation in log space
  double half_width = 0.0;  // 95% confidence half-width of the slope
};

/// Least squares of log R on log T.
inline ExponentFit exponent_fit(std::vector<std::pair<double, double>> points) {
  if (points.size() < 3) throw std::invalid_argument("exponent_fit: need at least 3 points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].first > 0.0) || !(points[i].second > 0.0)) {
      throw std::invalid_argument("exponent_fit: values must be positive");
    }
    if (i > 0 && !(points[i].first > points[i - 1].first)) {
      throw std::invalid_argument("exponent_fit: T values must be strictly increasing");
    }
  }
  const double m = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& [t, r] : points) {
    sx += std::log(t);
    sy += std::log(r);
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [t, r] : points) {
    const double dx = std::log(t) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(r) - my);
  }
  ExponentFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (const auto& [t, r] : points) {
    const double e = std::log(r) - (fit.intercept + fit.slope * std::log(t));
    sse += e * e;
  }
  fit.residual = std::sqrt(sse / (m - 2.0));
  const boost::math::students_t dist(m - 2.0);
  fit.half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * fit.residual / std::sqrt(sxx);
  fit.points = std::move(points);
  return fit;
}

// ---------------------------------------------------------------------------
// Predicted radius bands

struct RadiusBand {
  double low = 0.0;
  double high = 0.0;
  double low_t_exponent = 0.0;
  double high_t_exponent = 0.0;
  bool hypotheses_hold = true;
  std::string note;
};

/// Radius bands of the main radius theorem with caller-supplied constants.
/// d = 1: c, C · β^{1/3} N^{1/3} T
/// d = 2: c, C · β^{1/4} N^{1/4} T^{3/4} (log βT)^{∓1/2}
/// d = 3: c · β^{1/6} N^{1/6} T^{1/2} (log βT)^{-1/3},  C · β^{1/4} N^{1/4} T^{3/4} (log βT)^{1/2}
/// Violated hypotheses are reported, not rejected.
inline RadiusBand predicted_radius_band(int d, double beta, int branches, double horizon, double c_low = 1.0,
                                        double c_high = 1.0) {
  require_dimension(d);
  if (!(beta > 0.0) || branches < 1 || !(horizon > 0.0)) {
    throw std::invalid_argument("predicted_radius_band: need beta > 0, N >= 1, T > 0");
  }
  const double n = branches;
  RadiusBand b;
  if (d == 1) {
    const double base = std::cbrt(beta * n) * horizon;
    b.low = c_low * base;
    b.high = c_high * base;
    b.low_t_exponent = b.high_t_exponent = 1.0;
    if (beta < 1.0) {
      b.hypotheses_hold = false;
      b.note = "beta < 1";
    }
    return b;
  }
  const double lg = std::log(beta * horizon);
  const double upper = std::pow(beta * n, 0.25) * std::pow(horizon, 0.75);
  b.high_t_exponent = 0.75;
  if (d == 2) {
    b.low_t_exponent = 0.75;
    b.low = c_low * upper / std::sqrt(lg);
  } else {
    b.low_t_exponent = 0.5;
    b.low = c_low * std::pow(beta * n, 1.0 / 6.0) * std::sqrt(horizon) / std::cbrt(lg);
  }
  b.high = c_high * upper * std::sqrt(lg);
  if (beta < 1.0 || horizon > n || !(lg > 0.0)) {
    b.hypotheses_hold = false;
    b.note = "outside beta >= 1, T <= N, beta*T > 1";
  }
  return b;
}

/// β^{1/(d+2)} N^{1/(d+2)} T^{3/(d+2)}: the heuristic radius, which in d = 3
/// coincides with the physical prediction β^{1/5} N^{1/5} T^{3/5} and in
/// d = 2 with β^{1/4} N^{1/4} T^{3/4}.
inline double heuristic_radius(int d, double beta, int branches, double horizon) {
  require_dimension(d);
  const double e = 1.0 / (d + 2);
  return std::pow(beta * branches, e) * std::pow(horizon, 3.0 * e);
}

// ---------------------------------------------------------------------------
// Bernoulli large deviations

/// ((1−α)p / (αq))^{αn} (q + p αq / ((1−α)p))^n, an upper bound for
/// P(S_n > αn) with S_n ~ Binomial(n, p) and α ∈ (p, 1).
inline double bernoulli_ld_bound(int n, double p, double alpha) {
  if (n < 0) throw std::invalid_argument("bernoulli_ld_bound: n must be >= 0");
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("bernoulli_ld_bound: p must lie in (0, 1)");
  if (!(alpha > p && alpha < 1.0)) throw std::domain_error("bernoulli_ld_bound: alpha must lie in (p, 1)");
  const double q = 1.0 - p;
  const double ratio = (1.0 - alpha) * p / (alpha * q);
  const double log_bound = alpha * n * std::log(ratio) + n * std::log(q + p / ratio);
  return std::exp(log_bound);
}

/// P(S_n > αn) by direct summation of binomial terms in log space.
inline double exact_binomial_tail(int n, double p, double alpha) {
  if (n < 0 || n > 1000) throw std::invalid_argument("exact_binomial_tail: n must lie in [0, 1000]");
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("exact_binomial_tail: p must lie in [0, 1]");
  const double threshold = alpha * n;
  int kmin = static_cast<int>(std::floor(threshold)) + 1;
  kmin = std::max(kmin, 0);
  if (kmin > n) return 0.0;
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  const double lp = std::log(p), lq = std::log1p(-p);
  const double lgn = std::lgamma(n + 1.0);
  double acc = 0.0;
  for (int k = kmin; k <= n; ++k) {
    acc += std::exp(lgn - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * lp + (n - k) * lq);
  }
  return std::min(acc, 1.0);
}

// ---------------------------------------------------------------------------
// Exit probability of a single branch (d = 1)

struct ExitProbCheck {
  double empirical = 0.0;
  double sigma = 0.0;
  double reflection_bound = 0.0;  // 4 Φ̄(r/√T)
  double shape_constant = 0.0;    // C making (C/r) exp(−r²/2T) equal the estimate
  bool pass = false;              // empirical <= reflection bound
};

/// Monte Carlo estimate of P(max_i |X_i| > r) for a discretized d = 1
/// Brownian path, compared with the reflection-principle bound.
inline ExitProbCheck exit_prob_bound_check(double r, double horizon, int n_paths, int steps, Rng& rng) {
  if (!(r > 0.0) || !(horizon > 0.0) || n_paths < 1) {
    throw std::invalid_argument("exit_prob_bound_check: need r > 0, T > 0, n_paths >= 1");
  }
  const TimeGrid grid(horizon, steps);
  const double sd = std::sqrt(grid.dt());
  long exits = 0;
  for (int s = 0; s < n_paths; ++s) {
    double x = 0.0;
    for (int i = 0; i < steps; ++i) {
      x += sd * rng.normal();
      if (std::abs(x) > r) {
        ++exits;
        break;
      }
    }
  }
  ExitProbCheck c;
  const double np = n_paths;
  c.empirical = static_cast<double>(exits) / np;
  c.sigma = std::sqrt(c.empirical * (1.0 - c.empirical) / np);
  c.reflection_bound = 4.0 * normal_sf(r / std::sqrt(horizon));
  c.shape_constant = c.empirical * r * std::exp(r * r / (2.0 * horizon));
  c.pass = c.empirical <= c.reflection_bound;
  return c;
}

}  // namespace starpoly
