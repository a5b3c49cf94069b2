#pragma once

// Estimates of log Z_T under a tilted (drifted) proposal law.
//
//   Z_T = E^λ[ exp(−βE) / W ],   W = dP^λ/dP
//   log Z_T >= −β E^λ[E] − E^λ[log W] = −β I_1 − KL
//
// KL is evaluated exactly from the drift (`kl_tilted`); I_1 and the
// importance-sampled Z_T are Monte Carlo averages over tilted ensembles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "starpoly/analysis.hpp"
#include "starpoly/energy.hpp"
#include "starpoly/paths.hpp"
#include "starpoly/rng.hpp"
#include "starpoly/sampler.hpp"

namespace starpoly {

struct ZOptions {
  std::int64_t samples = 10000;
  bool resample_theta = true;  // fresh θ per replicate, else one θ for the run
  std::optional<DriftParams> drift;  // defaults to drift_params_for
  std::int64_t reference_samples = 0;  // driftless Monte Carlo; 0 disables
  std::int64_t reference_budget = kDefaultNaiveBudget;
  int threads = 1;
};

struct ZEstimate {
  double kappa = 0.0;
  double alpha = 0.0;
  bool theta_resampled = true;
  std::int64_t samples = 0;

  double kl = 0.0;  // exact, nonnegative
  MeanEstimate energy;      // Î_1
  MeanEstimate log_weight;  // mean of log W under the tilt, ≈ KL

  double jensen_lower = 0.0;  // −β Î_1 − KL
  double jensen_sigma = 0.0;
  double unbiased_log = 0.0;  // log mean exp(−βE − log W)
  double unbiased_sigma = 0.0;
  std::optional<double> reference_log;
  std::optional<double> reference_sigma;
  bool degenerate = false;  // every importance weight underflowed

  /// Spread allowed between the Jensen bound and the importance-sampled
  /// value: both estimators share samples, so the noise of mean(log W)
  /// around KL enters alongside the two reported errors.
  double combined_sigma() const noexcept {
    return std::sqrt(jensen_sigma * jensen_sigma + unbiased_sigma * unbiased_sigma +
                     log_weight.sigma * log_weight.sigma);
  }

  bool jensen_consistent(double sigmas = 3.0) const noexcept {
    return jensen_lower <= unbiased_log + sigmas * combined_sigma();
  }
};

/// log of the mean of exp(values), shifted by the maximum, with a
/// delta-method standard error.
inline MeanEstimate log_mean_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("log_mean_exp: empty sample");
  const double top = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(top)) return {top, std::numeric_limits<double>::infinity()};
  std::vector<double> shifted(values.size());
  std::transform(values.begin(), values.end(), shifted.begin(), [top](double v) { return std::exp(v - top); });
  const auto m = mean_and_error(shifted);
  return {top + std::log(m.mean), m.sigma / m.mean};
}

namespace detail {

inline constexpr std::int64_t kZBlock = 1024;

struct TiltedDraws {
  std::vector<double> energy;
  std::vector<double> log_weight;
};

// Replicates are produced in fixed blocks, each with its own stream, so the
// result does not depend on the thread count.
inline TiltedDraws draw_tilted(const StarConfig& cfg, const DriftParams& drift, const ZOptions& opt,
                               std::uint64_t seed) {
  const auto n = opt.samples;
  TiltedDraws out{std::vector<double>(static_cast<std::size_t>(n)), std::vector<double>(static_cast<std::size_t>(n))};
  const auto grid = cfg.grid();
  std::optional<TiltParams> fixed;
  if (!opt.resample_theta) {
    Rng theta_rng = Rng::stream(seed, 0xFFFF'FFFFULL);
    fixed = make_tilt(grid, drift.kappa, drift.alpha, sample_directions(cfg, theta_rng));
  }
  const std::int64_t blocks = (n + kZBlock - 1) / kZBlock;
  auto work = [&](std::int64_t b) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(b));
    const std::int64_t lo = b * kZBlock, hi = std::min(n, lo + kZBlock);
    for (std::int64_t s = lo; s < hi; ++s) {
      const TiltParams tilt = fixed ? *fixed : make_tilt(grid, drift.kappa, drift.alpha, sample_directions(cfg, rng));
      const auto ens = sample_tilted_star(cfg, tilt, rng);
      out.energy[static_cast<std::size_t>(s)] = energy_cells(ens).total;
      out.log_weight[static_cast<std::size_t>(s)] = log_likelihood_ratio(ens, tilt);
    }
  };
  const int threads = std::max(1, std::min<int>(opt.threads, static_cast<int>(blocks)));
  if (threads == 1) {
    for (std::int64_t b = 0; b < blocks; ++b) work(b);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::int64_t b = t; b < blocks; b += threads) work(b);
      });
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

}  // namespace detail

/// Driftless Monte Carlo estimate of log Z_T (small instances only).
inline MeanEstimate reference_log_z(const StarConfig& cfg, std::int64_t samples, std::uint64_t seed,
                                    std::int64_t budget = kDefaultNaiveBudget) {
  cfg.validate();
  if (static_cast<std::int64_t>(cfg.branches) * cfg.steps > budget) {
    throw std::invalid_argument("reference_log_z: instance exceeds the naive budget");
  }
  if (samples < 2) throw std::invalid_argument("reference_log_z: need at least 2 samples");
  std::vector<double> y(static_cast<std::size_t>(samples));
  for (std::int64_t b = 0; b * detail::kZBlock < samples; ++b) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(b));
    const std::int64_t hi = std::min(samples, (b + 1) * detail::kZBlock);
    for (std::int64_t s = b * detail::kZBlock; s < hi; ++s) {
      y[static_cast<std::size_t>(s)] = -cfg.beta * energy_cells(sample_star(cfg, rng)).total;
    }
  }
  return log_mean_exp(y);
}

/// Jensen bound and importance-sampled log Z_T from one set of tilted replicates.
inline ZEstimate estimate_log_z(const StarConfig& cfg, const ZOptions& opt, std::uint64_t seed) {
  cfg.validate();
  if (opt.samples < 2) throw std::invalid_argument("estimate_log_z: need at least 2 samples");
  const DriftParams drift = opt.drift.value_or(drift_params_for(cfg.d, cfg.beta, cfg.branches));

  ZEstimate z;
  z.kappa = drift.kappa;
  z.alpha = drift.alpha;
  z.theta_resampled = opt.resample_theta;
  z.samples = opt.samples;
  z.kl = cfg.branches * kl_tilted(make_tilt(cfg.grid(), drift.kappa, drift.alpha, {Point{1.0, 0.0, 0.0}}));

  const auto draws = detail::draw_tilted(cfg, drift, opt, stream_seed(seed, 1));
  z.energy = mean_and_error(draws.energy);
  z.log_weight = mean_and_error(draws.log_weight);
  z.jensen_lower = -cfg.beta * z.energy.mean - z.kl;
  z.jensen_sigma = cfg.beta * z.energy.sigma;

  std::vector<double> y(draws.energy.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = -cfg.beta * draws.energy[i] - draws.log_weight[i];
  const auto lme = log_mean_exp(y);
  z.unbiased_log = lme.mean;
  z.unbiased_sigma = lme.sigma;
  z.degenerate = !std::isfinite(lme.mean);

  if (opt.reference_samples > 0 &&
      static_cast<std::int64_t>(cfg.branches) * cfg.steps <= opt.reference_budget) {
    const auto ref = reference_log_z(cfg, opt.reference_samples, stream_seed(seed, 2), opt.reference_budget);
    z.reference_log = ref.mean;
    z.reference_sigma = ref.sigma;
  }
  return z;
}

/// −β Î_1 − KL with its standard error (fields jensen_lower, jensen_sigma).
inline ZEstimate jensen_lower_bound(const StarConfig& cfg, const ZOptions& opt, std::uint64_t seed) {
  return estimate_log_z(cfg, opt, seed);
}

/// log of the importance-sampled Z_T (fields unbiased_log, unbiased_sigma).
inline ZEstimate unbiased_log_z(const StarConfig& cfg, const ZOptions& opt, std::uint64_t seed) {
  return estimate_log_z(cfg, opt, seed);
}

struct TheoremShape {
  int d = 1;
  double beta = 1.0;
  int branches = 1;
  double horizon = 1.0;
  double value = 0.0;
  bool in_hypothesis = true;  // false: extrapolated outside the theorem's range
  bool degenerate = false;    // the log factor vanishes or turns negative
};

/// Growth shape of −log Z_T: β^{2/3} N^{5/3} T in d = 1 and
/// β^{1/2} N^{3/2} T^{1/2} log(βT) in d = 2, 3.
inline TheoremShape theorem_shape(int d, double beta, int branches, double horizon) {
  require_dimension(d);
  if (!(beta > 0.0) || branches < 1 || !(horizon > 0.0)) {
    throw std::invalid_argument("theorem_shape: need beta > 0, N >= 1, T > 0");
  }
  TheoremShape s{d, beta, branches, horizon, 0.0, true, false};
  const double n = branches;
  if (d == 1) {
    s.value = std::pow(beta, 2.0 / 3.0) * std::pow(n, 5.0 / 3.0) * horizon;
    s.in_hypothesis = beta >= 1.0 && horizon >= 1.0;
  } else {
    const double lg = std::log(beta * horizon);
    s.value = std::sqrt(beta) * std::pow(n, 1.5) * std::sqrt(horizon) * lg;
    s.in_hypothesis = beta >= 1.0 && horizon >= 1.0 && horizon <= n;
    s.degenerate = !(lg > 0.0);
  }
  return s;
}

/// Least-squares constant C in  −jensen_lower ≈ C · shape  over points
/// with positive shape. Returns nullopt when no such point exists.
inline std::optional<double> fit_shape_constant(std::span<const std::pair<double, double>> shape_and_neg_bound) {
  double sxy = 0.0, sxx = 0.0;
  for (const auto& [s, y] : shape_and_neg_bound) {
    if (!(s > 0.0)) continue;
    sxy += s * y;
    sxx += s * s;
  }
  if (!(sxx > 0.0)) return std::nullopt;
  return sxy / sxx;
}

}  // namespace starpoly
