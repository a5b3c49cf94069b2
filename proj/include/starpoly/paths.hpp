#pragma once

// Discretized Brownian branches, tilted branches and their likelihood ratios.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "starpoly/geometry.hpp"
#include "starpoly/rng.hpp"

namespace starpoly {

/// Uniform discretization of [0, T] into n steps.
struct TimeGrid {
  double horizon = 1.0;
  int steps = 1;

  TimeGrid() = default;
  TimeGrid(double T, int n) : horizon(T), steps(n) {
    if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("TimeGrid: horizon must be > 0");
    if (n < 1) throw std::invalid_argument("TimeGrid: step count must be >= 1");
  }

  double dt() const noexcept { return horizon / steps; }
  /// t_i; t_n is exactly T.
  double time(int i) const noexcept { return i == steps ? horizon : horizon * i / steps; }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

/// Global model parameters: dimension, branch count, horizon, penalty, steps.
struct StarConfig {
  int d = 1;
  int branches = 1;
  double horizon = 1.0;
  double beta = 0.0;
  int steps = 1;

  void validate() const {
    require_dimension(d);
    if (branches < 1) throw std::invalid_argument("StarConfig: branch count must be >= 1");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("StarConfig: beta must be >= 0");
    (void)TimeGrid(horizon, steps);
  }

  TimeGrid grid() const { return TimeGrid(horizon, steps); }
};

/// One branch: n + 1 positions on a grid, position 0 at the origin.
struct BranchPath {
  TimeGrid grid;
  int dim = 1;
  std::vector<Point> positions;

  BranchPath() = default;
  BranchPath(TimeGrid g, int d) : grid(g), dim(d), positions(static_cast<std::size_t>(g.steps) + 1, Point{}) {
    require_dimension(d);
  }

  int steps() const noexcept { return grid.steps; }
  Point increment(int i) const noexcept { return positions[i + 1] - positions[i]; }
};

/// N branches sharing one grid.
struct StarEnsemble {
  StarConfig config;
  std::vector<BranchPath> branches;

  int branch_count() const noexcept { return static_cast<int>(branches.size()); }
  double dt() const noexcept { return config.grid().dt(); }
};

/// Drift magnitude parameters plus one unit direction per branch.
///
/// The accumulated drift of branch k at t_j is θ_k κ t_j^{α+1}; the
/// per-step shift is the exact difference of that curve between grid
/// points, which stays finite for α < 0 where the drift rate itself
/// blows up at t = 0.
struct TiltParams {
  double kappa = 0.0;
  double alpha = 0.0;
  TimeGrid grid;
  std::vector<Point> directions;
  std::vector<double> step_drift;  // κ (t_{i+1}^{α+1} - t_i^{α+1})

  int branch_count() const noexcept { return static_cast<int>(directions.size()); }

  Point mean_shift(int branch, int step) const noexcept {
    return step_drift[static_cast<std::size_t>(step)] * directions[static_cast<std::size_t>(branch)];
  }

  /// θ_k κ t_j^{α+1}
  Point accumulated_drift(int branch, int step) const noexcept {
    return (kappa * std::pow(grid.time(step), alpha + 1.0)) * directions[static_cast<std::size_t>(branch)];
  }
};

/// Drift scale and exponent used for the partition-function lower bound:
/// d = 1 → (β^{1/3} N^{1/3}, 0), d = 2, 3 → (β^{1/4} N^{1/4}, -1/4).
struct DriftParams {
  double kappa;
  double alpha;
};

inline DriftParams drift_params_for(int d, double beta, int branches) {
  require_dimension(d);
  if (!(beta >= 0.0)) throw std::invalid_argument("drift_params_for: beta must be >= 0");
  if (branches < 1) throw std::invalid_argument("drift_params_for: branch count must be >= 1");
  const double bn = beta * branches;
  if (d == 1) return {std::cbrt(bn), 0.0};
  return {std::pow(bn, 0.25), -0.25};
}

inline TiltParams make_tilt(const TimeGrid& grid, double kappa, double alpha, std::vector<Point> directions) {
  if (!(alpha > -1.0)) throw std::invalid_argument("make_tilt: alpha must exceed -1");
  for (const auto& dir : directions) {
    if (std::abs(norm(dir) - 1.0) > 1e-12) throw std::invalid_argument("make_tilt: directions must be unit vectors");
  }
  TiltParams tilt;
  tilt.kappa = kappa;
  tilt.alpha = alpha;
  tilt.grid = grid;
  tilt.directions = std::move(directions);
  tilt.step_drift.resize(static_cast<std::size_t>(grid.steps));
  double prev = 0.0;
  for (int i = 0; i < grid.steps; ++i) {
    const double next = std::pow(grid.time(i + 1), alpha + 1.0);
    tilt.step_drift[static_cast<std::size_t>(i)] = kappa * (next - prev);
    prev = next;
  }
  return tilt;
}

/// Directions θ_k for a configuration: +1 for every branch in d = 1,
/// i.i.d. uniform on the sphere otherwise.
inline std::vector<Point> sample_directions(const StarConfig& cfg, Rng& rng) {
  std::vector<Point> dirs;
  dirs.reserve(static_cast<std::size_t>(cfg.branches));
  for (int k = 0; k < cfg.branches; ++k) dirs.push_back(uniform_sphere_direction(cfg.d, rng));
  return dirs;
}

/// Tilt with the drift parameters of `drift_params_for` and freshly drawn directions.
inline TiltParams default_tilt(const StarConfig& cfg, Rng& rng) {
  const auto p = drift_params_for(cfg.d, cfg.beta, cfg.branches);
  return make_tilt(cfg.grid(), p.kappa, p.alpha, sample_directions(cfg, rng));
}

namespace detail {

inline Point gaussian_point(int d, double sd, Rng& rng) {
  Point p{};
  for (int a = 0; a < d; ++a) p[static_cast<std::size_t>(a)] = sd * rng.normal();
  return p;
}

}  // namespace detail

inline BranchPath sample_brownian(const TimeGrid& grid, int d, Rng& rng) {
  BranchPath path(grid, d);
  const double sd = std::sqrt(grid.dt());
  for (int i = 0; i < grid.steps; ++i) {
    path.positions[i + 1] = path.positions[i] + detail::gaussian_point(d, sd, rng);
  }
  return path;
}

/// Branch `branch` under the tilted law: increment i ~ N(μ_{k,i}, Δt I_d).
inline BranchPath sample_tilted(const TimeGrid& grid, int d, const TiltParams& tilt, int branch, Rng& rng) {
  if (!(tilt.grid == grid)) throw std::invalid_argument("sample_tilted: tilt grid mismatch");
  if (branch < 0 || branch >= tilt.branch_count()) throw std::out_of_range("sample_tilted: branch index");
  BranchPath path(grid, d);
  const double sd = std::sqrt(grid.dt());
  for (int i = 0; i < grid.steps; ++i) {
    path.positions[i + 1] = path.positions[i] + tilt.mean_shift(branch, i) + detail::gaussian_point(d, sd, rng);
  }
  return path;
}

inline StarEnsemble sample_star(const StarConfig& cfg, Rng& rng) {
  cfg.validate();
  StarEnsemble ens{cfg, {}};
  ens.branches.reserve(static_cast<std::size_t>(cfg.branches));
  const auto grid = cfg.grid();
  for (int k = 0; k < cfg.branches; ++k) ens.branches.push_back(sample_brownian(grid, cfg.d, rng));
  return ens;
}

inline StarEnsemble sample_tilted_star(const StarConfig& cfg, const TiltParams& tilt, Rng& rng) {
  cfg.validate();
  if (tilt.branch_count() != cfg.branches) throw std::invalid_argument("sample_tilted_star: tilt branch count mismatch");
  StarEnsemble ens{cfg, {}};
  ens.branches.reserve(static_cast<std::size_t>(cfg.branches));
  const auto grid = cfg.grid();
  for (int k = 0; k < cfg.branches; ++k) ens.branches.push_back(sample_tilted(grid, cfg.d, tilt, k, rng));
  return ens;
}

/// Redraws positions strictly between i and j in place from the Wiener
/// conditional law given every other position. For j == n the segment
/// (i, n] is a free Brownian continuation from position i.
inline void bridge_resample_inplace(BranchPath& path, int i, int j, Rng& rng) {
  const int n = path.steps();
  if (i < 0 || j > n || i >= j) {
    throw std::out_of_range("bridge_resample: need 0 <= i < j <= n, got i=" + std::to_string(i) +
                            " j=" + std::to_string(j));
  }
  const double dt = path.grid.dt();
  const double sd = std::sqrt(dt);
  if (j == n) {
    for (int m = i + 1; m <= n; ++m) {
      path.positions[m] = path.positions[m - 1] + detail::gaussian_point(path.dim, sd, rng);
    }
    return;
  }
  const Point target = path.positions[j];
  for (int m = i + 1; m < j; ++m) {
    // X_m | X_{m-1}, X_j on a uniform grid.
    const double remaining = static_cast<double>(j - m + 1);
    const double w = 1.0 / remaining;
    const double var = dt * (remaining - 1.0) / remaining;
    const Point mean = path.positions[m - 1] + w * (target - path.positions[m - 1]);
    path.positions[m] = mean + detail::gaussian_point(path.dim, std::sqrt(var), rng);
  }
}

inline BranchPath bridge_resample(BranchPath path, int i, int j, Rng& rng) {
  bridge_resample_inplace(path, i, j, rng);
  return path;
}

/// log dP^λ/dP for one branch of the discrete model:
///   Σ_i [ μ_{k,i}·ΔX_i / Δt − |μ_{k,i}|² / (2Δt) ]
inline double log_likelihood_ratio(const BranchPath& path, const TiltParams& tilt, int branch) {
  if (!(path.grid == tilt.grid)) throw std::invalid_argument("log_likelihood_ratio: grid mismatch");
  if (branch < 0 || branch >= tilt.branch_count()) throw std::out_of_range("log_likelihood_ratio: branch index");
  const double dt = path.grid.dt();
  double acc = 0.0;
  for (int i = 0; i < path.steps(); ++i) {
    const Point mu = tilt.mean_shift(branch, i);
    acc += dot(mu, path.increment(i)) / dt - dot(mu, mu) / (2.0 * dt);
  }
  return acc;
}

inline double log_likelihood_ratio(const StarEnsemble& ens, const TiltParams& tilt) {
  double acc = 0.0;
  for (int k = 0; k < ens.branch_count(); ++k) acc += log_likelihood_ratio(ens.branches[k], tilt, k);
  return acc;
}

/// KL divergence of the tilted discrete law from the driftless one,
/// summed over the tilt's branches: Σ_k Σ_i |μ_{k,i}|² / (2Δt).
inline double kl_tilted(const TiltParams& tilt) {
  const double dt = tilt.grid.dt();
  double per_branch = 0.0;
  for (double s : tilt.step_drift) per_branch += s * s;
  return tilt.branch_count() * per_branch / (2.0 * dt);
}

/// Continuum limit of `kl_tilted`: N κ² (α+1)² T^{2α+1} / (2(2α+1)).
inline double kl_continuum(double kappa, double alpha, int branches, double horizon) {
  if (!(alpha > -0.5)) throw std::invalid_argument("kl_continuum: alpha must exceed -1/2");
  const double a1 = alpha + 1.0;
  return branches * kappa * kappa * a1 * a1 * std::pow(horizon, 2.0 * alpha + 1.0) / (2.0 * (2.0 * alpha + 1.0));
}

}  // namespace starpoly
