#pragma once

// Metropolis-Hastings over discretized stars targeting
//   Q_T(dω) ∝ exp(−β ∫ L^2) P_T(dω),
// and a weighted-sampling oracle for small instances.
//
// Every proposal redraws a segment of one branch from the Wiener
// conditional law given the retained points, so the proposal kernel is
// reversible for P_T and the acceptance probability is min(1, e^{−βΔE}).

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "starpoly/analysis.hpp"
#include "starpoly/energy.hpp"
#include "starpoly/paths.hpp"
#include "starpoly/rng.hpp"

namespace starpoly {

enum class MoveKind : int { SegmentBridge = 0, TailRedraw = 1, BranchRedraw = 2 };
inline constexpr std::size_t kMoveKinds = 3;

inline const char* move_kind_name(MoveKind k) {
  switch (k) {
    case MoveKind::SegmentBridge: return "bridge";
    case MoveKind::TailRedraw: return "tail";
    case MoveKind::BranchRedraw: return "branch";
  }
  return "?";
}

/// Redraw positions strictly between `first` and `last` of branch `branch`
/// (or (first, n] when last == n).
struct Move {
  MoveKind kind;
  int branch;
  int first;
  int last;
};

/// Proposal probabilities per move kind; bridge lengths are geometric
/// with mean max(2, n * mean_segment_fraction).
struct MoveMix {
  double bridge = 0.7;
  double tail = 0.2;
  double branch = 0.1;
  double mean_segment_fraction = 1.0 / 8.0;

  void validate() const {
    if (bridge < 0.0 || tail < 0.0 || branch < 0.0 || !(bridge + tail + branch > 0.0)) {
      throw std::invalid_argument("MoveMix: weights must be >= 0 with positive sum");
    }
    if (!(mean_segment_fraction > 0.0)) throw std::invalid_argument("MoveMix: mean segment fraction must be > 0");
  }
};

struct MoveStats {
  std::array<std::int64_t, kMoveKinds> proposed{};
  std::array<std::int64_t, kMoveKinds> accepted{};

  double rate(MoveKind k) const noexcept {
    const auto i = static_cast<std::size_t>(k);
    return proposed[i] ? static_cast<double>(accepted[i]) / static_cast<double>(proposed[i]) : 0.0;
  }
};

enum class ChainInit {
  Driftless,  // independent Brownian branches
  Spread,     // Brownian branches displaced along θ_k by κ t^{α+1}
};

/// One observable snapshot of a chain.
struct ChainRecord {
  std::int64_t step = 0;
  EnergyBreakdown energy;
  double radius = 0.0;
  std::vector<double> suprema;
  std::array<double, kMoveKinds> acceptance{};
};

/// Metropolis test with u uniform on [0, 1): accept iff u < exp(−β ΔE).
inline bool metropolis_accept(double beta, double delta_energy, double u) noexcept {
  const double log_p = -beta * delta_energy;
  if (log_p >= 0.0) return true;
  return u < std::exp(log_p);
}

class ChainState {
 public:
  ChainState(const StarConfig& cfg, MoveMix mix, Rng rng, ChainInit init = ChainInit::Driftless)
      : mix_(mix), rng_(std::move(rng)), index_(cfg.d) {
    cfg.validate();
    mix_.validate();
    ensemble_ = sample_star(cfg, rng_);
    if (init == ChainInit::Spread) {
      const auto p = drift_params_for(cfg.d, cfg.beta, cfg.branches);
      const auto tilt = make_tilt(cfg.grid(), p.kappa, p.alpha, sample_directions(cfg, rng_));
      for (int k = 0; k < cfg.branches; ++k) {
        auto& pos = ensemble_.branches[k].positions;
        for (int i = 0; i <= cfg.steps; ++i) pos[i] = pos[i] + tilt.accumulated_drift(k, i);
      }
    }
    index_ = CellIndex::build(ensemble_);
    energy_ = detail::energy_with_index(ensemble_, index_);
    suprema_.resize(static_cast<std::size_t>(cfg.branches));
    for (int k = 0; k < cfg.branches; ++k) suprema_[k] = branch_supremum(ensemble_.branches[k]);
  }

  const StarEnsemble& ensemble() const noexcept { return ensemble_; }
  const EnergyBreakdown& energy() const noexcept { return energy_; }
  const MoveStats& stats() const noexcept { return stats_; }
  const std::vector<double>& suprema() const noexcept { return suprema_; }
  double radius() const { return radius_from_suprema(suprema_).radius; }
  std::int64_t steps_taken() const noexcept { return steps_; }

  /// Draws a move from the mix.
  Move propose() {
    const auto& cfg = ensemble_.config;
    const int n = cfg.steps;
    const int k = static_cast<int>(rng_.uniform_int(0, cfg.branches - 1));
    const double total = mix_.bridge + mix_.tail + mix_.branch;
    const double u = rng_.uniform() * total;
    if (u < mix_.bridge) {
      const double mean = std::max(2.0, n * mix_.mean_segment_fraction);
      const double q = 1.0 / mean;
      // Geometric on {1, 2, ...} by inversion.
      const double g = std::floor(std::log1p(-rng_.uniform()) / std::log1p(-q)) + 1.0;
      const int len = static_cast<int>(std::min<double>(g, n));
      const int first = static_cast<int>(rng_.uniform_int(0, n - len));
      return {MoveKind::SegmentBridge, k, first, first + len};
    }
    if (u < mix_.bridge + mix_.tail) {
      return {MoveKind::TailRedraw, k, static_cast<int>(rng_.uniform_int(0, n - 1)), n};
    }
    return {MoveKind::BranchRedraw, k, 0, n};
  }

  /// Proposes, applies the Metropolis test and updates the cached state.
  /// Returns true on acceptance.
  bool mh_step() { return apply(propose()); }

  /// Executes a specific move; exposed for tests.
  bool apply(const Move& mv) {
    const auto& cfg = ensemble_.config;
    const int n = cfg.steps;
    if (mv.branch < 0 || mv.branch >= cfg.branches || mv.first < 0 || mv.last > n || mv.first >= mv.last) {
      throw std::out_of_range("ChainState::apply: move indices out of range");
    }
    ++steps_;
    const auto kind = static_cast<std::size_t>(mv.kind);
    ++stats_.proposed[kind];

    auto& path = ensemble_.branches[mv.branch];
    // Changed positions: (first, last) for bridges, (first, n] for tails.
    const int changed_lo = mv.first + 1;
    const int changed_hi = mv.last == n ? n : mv.last - 1;
    backup_.assign(path.positions.begin() + changed_lo, path.positions.begin() + changed_hi + 1);
    bridge_resample_inplace(path, mv.first, mv.last, rng_);

    // Occupation points are 0..n-1.
    const int occ_hi = std::min(changed_hi, n - 1);
    EnergyBreakdown delta;
    if (changed_lo <= occ_hi) {
      const auto count = static_cast<std::size_t>(occ_hi - changed_lo + 1);
      const std::span<const Point> fresh(path.positions.data() + changed_lo, count);
      const std::span<const Point> stale(backup_.data(), count);
      delta = segment_energy(ensemble_, index_, mv.branch, changed_lo, fresh) -
              segment_energy(ensemble_, index_, mv.branch, changed_lo, stale);
    }

    const double u = rng_.uniform();
    if (!metropolis_accept(cfg.beta, delta.total, u)) {
      std::copy(backup_.begin(), backup_.end(), path.positions.begin() + changed_lo);
      return false;
    }
    ++stats_.accepted[kind];
    for (int i = changed_lo; i <= occ_hi; ++i) {
      index_.remove({mv.branch, i}, backup_[static_cast<std::size_t>(i - changed_lo)]);
      index_.insert({mv.branch, i}, path.positions[i]);
    }
    energy_ += delta;
    suprema_[mv.branch] = branch_supremum(path);
    if (check_interval_ > 0 && ++accepted_since_check_ >= check_interval_) verify_cache();
    return true;
  }

  /// Recomputes the energy from scratch; throws if the cache has drifted
  /// more than `tolerance` relative, otherwise resynchronizes it.
  void verify_cache(double tolerance = 1e-9) {
    accepted_since_check_ = 0;
    const auto fresh = energy_cells(ensemble_);
    const double scale = std::max(std::abs(fresh.total), 1e-300);
    if (std::abs(fresh.total - energy_.total) / scale > tolerance) {
      throw std::logic_error("ChainState: cached energy drifted from recomputed value");
    }
    energy_ = fresh;
  }

  void set_check_interval(std::int64_t accepted_moves) noexcept { check_interval_ = accepted_moves; }

  ChainRecord record() const {
    ChainRecord r;
    r.step = steps_;
    r.energy = energy_;
    r.suprema = suprema_;
    r.radius = radius_from_suprema(suprema_).radius;
    for (std::size_t i = 0; i < kMoveKinds; ++i) r.acceptance[i] = stats_.rate(static_cast<MoveKind>(i));
    return r;
  }

 private:
  StarEnsemble ensemble_;
  MoveMix mix_;
  Rng rng_;
  CellIndex index_;
  EnergyBreakdown energy_;
  std::vector<double> suprema_;
  std::vector<Point> backup_;
  MoveStats stats_;
  std::int64_t steps_ = 0;
  std::int64_t check_interval_ = 1000;
  std::int64_t accepted_since_check_ = 0;
};

struct ChainSchedule {
  std::int64_t steps = 1000;
  std::int64_t burn_in = 0;
  std::int64_t thinning = 1;

  void validate() const {
    if (steps < 1 || burn_in < 0 || thinning < 1 || burn_in >= steps) {
      throw std::invalid_argument("ChainSchedule: need steps >= 1, 0 <= burn_in < steps, thinning >= 1");
    }
  }

  /// (steps − burn_in) / thinning, rounded down.
  std::int64_t record_count() const noexcept { return (steps - burn_in) / thinning; }
};

/// Runs one chain and emits a record after step s whenever s > burn_in and
/// (s − burn_in) is a multiple of the thinning.
inline void run_chain(const StarConfig& cfg, const MoveMix& mix, const ChainSchedule& sched, Rng rng,
                      const std::function<void(const ChainRecord&)>& sink, ChainInit init = ChainInit::Driftless) {
  sched.validate();
  ChainState chain(cfg, mix, std::move(rng), init);
  for (std::int64_t s = 1; s <= sched.steps; ++s) {
    chain.mh_step();
    if (s > sched.burn_in && (s - sched.burn_in) % sched.thinning == 0) sink(chain.record());
  }
}

inline std::vector<ChainRecord> run_chain(const StarConfig& cfg, const MoveMix& mix, const ChainSchedule& sched,
                                          Rng rng, ChainInit init = ChainInit::Driftless) {
  std::vector<ChainRecord> out;
  out.reserve(static_cast<std::size_t>(sched.record_count()));
  run_chain(cfg, mix, sched, std::move(rng), [&](const ChainRecord& r) { out.push_back(r); }, init);
  return out;
}

// ---------------------------------------------------------------------------
// Weighted oracle

/// Observable of one ensemble evaluated by the oracle.
using Observable = std::function<double(const StarEnsemble&, const EnergyBreakdown&, const RadiusSample&)>;

struct WeightedEstimates {
  std::vector<MeanEstimate> values;  // one per observable, under Q_T
  MeanEstimate mean_weight;          // unbiased estimate of Z_T
  double ess = 0.0;
  std::int64_t samples = 0;
};

inline constexpr std::int64_t kDefaultNaiveBudget = 4096;

/// Draws driftless ensembles, weights each by exp(−βE) and returns the
/// self-normalized estimates Σ w f / Σ w.
inline WeightedEstimates naive_weighted(const StarConfig& cfg, std::int64_t n_samples, Rng& rng,
                                        std::span<const Observable> observables,
                                        std::int64_t budget = kDefaultNaiveBudget) {
  cfg.validate();
  if (static_cast<std::int64_t>(cfg.branches) * cfg.steps > budget) {
    throw std::invalid_argument("naive_weighted: N*n = " + std::to_string(cfg.branches * cfg.steps) +
                                " exceeds budget " + std::to_string(budget));
  }
  if (n_samples < 2) throw std::invalid_argument("naive_weighted: need at least 2 samples");
  const auto m = observables.size();
  double sw = 0.0, sw2 = 0.0;
  std::vector<double> swf(m, 0.0), sw2f(m, 0.0), sw2f2(m, 0.0);
  for (std::int64_t s = 0; s < n_samples; ++s) {
    const auto ens = sample_star(cfg, rng);
    const auto e = energy_cells(ens);
    const auto rad = radius_median(ens);
    const double w = std::exp(-cfg.beta * e.total);
    sw += w;
    sw2 += w * w;
    for (std::size_t j = 0; j < m; ++j) {
      const double f = observables[j](ens, e, rad);
      swf[j] += w * f;
      sw2f[j] += w * w * f;
      sw2f2[j] += w * w * f * f;
    }
  }
  if (!(sw > 0.0)) throw std::domain_error("naive_weighted: all weights underflowed to zero");
  WeightedEstimates out;
  out.samples = n_samples;
  const double n = static_cast<double>(n_samples);
  const double mw = sw / n;
  out.mean_weight = {mw, std::sqrt(std::max(0.0, (sw2 / n - mw * mw) / (n - 1.0)))};
  out.ess = sw * sw / sw2;
  for (std::size_t j = 0; j < m; ++j) {
    const double mean = swf[j] / sw;
    const double var = sw2f2[j] - 2.0 * mean * sw2f[j] + mean * mean * sw2;
    out.values.push_back({mean, std::sqrt(std::max(0.0, var)) / sw});
  }
  return out;
}

}  // namespace starpoly
