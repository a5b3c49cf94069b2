#pragma once

// Occupation-measure energy ∫ L(x)^2 dx of a discretized star.
//
// Position X^k_i occupies [t_i, t_{i+1}), so the occupation measure is
// L(x) = Δt Σ_{k, i<n} 1{|x - X^k_i| < 1} and
//   ∫ L^2 dx = Δt^2 Σ_{(a,b) ordered} |B_1(a) ∩ B_1(b)|
// exactly, with the sum running over all occupation points including a = b.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "starpoly/geometry.hpp"
#include "starpoly/paths.hpp"

namespace starpoly {

/// ∫ L^2 split into same-branch (self) and distinct-branch (cross) pairs.
struct EnergyBreakdown {
  double total = 0.0;
  double self_part = 0.0;
  double cross_part = 0.0;

  EnergyBreakdown& operator+=(const EnergyBreakdown& o) noexcept {
    total += o.total;
    self_part += o.self_part;
    cross_part += o.cross_part;
    return *this;
  }
  EnergyBreakdown& operator-=(const EnergyBreakdown& o) noexcept {
    total -= o.total;
    self_part -= o.self_part;
    cross_part -= o.cross_part;
    return *this;
  }
  friend EnergyBreakdown operator+(EnergyBreakdown a, const EnergyBreakdown& b) noexcept { return a += b; }
  friend EnergyBreakdown operator-(EnergyBreakdown a, const EnergyBreakdown& b) noexcept { return a -= b; }

  EnergyBreakdown scaled(double s) const noexcept { return {total * s, self_part * s, cross_part * s}; }

  void add_pair(bool same_branch, double v) noexcept {
    total += v;
    (same_branch ? self_part : cross_part) += v;
  }
};

/// Identifies occupation point X^branch_step.
struct PointRef {
  int branch;
  int step;
  friend bool operator==(const PointRef&, const PointRef&) = default;
};

/// Spatial hash with cell edge 2 (the kernel range). Two points closer
/// than 2 always sit in cells whose integer coordinates differ by at most
/// one per axis.
class CellIndex {
 public:
  static constexpr double kCellEdge = 2.0;

  struct Key {
    std::int64_t x, y, z;
    friend bool operator==(const Key&, const Key&) = default;
  };

  explicit CellIndex(int d) : dim_(d) { require_dimension(d); }

  /// Index of every occupation point of `ens`.
  static CellIndex build(const StarEnsemble& ens) {
    CellIndex idx(ens.config.d);
    const int n = ens.config.steps;
    idx.buckets_.reserve(static_cast<std::size_t>(ens.branch_count() * n));
    for (int k = 0; k < ens.branch_count(); ++k) {
      for (int i = 0; i < n; ++i) idx.insert({k, i}, ens.branches[k].positions[i]);
    }
    return idx;
  }

  static Key key_of(const Point& p) noexcept {
    return {static_cast<std::int64_t>(std::floor(p[0] / kCellEdge)),
            static_cast<std::int64_t>(std::floor(p[1] / kCellEdge)),
            static_cast<std::int64_t>(std::floor(p[2] / kCellEdge))};
  }

  void insert(PointRef ref, const Point& p) {
    buckets_[key_of(p)].push_back(ref);
    ++size_;
  }

  /// Removes `ref`, which must have been inserted at position `p`.
  void remove(PointRef ref, const Point& p) {
    auto it = buckets_.find(key_of(p));
    if (it == buckets_.end()) throw std::logic_error("CellIndex::remove: cell not found");
    auto& bucket = it->second;
    auto pos = std::find(bucket.begin(), bucket.end(), ref);
    if (pos == bucket.end()) throw std::logic_error("CellIndex::remove: point not found");
    *pos = bucket.back();
    bucket.pop_back();
    if (bucket.empty()) buckets_.erase(it);
    --size_;
  }

  /// Calls fn(ref) for every indexed point in the cells adjacent to p.
  /// A superset of the points within distance 2 of p.
  template <class Fn>
  void for_each_candidate(const Point& p, Fn&& fn) const {
    const Key c = key_of(p);
    const int ry = dim_ >= 2 ? 1 : 0;
    const int rz = dim_ >= 3 ? 1 : 0;
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -ry; dy <= ry; ++dy) {
        for (std::int64_t dz = -rz; dz <= rz; ++dz) {
          auto it = buckets_.find(Key{c.x + dx, c.y + dy, c.z + dz});
          if (it == buckets_.end()) continue;
          for (const PointRef& r : it->second) fn(r);
        }
      }
    }
  }

  std::size_t size() const noexcept { return size_; }
  std::size_t cell_count() const noexcept { return buckets_.size(); }

  /// Calls fn(key, refs) for every nonempty cell.
  template <class Fn>
  void for_each_cell(Fn&& fn) const {
    for (const auto& [key, refs] : buckets_) fn(key, refs);
  }

 private:
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      std::uint64_t h = splitmix64(static_cast<std::uint64_t>(k.x));
      h = splitmix64(h ^ static_cast<std::uint64_t>(k.y));
      h = splitmix64(h ^ static_cast<std::uint64_t>(k.z));
      return static_cast<std::size_t>(h);
    }
  };

  int dim_;
  std::size_t size_ = 0;
  std::unordered_map<Key, std::vector<PointRef>, KeyHash> buckets_;
};

/// Reference O(P^2) evaluation over all occupation-point pairs.
inline EnergyBreakdown energy_brute(const StarEnsemble& ens) {
  const int d = ens.config.d;
  const int n = ens.config.steps;
  const int nb = ens.branch_count();
  const double dt2 = ens.dt() * ens.dt();
  const double diag = ball_volume(d);
  EnergyBreakdown e;
  for (int k = 0; k < nb; ++k) {
    const auto& pk = ens.branches[k].positions;
    for (int i = 0; i < n; ++i) {
      e.add_pair(true, diag);
      for (int j = i + 1; j < n; ++j) e.add_pair(true, 2.0 * detail::overlap_volume_unchecked(d, distance(pk[i], pk[j])));
      for (int l = k + 1; l < nb; ++l) {
        const auto& pl = ens.branches[l].positions;
        for (int j = 0; j < n; ++j) e.add_pair(false, 2.0 * detail::overlap_volume_unchecked(d, distance(pk[i], pl[j])));
      }
    }
  }
  return e.scaled(dt2);
}

namespace detail {

inline long linear_id(PointRef r, int n) noexcept { return static_cast<long>(r.branch) * n + r.step; }

inline EnergyBreakdown energy_with_index(const StarEnsemble& ens, const CellIndex& index) {
  const int d = ens.config.d;
  const int n = ens.config.steps;
  const double diag = ball_volume(d);
  EnergyBreakdown e;
  for (int k = 0; k < ens.branch_count(); ++k) {
    for (int i = 0; i < n; ++i) {
      const Point& a = ens.branches[k].positions[i];
      const long ida = linear_id({k, i}, n);
      e.add_pair(true, diag);
      index.for_each_candidate(a, [&](PointRef r) {
        if (linear_id(r, n) <= ida) return;
        const double dist = distance(a, ens.branches[r.branch].positions[r.step]);
        if (dist < 2.0) e.add_pair(r.branch == k, 2.0 * overlap_volume_unchecked(d, dist));
      });
    }
  }
  return e.scaled(ens.dt() * ens.dt());
}

}  // namespace detail

/// Cell-list evaluation; same value as `energy_brute`, cost proportional
/// to the number of point pairs closer than 2.
inline EnergyBreakdown energy_cells(const StarEnsemble& ens) {
  return detail::energy_with_index(ens, CellIndex::build(ens));
}

/// Pair energy involving a contiguous run of occupation points of one branch.
///
/// The points (branch, first..last) are taken at `segment` instead of the
/// positions stored in `ens`; every other point is read from `ens` and must
/// be present in `index` at its stored position. Returns
///   Δt^2 [ 2 Σ_{a∈S, b∉S} K(a,b) + Σ_{a,b∈S} K(a,b) ],
/// so the energy change of replacing S is
///   segment_energy(new) − segment_energy(old).
inline EnergyBreakdown segment_energy(const StarEnsemble& ens, const CellIndex& index, int branch, int first,
                                      std::span<const Point> segment) {
  const int d = ens.config.d;
  const int last = first + static_cast<int>(segment.size()) - 1;
  EnergyBreakdown e;
  if (segment.empty()) return e;

  auto in_segment = [&](PointRef r) { return r.branch == branch && r.step >= first && r.step <= last; };
  for (const Point& a : segment) {
    index.for_each_candidate(a, [&](PointRef r) {
      if (in_segment(r)) return;
      const double dist = distance(a, ens.branches[r.branch].positions[r.step]);
      if (dist < 2.0) e.add_pair(r.branch == branch, 2.0 * detail::overlap_volume_unchecked(d, dist));
    });
  }

  // Pairs inside the segment.
  const double diag = ball_volume(d);
  const auto m = segment.size();
  if (m <= 48) {
    for (std::size_t i = 0; i < m; ++i) {
      e.add_pair(true, diag);
      for (std::size_t j = i + 1; j < m; ++j) {
        e.add_pair(true, 2.0 * detail::overlap_volume_unchecked(d, distance(segment[i], segment[j])));
      }
    }
  } else {
    CellIndex local(d);
    for (std::size_t i = 0; i < m; ++i) local.insert({0, static_cast<int>(i)}, segment[i]);
    for (std::size_t i = 0; i < m; ++i) {
      e.add_pair(true, diag);
      local.for_each_candidate(segment[i], [&](PointRef r) {
        if (static_cast<std::size_t>(r.step) <= i) return;
        const double dist = distance(segment[i], segment[static_cast<std::size_t>(r.step)]);
        if (dist < 2.0) e.add_pair(true, 2.0 * detail::overlap_volume_unchecked(d, dist));
      });
    }
  }
  const double dt = ens.dt();
  return e.scaled(dt * dt);
}

/// Ensemble restricted to the listed branches.
inline StarEnsemble select_branches(const StarEnsemble& ens, std::span<const int> ids) {
  StarEnsemble out{ens.config, {}};
  out.config.branches = static_cast<int>(ids.size());
  for (int id : ids) out.branches.push_back(ens.branches.at(static_cast<std::size_t>(id)));
  return out;
}

/// exp(-βE)
inline double penalization_weight(double energy, double beta) {
  if (!(energy >= 0.0) || !(beta >= 0.0)) throw std::invalid_argument("penalization_weight: need E >= 0, beta >= 0");
  return std::exp(-beta * energy);
}

/// Minimum of ∫ f^2 over f >= 0 supported in B_{r+1}(0) with ∫ f = m T V_d,
/// i.e. m^2 T^2 V_d / (r+1)^d. Any ensemble of m branches staying inside
/// B_r(0) has at least this much energy.
inline double confinement_lower_bound(int d, int confined, double horizon, double radius) {
  const double vd = ball_volume(d);
  if (confined < 1) throw std::invalid_argument("confinement_lower_bound: need m >= 1");
  if (!(radius >= 0.0)) throw std::invalid_argument("confinement_lower_bound: need r >= 0");
  if (!(horizon > 0.0)) throw std::invalid_argument("confinement_lower_bound: need T > 0");
  const double mt = confined * horizon;
  return mt * mt * vd / std::pow(radius + 1.0, d);
}

}  // namespace starpoly
