#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "starpoly/analysis.hpp"
#include "starpoly/energy.hpp"

using namespace starpoly;

namespace {

StarEnsemble random_star(int d, int N, double T, int n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_star(StarConfig{d, N, T, 1.0, n}, rng);
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(Energy, SinglePointIsBallVolumeTimesDtSquared) {
  for (int d = 1; d <= 3; ++d) {
    StarEnsemble ens{StarConfig{d, 1, 0.5, 1.0, 1}, {BranchPath(TimeGrid(0.5, 1), d)}};
    EXPECT_DOUBLE_EQ(energy_brute(ens).total, 0.25 * ball_volume(d));
    EXPECT_DOUBLE_EQ(energy_cells(ens).total, 0.25 * ball_volume(d));
  }
}

TEST(Energy, MatchesGridQuadrature) {
  const auto ens = random_star(2, 3, 1.0, 12, 21);
  const double exact = energy_brute(ens).total;
  const double grid = oracle::grid_energy_2d(ens, 0.01);
  EXPECT_LT(rel(grid, exact), 0.005) << grid << " vs " << exact;
}

TEST(Energy, CellsEqualsBrute) {
  for (int d = 1; d <= 3; ++d) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto ens = random_star(d, 1 + trial % 6, 0.5 + trial, 16 + 20 * trial, 1000 * d + trial);
      const auto a = energy_brute(ens), b = energy_cells(ens);
      EXPECT_LT(rel(b.total, a.total), 1e-9);
      EXPECT_LT(rel(b.self_part, a.self_part), 1e-9);
      EXPECT_NEAR(b.cross_part, a.cross_part, 1e-9 * a.total);
      EXPECT_NEAR(a.total, a.self_part + a.cross_part, 1e-12 * a.total);
    }
  }
}

TEST(Energy, DiagonalOnlyWhenPointsAreFarApart) {
  for (int d = 1; d <= 3; ++d) {
    const TimeGrid g(2.0, 5);
    StarEnsemble ens{StarConfig{d, 2, 2.0, 1.0, 5}, {BranchPath(g, d), BranchPath(g, d)}};
    for (int i = 0; i <= 5; ++i) {
      ens.branches[0].positions[i] = {2.5 * i, 0, 0};
      ens.branches[1].positions[i] = {-2.5 * i, 0, 0};
    }
    // The two branches share the origin, so that pair overlaps fully.
    const double dt = 0.4;
    const double expected = dt * dt * (10 * ball_volume(d) + 2 * ball_volume(d));
    EXPECT_NEAR(energy_brute(ens).total, expected, 1e-12);
    EXPECT_NEAR(energy_cells(ens).total, expected, 1e-12);
  }
}

TEST(Energy, DiagonalFloor) {
  // The a = b terms alone give N n Δt² V_d.
  for (int d = 1; d <= 3; ++d) {
    const auto ens = random_star(d, 4, 3.0, 30, 5 + d);
    const double dt = ens.dt();
    EXPECT_GE(energy_cells(ens).total, 4 * 30 * dt * dt * ball_volume(d) * (1 - 1e-12));
  }
}

TEST(Energy, IdenticalBranchesQuadruple) {
  const auto one = random_star(3, 1, 2.0, 40, 77);
  auto two = one;
  two.config.branches = 2;
  two.branches.push_back(one.branches[0]);
  const auto a = energy_cells(one), b = energy_cells(two);
  EXPECT_NEAR(b.total, 4.0 * a.total, 1e-10 * b.total);
  EXPECT_NEAR(b.self_part, 2.0 * a.self_part, 1e-10 * b.total);
}

TEST(Energy, TranslationAndRotationInvariance) {
  for (int d = 2; d <= 3; ++d) {
    const auto ens = random_star(d, 3, 2.0, 50, 31 + d);
    const double e = energy_cells(ens).total;
    auto moved = ens;
    const double b = d == 3 ? 1.1 : 0.0;
    for (auto& br : moved.branches) {
      for (auto& p : br.positions) {
        p = oracle::rotate(p, 0.7, b) + Point{3.3, -17.25, d == 3 ? 0.5 : 0.0};
      }
    }
    EXPECT_LT(rel(energy_cells(moved).total, e), 1e-10);
    EXPECT_LT(rel(energy_brute(moved).total, e), 1e-10);
  }
}

TEST(Energy, MonotoneInBranchSet) {
  const auto ens = random_star(2, 5, 2.0, 30, 8);
  double prev = 0.0;
  for (int m = 1; m <= 5; ++m) {
    std::vector<int> ids;
    for (int k = 0; k < m; ++k) ids.push_back(k);
    const double e = energy_cells(select_branches(ens, ids)).total;
    EXPECT_GE(e, prev);
    prev = e;
  }
}

TEST(Energy, SegmentEnergyGivesExactDelta) {
  for (int d = 1; d <= 3; ++d) {
    Rng rng(40 + d);
    auto ens = random_star(d, 3, 2.0, 120, 50 + d);
    const auto index = CellIndex::build(ens);
    const auto before = energy_brute(ens);
    // Replace occupation points 10..69 of branch 1 (60 points, local index path)
    // and 5..9 of branch 2 (small path).
    for (auto [k, lo, hi] : {std::tuple{1, 10, 69}, std::tuple{2, 5, 9}}) {
      auto changed = ens;
      bridge_resample_inplace(changed.branches[k], lo - 1, hi + 1, rng);
      const std::span<const Point> fresh(changed.branches[k].positions.data() + lo, hi - lo + 1);
      const std::span<const Point> stale(ens.branches[k].positions.data() + lo, hi - lo + 1);
      const auto delta =
          segment_energy(ens, index, k, lo, fresh) - segment_energy(ens, index, k, lo, stale);
      const auto after = energy_brute(changed);
      EXPECT_NEAR(before.total + delta.total, after.total, 1e-9 * after.total);
      EXPECT_NEAR(before.self_part + delta.self_part, after.self_part, 1e-9 * after.total);
      EXPECT_NEAR(before.cross_part + delta.cross_part, after.cross_part, 1e-9 * after.total);
    }
  }
}

TEST(Energy, CellIndexBookkeeping) {
  const auto ens = random_star(3, 4, 5.0, 64, 99);
  auto idx = CellIndex::build(ens);
  EXPECT_EQ(idx.size(), 4u * 64u);
  std::size_t seen = 0;
  idx.for_each_cell([&](const auto&, const auto& bucket) { seen += bucket.size(); });
  EXPECT_EQ(seen, idx.size());
  // Every point within distance 2 of a query shows up as a candidate.
  const Point q{0.4, -0.3, 0.9};
  std::size_t close = 0, found = 0;
  for (int k = 0; k < 4; ++k) {
    for (int i = 0; i < 64; ++i) close += distance(q, ens.branches[k].positions[i]) < 2.0;
  }
  idx.for_each_candidate(q, [&](PointRef r) { found += distance(q, ens.branches[r.branch].positions[r.step]) < 2.0; });
  EXPECT_EQ(found, close);
  idx.remove({0, 0}, ens.branches[0].positions[0]);
  EXPECT_EQ(idx.size(), 4u * 64u - 1u);
}

TEST(Energy, ConfinementLowerBound) {
  EXPECT_DOUBLE_EQ(confinement_lower_bound(1, 1, 1.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(confinement_lower_bound(2, 2, 1.0, 0.0), 4.0 * std::numbers::pi);
  EXPECT_DOUBLE_EQ(confinement_lower_bound(3, 1, 2.0, 1.0), 4.0 * (4.0 * std::numbers::pi / 3.0) / 8.0);
  EXPECT_THROW(confinement_lower_bound(1, 0, 1.0, 1.0), std::invalid_argument);

  // Rejection-sample ensembles whose branches stay inside B_r(0) and check
  // the bound on every subset size.
  for (int d = 1; d <= 3; ++d) {
    Rng rng(600 + d);
    const StarConfig cfg{d, 3, 1.0, 1.0, 16};
    const double r = 1.5;
    int kept = 0;
    while (kept < 10) {
      const auto ens = sample_star(cfg, rng);
      bool inside = true;
      for (const auto& b : ens.branches) inside = inside && branch_supremum(b) <= r;
      if (!inside) continue;
      ++kept;
      for (int m = 1; m <= 3; ++m) {
        std::vector<int> ids;
        for (int k = 0; k < m; ++k) ids.push_back(k);
        EXPECT_GE(energy_cells(select_branches(ens, ids)).total, confinement_lower_bound(d, m, 1.0, r));
      }
    }
  }
}

TEST(Energy, PenalizationWeight) {
  EXPECT_EQ(penalization_weight(0.0, 3.0), 1.0);
  EXPECT_EQ(penalization_weight(5.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(penalization_weight(2.0, 0.5), std::exp(-1.0));
  EXPECT_THROW(penalization_weight(-1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(penalization_weight(1.0, -1.0), std::invalid_argument);
}
