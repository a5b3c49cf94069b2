#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "starpoly/geometry.hpp"
#include "starpoly/verifier.hpp"

using namespace starpoly;

TEST(Geometry, BallVolumes) {
  EXPECT_DOUBLE_EQ(ball_volume(1), 2.0);
  EXPECT_DOUBLE_EQ(ball_volume(2), std::numbers::pi);
  EXPECT_DOUBLE_EQ(ball_volume(3), 4.0 * std::numbers::pi / 3.0);
  EXPECT_THROW(ball_volume(0), std::invalid_argument);
  EXPECT_THROW(ball_volume(4), std::invalid_argument);
}

TEST(Geometry, OverlapExamples) {
  EXPECT_DOUBLE_EQ(overlap_volume(1, 0.5), 1.5);
  EXPECT_NEAR(overlap_volume(2, 1.0), 2.0 * std::acos(0.5) - 0.5 * std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(overlap_volume(2, 1.0), 1.2283696986087567, 1e-12);
  EXPECT_NEAR(overlap_volume(3, 1.0), 5.0 * std::numbers::pi / 12.0, 1e-12);
  for (int d = 1; d <= 3; ++d) {
    EXPECT_EQ(overlap_volume(d, 0.0), ball_volume(d));
    EXPECT_EQ(overlap_volume(d, 2.0), 0.0);
    EXPECT_EQ(overlap_volume(d, 3.7), 0.0);
    EXPECT_THROW(overlap_volume(d, -0.1), std::invalid_argument);
  }
  EXPECT_THROW(overlap_volume(4, 1.0), std::invalid_argument);
}

TEST(Geometry, OverlapMatchesLatticeOracle) {
  for (int d = 1; d <= 3; ++d) {
    for (double r : {0.3, 1.0, 1.7}) {
      const double oracle = oracle::lattice_lens_volume(d, {0, 0, 0}, {r, 0, 0}, 1e6, 7 + d);
      EXPECT_NEAR(overlap_volume(d, r), oracle, 2e-3) << "d=" << d << " r=" << r;
    }
  }
}

TEST(Geometry, OverlapDependsOnlyOnDistance) {
  // Centers in general position, volume computed by the oracle in the
  // original frame, compared with the closed form at |a - b|.
  Rng rng(11);
  for (int d = 2; d <= 3; ++d) {
    for (int trial = 0; trial < 3; ++trial) {
      Point a{}, b{};
      for (int i = 0; i < d; ++i) {
        a[i] = 2.0 * rng.uniform() - 1.0;
        b[i] = a[i] + 1.1 * (rng.uniform() - 0.5);
      }
      const double oracle = oracle::lattice_lens_volume(d, a, b, 1e6, 100 + trial);
      EXPECT_NEAR(overlap_volume(d, distance(a, b)), oracle, 2e-3);
      EXPECT_DOUBLE_EQ(overlap_volume(d, distance(a, b)), overlap_volume(d, distance(b, a)));
    }
  }
}

TEST(Geometry, OverlapMonotoneAndContinuous) {
  for (int d = 1; d <= 3; ++d) {
    double prev = overlap_volume(d, 0.0);
    for (int i = 1; i <= 1000; ++i) {
      const double v = overlap_volume(d, 2.0 * i / 1000.0);
      EXPECT_LE(v, prev) << "d=" << d << " i=" << i;
      EXPECT_LT(prev - v, 0.01);
      prev = v;
    }
    EXPECT_LT(overlap_volume(d, 2.0 - 1e-9), 1e-8);
  }
}

TEST(Geometry, SphereDirections) {
  Rng rng(3);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(uniform_sphere_direction(1, rng)[0], 1.0);
  int plus = 0;
  for (int i = 0; i < 1000; ++i) plus += uniform_sphere_direction(1, rng, true)[0] > 0;
  EXPECT_GT(plus, 400);
  EXPECT_LT(plus, 600);

  for (int d = 2; d <= 3; ++d) {
    Point mean{};
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const auto u = uniform_sphere_direction(d, rng);
      EXPECT_NEAR(norm(u), 1.0, 1e-12);
      mean = mean + (1.0 / n) * u;
    }
    // Each coordinate has variance 1/d.
    for (int k = 0; k < d; ++k) EXPECT_LT(std::abs(mean[k]), 3.0 * std::sqrt(1.0 / d / n) + 1e-12);
  }
}

TEST(Geometry, CosineBoundOnGrid) {
  const auto r = check_cosine_bound();
  EXPECT_TRUE(r.pass);
  EXPECT_GE(r.computed, -1e-12);
  // At θ = π the bound is attained: 1 − cos π = 2 = (2/π²)π².
  const double c = 2.0 / (std::numbers::pi * std::numbers::pi);
  EXPECT_NEAR(1.0 - std::cos(std::numbers::pi), c * std::numbers::pi * std::numbers::pi, 1e-15);
}
