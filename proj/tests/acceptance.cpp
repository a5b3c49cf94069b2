// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero when any blocking criterion fails. AC10 is an exploratory report
// and never blocks.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "starpoly/starpoly.hpp"

using namespace starpoly;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------

// Overlap volume against a shifted-lattice volume count, 3 decimals.
Outcome ac1() {
  constexpr double kTol = 5e-4;
  const double points[4] = {0, 1e6, 4e6, 8e6};
  double worst = 0.0;
  int bad = 0;
  for (int d = 1; d <= 3; ++d) {
    for (double r : {0.25, 0.5, 1.0, 1.5, 1.9}) {
      const double o = oracle::lattice_lens_volume(d, {0, 0, 0}, {r, 0, 0}, points[d], 1234 + d);
      const double diff = std::abs(overlap_volume(d, r) - o);
      worst = std::max(worst, diff);
      bad += diff >= kTol;
    }
    bad += overlap_volume(d, 0.0) != ball_volume(d);
    for (double r : {2.0, 2.5, 10.0}) bad += overlap_volume(d, r) != 0.0;
  }
  return {bad == 0, fmt("max |closed form - lattice| = %.2e (tol %.0e), exact at r=0 and r>=2", worst, kTol)};
}

// Cell-list energy equals the O(P^2) sum on random ensembles.
Outcome ac2() {
  constexpr double kTol = 1e-9;
  Rng rng(2024);
  double worst = 0.0;
  int count = 0;
  for (int d = 1; d <= 3; ++d) {
    for (int t = 0; t < 100; ++t) {
      const StarConfig cfg{d, static_cast<int>(rng.uniform_int(1, 8)), 0.5 + 9.5 * rng.uniform(), 1.0,
                           static_cast<int>(rng.uniform_int(1, 256))};
      const auto ens = sample_star(cfg, rng);
      const double a = energy_brute(ens).total, b = energy_cells(ens).total;
      worst = std::max(worst, std::abs(a - b) / a);
      ++count;
    }
  }
  return {worst < kTol, fmt("%d ensembles, max relative difference %.2e (tol %.0e)", count, worst, kTol)};
}

// Energy of the confined branches dominates m^2 T^2 V_d / (r+1)^d.
Outcome ac3() {
  const double T = 2.0, r = 1.5;
  int violations = 0, tested = 0;
  double tightest = 1e300;
  for (int d = 1; d <= 3; ++d) {
    Rng rng(300 + d);
    const StarConfig cfg{d, 4, T, 1.0, 64};
    int kept = 0;
    while (kept < 50) {
      const auto ens = sample_star(cfg, rng);
      std::vector<int> inside;
      for (int k = 0; k < cfg.branches; ++k) {
        if (branch_supremum(ens.branches[k]) <= r) inside.push_back(k);
      }
      if (inside.empty()) continue;
      ++kept;
      ++tested;
      const int m = static_cast<int>(inside.size());
      const double e = energy_cells(select_branches(ens, inside)).total;
      const double bound = confinement_lower_bound(d, m, T, r);
      violations += e < bound;
      tightest = std::min(tightest, e / bound);
    }
  }
  return {violations == 0, fmt("%d confined ensembles (T=%g, r=%g), %d violations, min energy/bound %.3f", tested, T,
                               r, violations, tightest)};
}

// Chernoff bound for the Bernoulli tail.
Outcome ac4() {
  int violations = 0, checks = 0;
  for (int n = 1; n <= 60; ++n) {
    for (int j = 1; j <= 9; ++j) {
      const double p = 0.05 * j;
      const double b = bernoulli_ld_bound(n, p, 0.5);
      violations += b < exact_binomial_tail(n, p, 0.5);
      violations += b > std::pow(4.0 * p, 0.5 * n) * (1.0 + 1e-12);
      checks += 2;
    }
  }
  return {violations == 0, fmt("%d checks (n<=60, p=0.05..0.45, alpha=1/2), %d violations", checks, violations)};
}

// E[1/W] = 1 and E[log W] = KL under the tilted law.
Outcome ac5() {
  const int samples = 100000;
  bool ok = true;
  std::string detail;
  const int cases[3][3] = {{1, 1, 1}, {2, 1, 4}, {3, 1, 4}};
  for (const auto& c : cases) {
    const StarConfig cfg{c[0], c[2], 1.0, static_cast<double>(c[1]), 256};
    Rng rng(stream_seed(55, static_cast<std::uint64_t>(c[0])));
    std::vector<double> inv, logw;
    double kl = 0.0;
    for (int s = 0; s < samples; ++s) {
      const auto tilt = default_tilt(cfg, rng);
      kl = kl_tilted(tilt);
      const double l = log_likelihood_ratio(sample_tilted_star(cfg, tilt, rng), tilt);
      logw.push_back(l);
      inv.push_back(std::exp(-l));
    }
    const auto a = mean_and_error(inv), b = mean_and_error(logw);
    const double za = (a.mean - 1.0) / a.sigma, zb = (b.mean - kl) / b.sigma;
    ok = ok && std::abs(za) <= 3.0 && std::abs(zb) <= 3.0;
    detail += fmt("(d=%d,N=%d): E[1/W]=%.4f z=%+.2f, E[logW]=%.4f KL=%.4f z=%+.2f; ", c[0], c[2], a.mean, za, b.mean,
                  kl, zb);
  }
  return {ok, detail + "tol 3 sigma, 1e5 samples, n=256"};
}

// Discrete KL against its continuum limit.
Outcome ac6() {
  const auto p = drift_params_for(2, 1.0, 4);
  const double limit = kl_continuum(p.kappa, p.alpha, 4, 1.0);
  const auto tilt = make_tilt(TimeGrid(1.0, 1 << 14), p.kappa, p.alpha, std::vector<Point>(4, Point{1, 0, 0}));
  const double discrete = kl_tilted(tilt);
  const double rel = std::abs(discrete / limit - 1.0);
  return {std::abs(limit - 4.5) < 1e-12 && rel < 0.01,
          fmt("limit %.12g (expected 4.5), n=2^14 value %.8f, relative gap %.2e (tol 1e-2)", limit, discrete, rel)};
}

// MCMC against the naive weighted oracle, and the beta = 0 supremum law.
Outcome ac7() {
  bool ok = true;
  std::string detail;
  const std::vector<Observable> obs{
      [](const StarEnsemble&, const EnergyBreakdown& e, const RadiusSample&) { return e.total; },
      [](const StarEnsemble&, const EnergyBreakdown&, const RadiusSample& r) { return r.radius; }};
  for (double beta : {0.1, 0.5}) {
    const StarConfig cfg{1, 2, 1.0, beta, 8};
    Rng orng(stream_seed(77, static_cast<std::uint64_t>(beta * 10)));
    const auto w = naive_weighted(cfg, 1000000, orng, obs);
    std::vector<double> e_chain, r_chain;
    double var_e = 0.0, var_r = 0.0;
    const int chains = 4;
    for (int c = 0; c < chains; ++c) {
      std::vector<double> e, r;
      for (const auto& rec : run_chain(cfg, MoveMix{}, ChainSchedule{400000, 20000, 1},
                                       Rng(stream_seed(78, static_cast<std::uint64_t>(c))))) {
        e.push_back(rec.energy.total);
        r.push_back(rec.radius);
      }
      var_e += std::pow(batch_means(e).sigma / chains, 2);
      var_r += std::pow(batch_means(r).sigma / chains, 2);
      e_chain.insert(e_chain.end(), e.begin(), e.end());
      r_chain.insert(r_chain.end(), r.begin(), r.end());
    }
    const auto me = mean_and_error(e_chain).mean, mr = mean_and_error(r_chain).mean;
    const double ze = (me - w.values[0].mean) / std::hypot(std::sqrt(var_e), w.values[0].sigma);
    const double zr = (mr - w.values[1].mean) / std::hypot(std::sqrt(var_r), w.values[1].sigma);
    ok = ok && std::abs(ze) <= 3.0 && std::abs(zr) <= 3.0;
    detail += fmt("beta=%g: energy %.5f vs %.5f z=%+.2f, R %.5f vs %.5f z=%+.2f; ", beta, me, w.values[0].mean, ze, mr,
                  w.values[1].mean, zr);
  }
  // beta = 0: thinned chain suprema against independent driftless branches.
  const StarConfig free_cfg{1, 2, 1.0, 0.0, 8};
  std::vector<double> chain_sups, direct_sups;
  for (const auto& rec : run_chain(free_cfg, MoveMix{}, ChainSchedule{500000, 1000, 50}, Rng(79))) {
    chain_sups.insert(chain_sups.end(), rec.suprema.begin(), rec.suprema.end());
  }
  Rng drng(80);
  while (direct_sups.size() < chain_sups.size()) {
    direct_sups.push_back(branch_supremum(sample_brownian(free_cfg.grid(), 1, drng)));
  }
  const auto ks = ks_two_sample(chain_sups, direct_sups);
  ok = ok && ks.p_value >= 0.01;
  detail += fmt("beta=0 KS D=%.4f p=%.3f (need p>=0.01); tol 3 combined sigma", ks.statistic, ks.p_value);
  return {ok, detail};
}

// Jensen bound never exceeds the importance-sampled value beyond 3 sigma.
Outcome ac8() {
  const double pts[9][4] = {{1, 1, 2, 1}, {1, 2, 4, 2}, {1, 4, 2, 4}, {2, 1, 4, 1}, {2, 2, 4, 2},
                            {2, 4, 8, 2}, {3, 1, 4, 1}, {3, 2, 4, 2}, {3, 4, 8, 2}};
  int bad = 0;
  double worst = -1e300;
  for (int i = 0; i < 9; ++i) {
    const StarConfig cfg{static_cast<int>(pts[i][0]), static_cast<int>(pts[i][2]), pts[i][3], pts[i][1], 64};
    ZOptions opt;
    opt.samples = 5000;
    const auto z = estimate_log_z(cfg, opt, stream_seed(88, static_cast<std::uint64_t>(i)));
    bad += !z.jensen_consistent(3.0);
    worst = std::max(worst, (z.jensen_lower - z.unbiased_log) / z.combined_sigma());
  }
  return {bad == 0, fmt("9-point (d,beta,N,T) sweep, %d violations, max (jensen - unbiased)/sigma = %+.2f (tol 3)",
                        bad, worst)};
}

// Quadrature verifier sweep.
Outcome ac9() {
  const auto rows = run_verifier();
  bool gauss = true, eta = true, cosine = true;
  std::string trends;
  bool trend_ok = true;
  for (const auto& r : rows) {
    if (r.inequality == "gauss_identity") gauss = gauss && r.pass && std::abs(r.ratio - 1.0) < 1e-8;
    if (r.inequality == "eta_integral") eta = eta && r.pass && std::isfinite(r.computed);
    if (r.inequality == "cosine_bound") cosine = cosine && r.pass;
    if (r.inequality == "master_trend") {
      trend_ok = trend_ok && r.computed <= 0.05;
      trends += fmt("%s slope %.4f%s; ", r.params.c_str(), r.computed, r.computed <= 0.05 ? "" : " (exceeds 0.05)");
    }
  }
  return {gauss && eta && cosine && trend_ok,
          fmt("gauss %s, eta %s, cosine %s; ", gauss ? "ok" : "FAIL", eta ? "ok" : "FAIL", cosine ? "ok" : "FAIL") +
              trends + "trend tol 0.05"};
}

// Radius scaling report (exploratory).
Outcome ac10() {
  const StarConfig base{2, 8, 1.0, 4.0, 1024};
  const ChainSchedule sched{20000, 5000, 10};
  // Short bridges and rare long redraws keep the cost per step affordable
  // at n = 1024, where every point has thousands of neighbours at small T.
  const MoveMix mix{0.9, 0.08, 0.02, 1.0 / 32.0};
  std::vector<std::pair<double, double>> pts;
  std::string per_t;
  for (double T : {1.0, 2.0, 4.0, 8.0}) {
    StarConfig cfg = base;
    cfg.horizon = T;
    std::vector<double> radii;
    double var = 0.0;
    const int chains = 2;
    for (int c = 0; c < chains; ++c) {
      std::vector<double> r;
      for (const auto& rec : run_chain(cfg, mix, sched, Rng(stream_seed(1010 + static_cast<std::uint64_t>(T), c)),
                                       ChainInit::Spread)) {
        r.push_back(rec.radius);
      }
      var += std::pow(batch_means(r).sigma / chains, 2);
      radii.insert(radii.end(), r.begin(), r.end());
    }
    const double mean = mean_and_error(radii).mean;
    pts.emplace_back(T, mean);
    const auto band = predicted_radius_band(2, base.beta, base.branches, T);
    per_t += fmt(" T=%g R=%.3f+-%.3f band[%.2f,%.2f]%s", T, mean, std::sqrt(var), band.low, band.high,
                 band.hypotheses_hold ? "" : "*");
  }
  const auto fit = exponent_fit(pts);
  const std::string detail = fmt("slope %.4f, 95%% CI [%.4f, %.4f], predicted 3/4; R_T:", fit.slope,
                                 fit.slope - fit.half_width, fit.slope + fit.half_width) + per_t;
  return {true, detail + " (* outside theorem hypotheses; c=C=1)"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* name;
    bool blocking;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"AC1", "overlap kernel vs volume oracle", true, ac1},
      {"AC2", "cell-list energy vs brute force", true, ac2},
      {"AC3", "confinement energy lower bound", true, ac3},
      {"AC4", "Bernoulli large-deviation bound", true, ac4},
      {"AC5", "likelihood-ratio identities", true, ac5},
      {"AC6", "discrete KL vs continuum limit", true, ac6},
      {"AC7", "MCMC vs weighted oracle, beta=0 KS", true, ac7},
      {"AC8", "Jensen bound consistency", true, ac8},
      {"AC9", "quadrature verifier sweep", true, ac9},
      {"AC10", "radius scaling report (non-blocking)", false, ac10},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* verdict = !c.blocking ? "REPORT" : (o.pass ? "PASS" : "FAIL");
    std::printf("%-4s %-6s %s: %s [%.1fs]\n", c.id, verdict, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (c.blocking && !o.pass) ++failed;
  }
  std::printf("%d blocking criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
