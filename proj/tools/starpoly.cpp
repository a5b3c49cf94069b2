// starpoly: command line driver for the star-polymer simulator.
//
//   starpoly simulate     --config FILE [--seed U64] [--out DIR] [--chains K] [--quiet]
//   starpoly zbound       --config FILE [--seed U64] [--out DIR] [--quiet]
//   starpoly verify       [--out DIR] [--quiet]
//   starpoly radius-scan  --config FILE [--seed U64] [--out DIR] [--chains K] [--quiet]
//   starpoly report       --config FILE [--records FILE] [--out DIR] [--quiet]

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "starpoly/experiment.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> chains;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool needs_config, bool with_chains) {
  auto* opt = cmd->add_option("--config", f.config, "Configuration file");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Master seed (overrides the config)");
  cmd->add_option("--out", f.out, "Output directory (overrides the config)");
  if (with_chains) cmd->add_option("--chains", f.chains, "Number of chains (overrides the config)")->check(CLI::PositiveNumber);
  cmd->add_flag("--quiet", f.quiet, "Suppress progress output");
}

starpoly::ExperimentConfig resolve(const CommonFlags& f) {
  auto cfg = starpoly::load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (f.chains) cfg.chains = *f.chains;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly self-avoiding star polymer simulator"};
  app.require_subcommand(1);

  CommonFlags sim, zb, ver, scan, rep;
  auto* c_sim = app.add_subcommand("simulate", "Run MCMC chains and write records.csv / summary.json");
  add_common(c_sim, sim, true, true);
  auto* c_zb = app.add_subcommand("zbound", "Estimate log Z_T bounds over the configured sweep");
  add_common(c_zb, zb, true, false);
  auto* c_ver = app.add_subcommand("verify", "Run the quadrature verifier sweep and write verify.csv");
  add_common(c_ver, ver, false, false);
  bool inject_failure = false;
  c_ver->add_flag("--inject-failure", inject_failure, "Test hook: verify a deliberately violated inequality")
      ->group("");
  auto* c_scan = app.add_subcommand("radius-scan", "Simulate over sweep.T and fit the radius exponent");
  add_common(c_scan, scan, true, true);
  auto* c_rep = app.add_subcommand("report", "Summarize an existing records.csv");
  add_common(c_rep, rep, true, false);
  std::string records;
  c_rep->add_option("--records", records, "Records CSV (default: <out>/records.csv)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_sim) {
      const auto cfg = resolve(sim);
      const auto res = starpoly::cmd_simulate(cfg, cfg.output_dir);
      if (!sim.quiet) std::cout << res.summary.dump(2) << '\n';
    } else if (*c_zb) {
      const auto cfg = resolve(zb);
      const auto out = starpoly::cmd_zbound(cfg, cfg.output_dir);
      if (!zb.quiet) std::cout << out.dump(2) << '\n';
    } else if (*c_ver) {
      starpoly::VerifierOptions opt;
      opt.inject_failure = inject_failure;
      const std::string dir = ver.out.empty() ? "out" : ver.out;
      const auto rows = starpoly::cmd_verify(dir, opt);
      if (!ver.quiet) std::cout << starpoly::verifier_csv(rows);
      if (!starpoly::all_pass(rows)) {
        if (!ver.quiet) std::cerr << "verify: at least one verdict failed\n";
        return 1;
      }
    } else if (*c_scan) {
      const auto cfg = resolve(scan);
      const auto s = starpoly::cmd_radius_scan(cfg, cfg.output_dir);
      if (!scan.quiet) std::cout << starpoly::radius_scan_json(s).dump(2) << '\n';
    } else if (*c_rep) {
      const auto cfg = resolve(rep);
      const auto path = records.empty() ? cfg.output_dir / "records.csv" : std::filesystem::path(records);
      const auto r = starpoly::cmd_report(cfg, path, cfg.output_dir);
      if (!rep.quiet) std::cout << r.dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
