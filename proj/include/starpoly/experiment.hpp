#pragma once

// Experiment orchestration behind the `starpoly` command line tool:
// configuration files, record CSVs, JSON summaries, the run manifest and
// the radius-scan plot.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "starpoly/analysis.hpp"
#include "starpoly/paths.hpp"
#include "starpoly/sampler.hpp"
#include "starpoly/verifier.hpp"
#include "starpoly/zbound.hpp"

namespace starpoly {

inline constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Formatting and digests

/// Shortest round-trip-safe decimal: 17 significant digits.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Configuration

/// Flat `key = value` configuration with namespaced keys. Lists are comma
/// separated; `#` starts a comment.
struct ExperimentConfig {
  StarConfig model;
  ChainSchedule schedule{2000, 200, 1};
  MoveMix mix;
  ChainInit init = ChainInit::Driftless;
  int chains = 1;
  int threads = 1;

  std::int64_t z_samples = 10000;
  bool resample_theta = true;
  std::int64_t z_reference_samples = 0;

  std::vector<double> sweep_T, sweep_beta;
  std::vector<int> sweep_N;

  std::optional<double> r1, r2;
  double c_low = 1.0, c_high = 1.0;

  std::uint64_t seed = 0;
  fs::path output_dir = "out";

  void validate() const {
    model.validate();
    schedule.validate();
    mix.validate();
    if (chains < 1) throw std::invalid_argument("config: sampler.chains must be >= 1");
    if (threads < 1) throw std::invalid_argument("config: sampler.threads must be >= 1");
    if (z_samples < 2) throw std::invalid_argument("config: zbound.n_samples must be >= 2");
    for (double t : sweep_T) if (!(t > 0.0)) throw std::invalid_argument("config: sweep.T values must be > 0");
    for (double b : sweep_beta) if (!(b >= 0.0)) throw std::invalid_argument("config: sweep.beta values must be >= 0");
    for (int n : sweep_N) if (n < 1) throw std::invalid_argument("config: sweep.N values must be >= 1");
    if (!(c_low > 0.0) || !(c_high > 0.0)) throw std::invalid_argument("config: report constants must be > 0");
  }

  json to_json() const {
    json j;
    j["model"] = {{"d", model.d}, {"N", model.branches}, {"T", model.horizon}, {"beta", model.beta}, {"n", model.steps}};
    j["sampler"] = {{"steps", schedule.steps},
                    {"burn_in", schedule.burn_in},
                    {"thinning", schedule.thinning},
                    {"chains", chains},
                    {"threads", threads},
                    {"init", init == ChainInit::Spread ? "spread" : "driftless"},
                    {"mix", {{"bridge", mix.bridge}, {"tail", mix.tail}, {"branch", mix.branch},
                             {"segment_fraction", mix.mean_segment_fraction}}}};
    j["zbound"] = {{"n_samples", z_samples}, {"resample_theta", resample_theta},
                   {"reference_samples", z_reference_samples}};
    j["sweep"] = {{"T", sweep_T}, {"beta", sweep_beta}, {"N", sweep_N}};
    j["analysis"] = {{"r1", r1 ? json(*r1) : json(nullptr)}, {"r2", r2 ? json(*r2) : json(nullptr)}};
    j["report"] = {{"c_low", c_low}, {"c_high", c_high}};
    j["seed"] = seed;
    return j;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
  }
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " expects an integer, got '" + v + "'");
  }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos, 0);
    if (pos != v.size() || v.starts_with('-')) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " expects an unsigned 64-bit integer, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: " + key + " expects true/false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

/// Parses configuration text. Unknown keys, duplicate keys and a missing
/// seed or model block are errors.
inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw std::invalid_argument("config: duplicate key " + key);

    using namespace detail;
    if (key == "model.d") c.model.d = static_cast<int>(parse_int(key, val));
    else if (key == "model.N") c.model.branches = static_cast<int>(parse_int(key, val));
    else if (key == "model.T") c.model.horizon = parse_double(key, val);
    else if (key == "model.beta") c.model.beta = parse_double(key, val);
    else if (key == "model.n") c.model.steps = static_cast<int>(parse_int(key, val));
    else if (key == "sampler.steps") c.schedule.steps = parse_int(key, val);
    else if (key == "sampler.burn_in") c.schedule.burn_in = parse_int(key, val);
    else if (key == "sampler.thinning") c.schedule.thinning = parse_int(key, val);
    else if (key == "sampler.chains") c.chains = static_cast<int>(parse_int(key, val));
    else if (key == "sampler.threads") c.threads = static_cast<int>(parse_int(key, val));
    else if (key == "sampler.mix.bridge") c.mix.bridge = parse_double(key, val);
    else if (key == "sampler.mix.tail") c.mix.tail = parse_double(key, val);
    else if (key == "sampler.mix.branch") c.mix.branch = parse_double(key, val);
    else if (key == "sampler.mix.segment_fraction") c.mix.mean_segment_fraction = parse_double(key, val);
    else if (key == "sampler.init") {
      if (val == "driftless") c.init = ChainInit::Driftless;
      else if (val == "spread") c.init = ChainInit::Spread;
      else throw std::invalid_argument("config: sampler.init must be driftless or spread");
    }
    else if (key == "zbound.n_samples") c.z_samples = parse_int(key, val);
    else if (key == "zbound.resample_theta") c.resample_theta = parse_bool(key, val);
    else if (key == "zbound.reference_samples") c.z_reference_samples = parse_int(key, val);
    else if (key == "sweep.T") for (const auto& s : split_list(val)) c.sweep_T.push_back(parse_double(key, s));
    else if (key == "sweep.beta") for (const auto& s : split_list(val)) c.sweep_beta.push_back(parse_double(key, s));
    else if (key == "sweep.N") for (const auto& s : split_list(val)) c.sweep_N.push_back(static_cast<int>(parse_int(key, s)));
    else if (key == "analysis.r1") c.r1 = parse_double(key, val);
    else if (key == "analysis.r2") c.r2 = parse_double(key, val);
    else if (key == "report.c_low") c.c_low = parse_double(key, val);
    else if (key == "report.c_high") c.c_high = parse_double(key, val);
    else if (key == "seed") c.seed = parse_u64(key, val);
    else if (key == "output.dir") c.output_dir = val;
    else throw std::invalid_argument("config: unknown key " + key);
  }
  for (const char* required : {"model.d", "model.N", "model.T", "model.beta", "model.n", "seed"}) {
    if (!seen.count(required)) throw std::invalid_argument(std::string("config: missing required key ") + required);
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const fs::path& path) { return parse_config(read_file(path)); }

// ---------------------------------------------------------------------------
// Output bookkeeping

/// Files written by one command, funneled through a single writer so every
/// file lands in the manifest with its digest.
class OutputWriter {
 public:
  explicit OutputWriter(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw std::runtime_error("cannot create output directory " + dir_.string());
  }

  void write(const std::string& name, const std::string& bytes) {
    std::lock_guard lock(mu_);
    const fs::path p = dir_ / name;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << bytes;
    if (!out) throw std::runtime_error("write failed for " + p.string());
    files_.push_back({{"name", name}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}});
  }

  const fs::path& dir() const noexcept { return dir_; }
  const json& files() const noexcept { return files_; }

  /// Writes manifest.json, which lists every file written so far.
  void write_manifest(const std::string& command, const ExperimentConfig& cfg, double wall_seconds,
                      const json& extra = json::object()) {
    json m;
    m["artifact"] = "starpoly";
    m["version"] = kVersion;
    m["command"] = command;
    m["config"] = cfg.to_json();
    m["wall_clock_seconds"] = wall_seconds;
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    m["files"] = files_;
    const fs::path p = dir_ / "manifest.json";
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << m.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  std::mutex mu_;
  json files_ = json::array();
};

// ---------------------------------------------------------------------------
// Records

inline std::string records_header(int branches) {
  std::string h = "chain,step,energy_total,energy_self,energy_cross,radius_median";
  for (int k = 1; k <= branches; ++k) h += ",sup_" + std::to_string(k);
  h += ",acc_bridge,acc_tail,acc_branch\n";
  return h;
}

inline void append_record_row(std::string& out, int chain, const ChainRecord& r) {
  out += std::to_string(chain);
  out += ',';
  out += std::to_string(r.step);
  for (double v : {r.energy.total, r.energy.self_part, r.energy.cross_part, r.radius}) {
    out += ',';
    out += fmt17(v);
  }
  for (double s : r.suprema) {
    out += ',';
    out += fmt17(s);
  }
  for (double a : r.acceptance) {
    out += ',';
    out += fmt17(a);
  }
  out += '\n';
}

/// Parses records CSV back into per-chain record lists.
inline std::map<int, std::vector<ChainRecord>> parse_records_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("records: empty file");
  const auto header = detail::split_list(line);
  if (header.size() < 9 || header[0] != "chain" || header[1] != "step") {
    throw std::invalid_argument("records: unexpected header");
  }
  const std::size_t branches = header.size() - 9;
  std::map<int, std::vector<ChainRecord>> out;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != header.size()) throw std::invalid_argument("records: row has wrong column count");
    ChainRecord r;
    const int chain = static_cast<int>(detail::parse_int("chain", f[0]));
    r.step = detail::parse_int("step", f[1]);
    r.energy = {detail::parse_double("energy_total", f[2]), detail::parse_double("energy_self", f[3]),
                detail::parse_double("energy_cross", f[4])};
    r.radius = detail::parse_double("radius_median", f[5]);
    for (std::size_t k = 0; k < branches; ++k) r.suprema.push_back(detail::parse_double("sup", f[6 + k]));
    for (std::size_t a = 0; a < kMoveKinds; ++a) r.acceptance[a] = detail::parse_double("acc", f[6 + branches + a]);
    out[chain].push_back(std::move(r));
  }
  return out;
}

/// Aggregate statistics over records of one or more chains. Per-chain
/// batch-means errors are combined as independent estimates.
inline json summarize_records(const std::vector<std::vector<ChainRecord>>& chains, double beta,
                              std::optional<double> r1, std::optional<double> r2) {
  std::vector<double> radii, energies;
  std::size_t count = 0;
  for (const auto& c : chains) count += c.size();
  if (count == 0) throw std::invalid_argument("summarize_records: no records");
  radii.reserve(count);
  energies.reserve(count);

  double energy_var = 0.0, radius_var = 0.0, weight_sum = 0.0;
  std::array<double, kMoveKinds> acc{};
  for (const auto& c : chains) {
    std::vector<double> e, r;
    for (const auto& rec : c) {
      e.push_back(rec.energy.total);
      r.push_back(rec.radius);
      weight_sum += std::exp(-beta * rec.energy.total);
    }
    const double share = static_cast<double>(c.size()) / static_cast<double>(count);
    energy_var += share * share * std::pow(batch_means(e).sigma, 2);
    radius_var += share * share * std::pow(batch_means(r).sigma, 2);
    for (std::size_t a = 0; a < kMoveKinds; ++a) acc[a] += c.back().acceptance[a] / static_cast<double>(chains.size());
    energies.insert(energies.end(), e.begin(), e.end());
    radii.insert(radii.end(), r.begin(), r.end());
  }
  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  auto sorted = radii;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(sorted.size() - 1)));
    return sorted[idx];
  };

  json s;
  s["records"] = count;
  s["chains"] = chains.size();
  s["mean_energy"] = mean(energies);
  s["mean_energy_sigma"] = std::sqrt(energy_var);
  s["mean_radius"] = mean(radii);
  s["mean_radius_sigma"] = std::sqrt(radius_var);
  s["mean_weight"] = weight_sum / static_cast<double>(count);
  s["radius_quantiles"] = {{"q10", quantile(0.1)}, {"q50", quantile(0.5)}, {"q90", quantile(0.9)}};
  s["acceptance"] = {{"bridge", acc[0]}, {"tail", acc[1]}, {"branch", acc[2]}};
  if (r1 || r2) {
    const double a = r1.value_or(0.0), b = r2.value_or(std::numeric_limits<double>::infinity());
    const auto rates = tail_event_rates(radii, a, b);
    json t;
    if (r1) {
      t["r1"] = *r1;
      t["q_below"] = rates.below.mean;
      t["q_below_sigma"] = rates.below.sigma;
    }
    if (r2) {
      t["r2"] = *r2;
      t["q_above"] = rates.above.mean;
      t["q_above_sigma"] = rates.above.sigma;
    }
    s["tail_rates"] = t;
  }
  return s;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateResult {
  std::vector<std::vector<ChainRecord>> records;  // per chain
  std::vector<std::uint64_t> chain_seeds;
  json summary;
};

/// Runs `cfg.chains` chains (at most `cfg.threads` at once). Chain c uses
/// the generator stream_seed(cfg.seed, c), so any chain can be rerun alone.
inline SimulateResult run_simulation(const ExperimentConfig& cfg) {
  cfg.validate();
  SimulateResult res;
  res.records.resize(static_cast<std::size_t>(cfg.chains));
  for (int c = 0; c < cfg.chains; ++c) res.chain_seeds.push_back(stream_seed(cfg.seed, static_cast<std::uint64_t>(c)));

  auto work = [&](int c) {
    res.records[static_cast<std::size_t>(c)] =
        run_chain(cfg.model, cfg.mix, cfg.schedule, Rng(res.chain_seeds[static_cast<std::size_t>(c)]), cfg.init);
  };
  const int threads = std::min(cfg.threads, cfg.chains);
  if (threads <= 1) {
    for (int c = 0; c < cfg.chains; ++c) work(c);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (int c = t; c < cfg.chains; c += threads) work(c);
      });
    }
    for (auto& th : pool) th.join();
  }
  res.summary = summarize_records(res.records, cfg.model.beta, cfg.r1, cfg.r2);
  return res;
}

inline std::string records_csv(const std::vector<std::vector<ChainRecord>>& chains, int branches) {
  std::string out = records_header(branches);
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (const auto& r : chains[c]) append_record_row(out, static_cast<int>(c), r);
  }
  return out;
}

/// simulate: records.csv, summary.json, manifest.json.
inline SimulateResult cmd_simulate(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  auto res = run_simulation(cfg);
  OutputWriter w(out_dir);

  json chain_info = json::array();
  std::string csv = records_header(cfg.model.branches);
  for (std::size_t c = 0; c < res.records.size(); ++c) {
    std::string rows;
    for (const auto& r : res.records[c]) append_record_row(rows, static_cast<int>(c), r);
    chain_info.push_back({{"chain", c}, {"seed", res.chain_seeds[c]}, {"records", res.records[c].size()},
                          {"rows_sha256", sha256_hex(rows)}});
    csv += rows;
  }
  w.write("records.csv", csv);

  json summary;
  summary["config"] = cfg.to_json();
  summary["summary"] = res.summary;
  w.write("summary.json", summary.dump(2) + "\n");
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  w.write_manifest("simulate", cfg, wall, {{"chains", chain_info}});
  return res;
}

// ---------------------------------------------------------------------------
// zbound

inline json zestimate_json(const StarConfig& model, const ZEstimate& z) {
  json j;
  j["config"] = {{"d", model.d}, {"N", model.branches}, {"T", model.horizon}, {"beta", model.beta}, {"n", model.steps}};
  j["tilt"] = {{"kappa", z.kappa}, {"alpha", z.alpha}, {"theta_resampled", z.theta_resampled}};
  j["n_samples"] = z.samples;
  j["kl"] = z.kl;
  j["mean_energy"] = z.energy.mean;
  j["mean_log_weight"] = z.log_weight.mean;
  j["jensen_lower"] = z.jensen_lower;
  j["unbiased_log"] = z.degenerate ? json(nullptr) : json(z.unbiased_log);
  j["reference_log"] = z.reference_log ? json(*z.reference_log) : json(nullptr);
  j["sigmas"] = {{"jensen_lower", z.jensen_sigma},
                 {"unbiased_log", z.unbiased_sigma},
                 {"mean_energy", z.energy.sigma},
                 {"mean_log_weight", z.log_weight.sigma},
                 {"reference_log", z.reference_sigma ? json(*z.reference_sigma) : json(nullptr)}};
  j["degenerate"] = z.degenerate;
  j["jensen_consistent"] = z.jensen_consistent();
  return j;
}

/// Sweep points: Cartesian product of sweep.T × sweep.beta × sweep.N, each
/// list defaulting to the model value.
inline std::vector<StarConfig> sweep_points(const ExperimentConfig& cfg) {
  const auto ts = cfg.sweep_T.empty() ? std::vector<double>{cfg.model.horizon} : cfg.sweep_T;
  const auto bs = cfg.sweep_beta.empty() ? std::vector<double>{cfg.model.beta} : cfg.sweep_beta;
  const auto ns = cfg.sweep_N.empty() ? std::vector<int>{cfg.model.branches} : cfg.sweep_N;
  std::vector<StarConfig> out;
  for (double t : ts) {
    for (double b : bs) {
      for (int n : ns) {
        StarConfig m = cfg.model;
        m.horizon = t;
        m.beta = b;
        m.branches = n;
        m.validate();
        out.push_back(m);
      }
    }
  }
  return out;
}

/// zbound: Jensen bound, importance-sampled log Z_T and the theorem shape
/// for every sweep point, plus the fitted constant C in −jensen ≈ C·shape.
inline json cmd_zbound(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  ZOptions opt;
  opt.samples = cfg.z_samples;
  opt.resample_theta = cfg.resample_theta;
  opt.reference_samples = cfg.z_reference_samples;
  opt.threads = cfg.threads;

  json points = json::array();
  std::vector<std::pair<double, double>> fit;
  const auto pts = sweep_points(cfg);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& m = pts[i];
    const auto z = estimate_log_z(m, opt, stream_seed(cfg.seed, i));
    json j = zestimate_json(m, z);
    if (m.beta > 0.0) {
      const auto shape = theorem_shape(m.d, m.beta, m.branches, m.horizon);
      j["theorem_shape"] = shape.value;
      j["shape_in_hypothesis"] = shape.in_hypothesis;
      j["shape_degenerate"] = shape.degenerate;
      fit.emplace_back(shape.value, -z.jensen_lower);
    } else {
      j["theorem_shape"] = nullptr;
    }
    points.push_back(j);
  }
  json out;
  out["points"] = points;
  const auto c = fit_shape_constant(fit);
  out["fitted_C"] = c ? json(*c) : json(nullptr);
  out["bound_form"] = "log Z >= -beta*I1 - KL with KL = E[log dP^lambda/dP] >= 0";

  OutputWriter w(out_dir);
  w.write("zbound.json", out.dump(2) + "\n");
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  w.write_manifest("zbound", cfg, wall);
  return out;
}

// ---------------------------------------------------------------------------
// verify

inline std::string verifier_csv(const std::vector<QuadResult>& rows) {
  std::string out = "inequality,params,computed,bound,ratio,error_estimate,levels,verdict,note\n";
  for (const auto& r : rows) {
    out += r.inequality + "," + r.params + "," + fmt17(r.computed) + "," + fmt17(r.bound) + "," + fmt17(r.ratio) +
           "," + fmt17(r.error) + "," + std::to_string(r.levels) + "," + (r.pass ? "pass" : "fail") + "," + r.note +
           "\n";
  }
  return out;
}

/// verify: verify.csv and manifest.json. Returns the rows; the caller maps
/// any failed verdict to a nonzero exit status.
inline std::vector<QuadResult> cmd_verify(const fs::path& out_dir, const VerifierOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = run_verifier(opt);
  OutputWriter w(out_dir);
  w.write("verify.csv", verifier_csv(rows));
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json m;
  m["artifact"] = "starpoly";
  m["version"] = kVersion;
  m["command"] = "verify";
  m["wall_clock_seconds"] = wall;
  m["all_pass"] = all_pass(rows);
  m["files"] = w.files();
  std::ofstream(out_dir / "manifest.json") << m.dump(2) << '\n';
  return rows;
}

// ---------------------------------------------------------------------------
// radius-scan

struct RadiusScanPoint {
  double horizon;
  MeanEstimate radius;
  RadiusBand band;
  double heuristic;
};

struct RadiusScan {
  std::vector<RadiusScanPoint> points;
  ExponentFit fit;
  double predicted_slope;  // T-exponent of the upper band
};

/// Fits the radius exponent from per-T record sets (T strictly increasing).
inline RadiusScan radius_scan_from_records(const StarConfig& base,
                                           const std::vector<std::pair<double, std::vector<std::vector<ChainRecord>>>>& runs,
                                           double c_low, double c_high) {
  if (runs.size() < 3) throw std::invalid_argument("radius-scan: need at least 3 sweep points");
  RadiusScan scan;
  std::vector<std::pair<double, double>> pts;
  for (const auto& [t, chains] : runs) {
    std::vector<double> radii;
    double var = 0.0;
    std::size_t total = 0;
    for (const auto& c : chains) total += c.size();
    for (const auto& c : chains) {
      std::vector<double> r;
      for (const auto& rec : c) r.push_back(rec.radius);
      const double share = static_cast<double>(c.size()) / static_cast<double>(total);
      var += share * share * std::pow(batch_means(r).sigma, 2);
      radii.insert(radii.end(), r.begin(), r.end());
    }
    const double mean = std::accumulate(radii.begin(), radii.end(), 0.0) / static_cast<double>(radii.size());
    const double beta = base.beta > 0.0 ? base.beta : 1.0;
    scan.points.push_back({t, {mean, std::sqrt(var)},
                           predicted_radius_band(base.d, beta, base.branches, t, c_low, c_high),
                           heuristic_radius(base.d, beta, base.branches, t)});
    pts.emplace_back(t, mean);
  }
  scan.fit = exponent_fit(pts);
  scan.predicted_slope = scan.points.front().band.high_t_exponent;
  return scan;
}

inline json radius_scan_json(const RadiusScan& s) {
  json pts = json::array();
  for (const auto& p : s.points) {
    pts.push_back({{"T", p.horizon},
                   {"mean_radius", p.radius.mean},
                   {"mean_radius_sigma", p.radius.sigma},
                   {"band_low", p.band.low},
                   {"band_high", p.band.high},
                   {"band_hypotheses_hold", p.band.hypotheses_hold},
                   {"heuristic_radius", p.heuristic}});
  }
  return {{"points", pts},
          {"slope", s.fit.slope},
          {"slope_half_width_95", s.fit.half_width},
          {"slope_ci", {s.fit.slope - s.fit.half_width, s.fit.slope + s.fit.half_width}},
          {"intercept", s.fit.intercept},
          {"residual", s.fit.residual},
          {"predicted_slope", s.predicted_slope}};
}

/// Log-log plot: data points plus one polyline per band.
inline std::string radius_svg(const RadiusScan& s) {
  const double W = 640, H = 420, pad = 60;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& p : s.points) {
    xmin = std::min(xmin, std::log(p.horizon));
    xmax = std::max(xmax, std::log(p.horizon));
    for (double y : {p.radius.mean, p.band.low, p.band.high, p.heuristic}) {
      if (y > 0.0 && std::isfinite(y)) {
        ymin = std::min(ymin, std::log(y));
        ymax = std::max(ymax, std::log(y));
      }
    }
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  auto X = [&](double t) { return pad + (std::log(t) - xmin) / (xmax - xmin) * (W - 2 * pad); };
  auto Y = [&](double r) { return H - pad - (std::log(r) - ymin) / (ymax - ymin) * (H - 2 * pad); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\"" << H - pad
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << H - pad << "\" stroke=\"black\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">log T</text>\n";
  o << "<text x=\"15\" y=\"" << H / 2 << "\" transform=\"rotate(-90 15 " << H / 2
    << ")\" text-anchor=\"middle\">log R</text>\n";

  auto series = [&](const char* id, const char* color, auto value) {
    o << "<polyline class=\"series\" id=\"" << id << "\" fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (const auto& p : s.points) {
      const double v = value(p);
      if (v > 0.0 && std::isfinite(v)) o << X(p.horizon) << ',' << Y(v) << ' ';
    }
    o << "\"/>\n";
  };
  series("band_low", "#1f77b4", [](const RadiusScanPoint& p) { return p.band.low; });
  series("band_high", "#d62728", [](const RadiusScanPoint& p) { return p.band.high; });
  series("heuristic", "#2ca02c", [](const RadiusScanPoint& p) { return p.heuristic; });
  o << "<g class=\"series\" id=\"data\">\n";
  for (const auto& p : s.points) {
    o << "<circle cx=\"" << X(p.horizon) << "\" cy=\"" << Y(p.radius.mean) << "\" r=\"4\" fill=\"black\"/>\n";
  }
  o << "</g>\n";
  char title[160];
  std::snprintf(title, sizeof title, "fitted slope %.4f +/- %.4f (predicted %.4f)", s.fit.slope, s.fit.half_width,
                s.predicted_slope);
  o << "<text x=\"" << W / 2 << "\" y=\"30\" text-anchor=\"middle\">" << title << "</text>\n";
  o << "</svg>\n";
  return o.str();
}

/// Writes radius_fit.json, radius.svg and the manifest for a finished scan.
inline void write_radius_scan(OutputWriter& w, const ExperimentConfig& cfg, const RadiusScan& scan, double wall) {
  w.write("radius_fit.json", radius_scan_json(scan).dump(2) + "\n");
  w.write("radius.svg", radius_svg(scan));
  w.write_manifest("radius-scan", cfg, wall);
}

/// radius-scan: simulate at every sweep.T value (records under T_<i>/),
/// fit the exponent and plot it against the predicted bands.
inline RadiusScan cmd_radius_scan(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  if (cfg.sweep_T.size() < 3) throw std::invalid_argument("radius-scan: sweep.T needs at least 3 values");
  OutputWriter w(out_dir);
  std::vector<std::pair<double, std::vector<std::vector<ChainRecord>>>> runs;
  for (std::size_t i = 0; i < cfg.sweep_T.size(); ++i) {
    ExperimentConfig sub = cfg;
    sub.model.horizon = cfg.sweep_T[i];
    sub.seed = stream_seed(cfg.seed, 1000 + i);
    auto res = run_simulation(sub);
    w.write("T_" + std::to_string(i) + "/records.csv", records_csv(res.records, cfg.model.branches));
    runs.emplace_back(cfg.sweep_T[i], std::move(res.records));
  }
  const auto scan = radius_scan_from_records(cfg.model, runs, cfg.c_low, cfg.c_high);
  write_radius_scan(w, cfg, scan, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return scan;
}

// ---------------------------------------------------------------------------
// report

/// report: statistics of an existing records CSV (tail rates, radius
/// quantiles, band comparison) written to report.json.
inline json cmd_report(const ExperimentConfig& cfg, const fs::path& records_path, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto bytes = read_file(records_path);
  const auto parsed = parse_records_csv(bytes);
  std::vector<std::vector<ChainRecord>> chains;
  for (auto& [c, recs] : parsed) chains.push_back(recs);
  json r;
  r["source"] = records_path.filename().string();
  r["source_sha256"] = sha256_hex(bytes);
  r["summary"] = summarize_records(chains, cfg.model.beta, cfg.r1, cfg.r2);
  if (cfg.model.beta > 0.0) {
    const auto band = predicted_radius_band(cfg.model.d, cfg.model.beta, cfg.model.branches, cfg.model.horizon,
                                            cfg.c_low, cfg.c_high);
    r["band"] = {{"low", band.low}, {"high", band.high}, {"hypotheses_hold", band.hypotheses_hold}, {"note", band.note}};
    r["heuristic_radius"] = heuristic_radius(cfg.model.d, cfg.model.beta, cfg.model.branches, cfg.model.horizon);
  }
  OutputWriter w(out_dir);
  w.write("report.json", r.dump(2) + "\n");
  w.write_manifest("report", cfg, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return r;
}

}  // namespace starpoly
