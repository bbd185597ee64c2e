#pragma once

// Phase-transition experiments: presets, manifests, sample tables and the
// KS comparison report.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qtasep/cdf_table.hpp"
#include "qtasep/errors.hpp"
#include "qtasep/hydro.hpp"
#include "qtasep/limits.hpp"
#include "qtasep/simulate.hpp"
#include "qtasep/stats.hpp"
#include "qtasep/version.hpp"

namespace qtasep {

enum class Preset { Gue, Critical, Gaussian, FullBbp };

inline std::string to_string(Preset p) {
  switch (p) {
    case Preset::Gue: return "gue";
    case Preset::Critical: return "critical";
    case Preset::Gaussian: return "gaussian";
    case Preset::FullBbp: return "full-bbp";
  }
  return "?";
}

inline Preset parse_preset(const std::string& s) {
  if (s == "gue") return Preset::Gue;
  if (s == "critical") return Preset::Critical;
  if (s == "gaussian") return Preset::Gaussian;
  if (s == "full-bbp") return Preset::FullBbp;
  throw ValidationError("unknown preset '" + s + "'");
}

struct ExperimentConfig {
  Preset preset = Preset::Gue;
  double q = 0.6;
  double theta = 1.0;
  double c = 0.0;
  // gue: rate of the slow particles (default 1, i.e. no perturbation);
  // gaussian: required, below q^theta; critical: must be absent or exactly q^theta.
  std::optional<double> alpha;
  std::size_t k = 1;  // number of slow particles, placed first
  std::vector<double> b_tilde;  // full-bbp: a_i = q^{theta + b_tilde_i N^{-1/3}}
  std::vector<std::size_t> N_list{128, 256, 512, 1024};
  std::size_t runs = 2000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::optional<double> ks_threshold;  // default per preset

  nlohmann::json to_json() const {
    nlohmann::json j{{"preset", to_string(preset)}, {"q", q},          {"theta", theta},
                     {"c", c},                      {"k", k},          {"b_tilde", b_tilde},
                     {"N_list", N_list},            {"runs", runs},    {"seed", seed}};
    j["alpha"] = alpha ? nlohmann::json(*alpha) : nlohmann::json(nullptr);
    j["ks_threshold"] = ks_threshold ? nlohmann::json(*ks_threshold) : nlohmann::json(nullptr);
    return j;
  }

  /// Accepts either a bare config object or a manifest holding one under "config".
  static ExperimentConfig from_json(const nlohmann::json& in) {
    const nlohmann::json& j = in.contains("config") ? in.at("config") : in;
    ExperimentConfig c;
    try {
      if (j.contains("preset")) c.preset = parse_preset(j.at("preset").get<std::string>());
      if (j.contains("q")) c.q = j.at("q").get<double>();
      if (j.contains("theta")) c.theta = j.at("theta").get<double>();
      if (j.contains("c")) c.c = j.at("c").get<double>();
      if (j.contains("alpha") && !j.at("alpha").is_null()) c.alpha = j.at("alpha").get<double>();
      if (j.contains("k")) c.k = j.at("k").get<std::size_t>();
      if (j.contains("b_tilde")) c.b_tilde = j.at("b_tilde").get<std::vector<double>>();
      if (j.contains("N_list")) c.N_list = j.at("N_list").get<std::vector<std::size_t>>();
      if (j.contains("runs")) c.runs = j.at("runs").get<std::size_t>();
      if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
      if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
      if (j.contains("ks_threshold") && !j.at("ks_threshold").is_null()) {
        c.ks_threshold = j.at("ks_threshold").get<double>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("bad experiment config: ") + e.what());
    }
    return c;
  }
};

/// Everything derived from a config before any simulation.
struct ExperimentPlan {
  ExperimentConfig config;
  Phase phase;
  HydroConstants hydro;
  std::optional<double> alpha;  // slow rate for fixed profiles
  double b = 0.0;               // c (log q)^2 / (2 chi^{2/3})
  KernelSpec limit;
  double ks_threshold;

  RateProfile profile_for(std::size_t N) const {
    const QParams qp(config.q);
    if (config.preset == Preset::FullBbp) {
      std::vector<RatePerturbation> v;
      const double scale = std::cbrt(static_cast<double>(N));
      for (std::size_t i = 0; i < config.b_tilde.size(); ++i) {
        v.push_back({i + 1, qp.pow(config.theta + config.b_tilde[i] / scale)});
      }
      return RateProfile(std::move(v));
    }
    if (!alpha || *alpha >= 1.0) return {};
    return RateProfile::leading(config.k, *alpha);
  }
};

inline ExperimentPlan plan_experiment(const ExperimentConfig& cfg) {
  const QParams q(cfg.q);
  require_theta(cfg.theta);
  if (!std::isfinite(cfg.c)) throw ValidationError("c must be finite");
  if (cfg.runs < 1) throw ValidationError("runs must be >= 1");
  if (cfg.N_list.empty()) throw ValidationError("N_list is empty");
  for (std::size_t N : cfg.N_list) {
    if (N < 1) throw ValidationError("every N must be >= 1");
  }
  const double qt = q.pow(cfg.theta);
  ExperimentPlan p{cfg, Phase::GUE, {}, std::nullopt, 0.0, KernelSpec::airy(), 0.10};
  const double chi_v = chi(q, cfg.theta);
  p.b = cfg.c * q.log() * q.log() / (2.0 * std::cbrt(chi_v * chi_v));

  switch (cfg.preset) {
    case Preset::Gue: {
      const double a = cfg.alpha.value_or(1.0);
      require_alpha(a);
      if (classify_phase(q, cfg.theta, a) != Phase::GUE) {
        throw ValidationError("gue preset needs alpha > q^theta");
      }
      p.alpha = a;
      p.phase = Phase::GUE;
      p.limit = KernelSpec::airy();
      break;
    }
    case Preset::Critical: {
      if (cfg.alpha && *cfg.alpha != qt) {
        throw ValidationError("critical preset requires alpha to be exactly q^theta");
      }
      if (cfg.k < 1) throw ValidationError("critical preset needs k >= 1");
      p.alpha = qt;
      p.phase = Phase::Critical;
      p.limit = KernelSpec::bbp(std::vector<double>(cfg.k, p.b));
      break;
    }
    case Preset::Gaussian: {
      if (!cfg.alpha) throw ValidationError("gaussian preset needs alpha");
      require_alpha(*cfg.alpha);
      if (cfg.k < 1 || cfg.k > 8) throw ValidationError("gaussian preset needs 1 <= k <= 8");
      if (classify_phase(q, cfg.theta, *cfg.alpha) != Phase::Gaussian) {
        throw ValidationError("gaussian preset needs alpha < q^theta");
      }
      p.alpha = cfg.alpha;
      p.phase = Phase::Gaussian;
      p.limit = KernelSpec::hermite(cfg.k);
      p.ks_threshold = 0.06;
      break;
    }
    case Preset::FullBbp: {
      if (cfg.b_tilde.empty()) throw ValidationError("full-bbp preset needs b_tilde");
      // The pole at z = b_tilde_i of the pre-limit variable sits at
      // b + chi^{1/3} b_tilde_i after the Airy rescaling.
      std::vector<double> bv;
      for (double bt : cfg.b_tilde) {
        if (!std::isfinite(bt)) throw ValidationError("b_tilde entries must be finite");
        bv.push_back(p.b + std::cbrt(chi_v) * bt);
      }
      p.phase = Phase::Critical;
      p.limit = KernelSpec::bbp(std::move(bv));
      break;
    }
  }
  for (std::size_t N : cfg.N_list) {
    const RateProfile prof = p.profile_for(N);
    if (prof.max_index() > N) throw ValidationError("perturbed particle index exceeds N");
  }
  p.hydro = hydro_constants(q, cfg.theta, p.alpha.value_or(1.0));
  if (cfg.ks_threshold) p.ks_threshold = *cfg.ks_threshold;
  return p;
}

inline MonteCarloConfig monte_carlo_config(const ExperimentPlan& p) {
  MonteCarloConfig mc;
  mc.q = p.config.q;
  mc.theta = p.config.theta;
  mc.c = p.config.c;
  mc.N_list = p.config.N_list;
  mc.runs = p.config.runs;
  mc.master_seed = p.config.seed;
  mc.threads = p.config.threads;
  mc.profile_for_N = [p](std::size_t N) { return p.profile_for(N); };
  mc.forced_phase = p.phase;
  return mc;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_samples_csv(std::ostream& os, const std::vector<SampleRecord>& rows) {
  os << "N,run,seed_index,tau,X_N,xi\n";
  for (const auto& r : rows) {
    os << r.N << ',' << r.run << ',' << r.seed_index << ',' << format_double(r.tau) << ',' << r.X
       << ',' << format_double(r.xi) << '\n';
  }
}

inline void write_cdf_csv(std::ostream& os, const CdfTable& t) {
  os << "x,F,err_est\n";
  for (std::size_t i = 0; i < t.x().size(); ++i) {
    os << format_double(t.x()[i]) << ',' << format_double(t.values()[i]) << ','
       << format_double(t.errors()[i]) << '\n';
  }
}

struct KsEntry {
  std::size_t N;
  double ks;
  bool pass;
  std::map<std::string, double> alternatives;  // KS against other limit laws
};

struct ExperimentResult {
  ExperimentPlan plan;
  std::vector<SampleRecord> samples;
  std::vector<KsEntry> entries;
  std::map<std::string, CdfTable> tables;
  std::size_t decreasing_steps = 0;
  bool trend_ok = false;
  double elapsed_seconds = 0.0;
  std::string started_at;

  nlohmann::json manifest() const {
    const auto& c = plan.config;
    nlohmann::json hydro{{"kappa", plan.hydro.kappa}, {"f", plan.hydro.f}, {"chi", plan.hydro.chi}};
    hydro["g"] = plan.hydro.g ? nlohmann::json(*plan.hydro.g) : nlohmann::json(nullptr);
    hydro["sigma"] = plan.hydro.sigma ? nlohmann::json(*plan.hydro.sigma) : nlohmann::json(nullptr);
    nlohmann::json profiles = nlohmann::json::object();
    for (std::size_t N : c.N_list) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& pp : plan.profile_for(N).perturbations()) {
        arr.push_back({{"index", pp.index}, {"rate", pp.rate}});
      }
      profiles[std::to_string(N)] = arr;
    }
    return {{"schema_version", 1},
            {"tool_version", kVersion},
            {"config", c.to_json()},
            {"master_seed", c.seed},
            {"q", c.q},
            {"theta", c.theta},
            {"c", c.c},
            {"N_list", c.N_list},
            {"runs", c.runs},
            {"profile", profiles},
            {"phase", std::string(to_string(plan.phase))},
            {"hydro", hydro},
            {"limit_law", limit_json()},
            {"threads", c.threads},
            {"started_at", started_at},
            {"wall_clock_seconds", elapsed_seconds}};
  }

  nlohmann::json limit_json() const {
    nlohmann::json j{{"id", plan.limit.label()}};
    if (plan.limit.kind == KernelKind::BBP) j["b"] = plan.limit.b;
    if (plan.limit.kind == KernelKind::Hermite) j["k"] = plan.limit.k;
    return j;
  }

  nlohmann::json report() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& e : entries) {
      nlohmann::json r{{"preset", to_string(plan.config.preset)},
                       {"N", e.N},
                       {"ks", e.ks},
                       {"n_runs", plan.config.runs},
                       {"limit_law", plan.limit.label()},
                       {"pass", e.pass}};
      if (!e.alternatives.empty()) r["ks_alternatives"] = e.alternatives;
      rows.push_back(r);
    }
    return {{"results", rows},
            {"ks_threshold", plan.ks_threshold},
            {"b", plan.b},
            {"decreasing_steps", decreasing_steps},
            {"trend_ok", trend_ok}};
  }
};

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Tables for the plan's limit law and, for the critical presets, the
/// GUE and Gaussian alternatives. Cached under `cache_dir` when given.
inline std::map<std::string, CdfTable> limit_tables(const ExperimentPlan& p,
                                                    const std::optional<std::filesystem::path>& cache_dir,
                                                    unsigned threads) {
  std::vector<KernelSpec> specs{p.limit};
  if (p.phase == Phase::Critical) {
    specs.push_back(KernelSpec::airy());
    specs.push_back(KernelSpec::hermite(1));
  }
  std::map<std::string, CdfTable> out;
  for (const auto& s : specs) {
    const std::string name = s.label();
    if (out.count(name)) continue;
    if (cache_dir) {
      out.emplace(name, cached_cdf_table(s, *cache_dir / (name + ".json"), {}, threads));
    } else {
      out.emplace(name, build_cdf_table(s, {}, threads));
    }
  }
  return out;
}

inline std::size_t count_decreasing_steps(const std::vector<KsEntry>& e) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < e.size(); ++i) n += e[i].ks < e[i - 1].ks ? 1 : 0;
  return n;
}

/// Simulates every N, then compares each N's xi sample with the limit law.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       const std::optional<std::filesystem::path>& cache_dir = {}) {
  ExperimentResult r{plan_experiment(cfg), {}, {}, {}, 0, false, 0.0, utc_timestamp()};
  const auto t0 = std::chrono::steady_clock::now();
  r.tables = limit_tables(r.plan, cache_dir, cfg.threads);
  const auto& tables = r.tables;
  r.samples = monte_carlo(monte_carlo_config(r.plan));
  const std::string main = r.plan.limit.label();
  for (std::size_t ni = 0; ni < cfg.N_list.size(); ++ni) {
    std::vector<double> xi;
    for (std::size_t j = 0; j < cfg.runs; ++j) xi.push_back(r.samples[ni * cfg.runs + j].xi);
    const EmpiricalDistribution d(std::move(xi));
    KsEntry e{cfg.N_list[ni], ks_statistic(d, tables.at(main)), false, {}};
    e.pass = e.ks <= r.plan.ks_threshold;
    for (const auto& [name, t] : tables) {
      if (name != main) e.alternatives[name] = ks_statistic(d, t);
    }
    r.entries.push_back(std::move(e));
  }
  r.decreasing_steps = count_decreasing_steps(r.entries);
  const std::size_t steps = r.entries.size() - 1;
  r.trend_ok = steps == 0 || r.decreasing_steps >= std::max<std::size_t>(1, steps - 1);
  r.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

/// Writes manifest.json, samples.csv, report.json and tables/*.csv.
inline void write_experiment(const ExperimentResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "tables");
  std::ofstream(dir / "manifest.json") << r.manifest().dump(2) << "\n";
  std::ofstream(dir / "report.json") << r.report().dump(2) << "\n";
  {
    std::ofstream out(dir / "samples.csv");
    write_samples_csv(out, r.samples);
  }
  for (const auto& [name, t] : r.tables) {
    std::ofstream out(dir / "tables" / (name + ".csv"));
    write_cdf_csv(out, t);
  }
}

}  // namespace qtasep
