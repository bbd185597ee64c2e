// qtasep: command-line front end.
//
//   qtasep [--seed S] [--threads T] [--out-dir D] [--config F] <command> [options]
//
// Exit codes: 0 success, 2 validation error, 3 numeric-tolerance failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qtasep/qtasep.hpp"

namespace fs = std::filesystem;
using namespace qtasep;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

struct Globals {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out_dir;
  std::string config;
};

RateProfile parse_slow(const std::vector<std::string>& specs) {
  std::vector<RatePerturbation> v;
  for (const auto& s : specs) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw ValidationError("--slow expects index:rate, got '" + s + "'");
    try {
      v.push_back({std::stoul(s.substr(0, colon)), std::stod(s.substr(colon + 1))});
    } catch (const std::logic_error&) {
      throw ValidationError("--slow expects index:rate, got '" + s + "'");
    }
  }
  return RateProfile(std::move(v));
}

RateProfile profile_from(const std::vector<std::string>& slow, std::optional<double> alpha, std::size_t k) {
  if (!slow.empty()) return parse_slow(slow);
  if (alpha && *alpha < 1.0) return RateProfile::leading(k, *alpha);
  return {};
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

/// Writes to out_dir/rel when an output directory is set, else to stdout.
template <typename Writer>
void emit(const Globals& g, const fs::path& rel, Writer&& write) {
  if (g.out_dir.empty()) {
    write(std::cout);
    return;
  }
  const fs::path path = fs::path(g.out_dir) / rel;
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  write(out);
  std::cerr << "wrote " << path.string() << "\n";
}

std::string fmt(double v) { return format_double(v); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"q-TASEP simulation and limit-law toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_option("--config", g.config, "JSON config file (compare also accepts a manifest)");
  app.set_version_flag("--version", kVersion);

  // phase
  double ph_q = 0.6, ph_theta = 1.0;
  std::optional<double> ph_alpha;
  std::size_t ph_k = 1;
  std::vector<std::string> ph_slow;
  auto* phase = app.add_subcommand("phase", "Classify the phase and print hydrodynamic constants");
  phase->add_option("--q", ph_q);
  phase->add_option("--theta", ph_theta);
  phase->add_option("--alpha", ph_alpha, "Rate of the first k particles");
  phase->add_option("--k", ph_k);
  phase->add_option("--slow", ph_slow, "Perturbed particle as index:rate (repeatable)");

  // shape
  double sh_q = 0.6, sh_alpha = 1.0, sh_lo = 0.05, sh_hi = 5.0, sh_step = 0.05;
  auto* shape = app.add_subcommand("shape", "Limit shape (x, y) as a function of theta, CSV");
  shape->add_option("--q", sh_q);
  shape->add_option("--alpha", sh_alpha);
  shape->add_option("--theta-min", sh_lo);
  shape->add_option("--theta-max", sh_hi);
  shape->add_option("--theta-step", sh_step);

  // simulate
  double si_q = 0.6, si_theta = 1.0, si_c = 0.0;
  std::optional<double> si_alpha;
  std::size_t si_k = 1, si_runs = 100;
  std::vector<std::size_t> si_N{128};
  std::vector<std::string> si_slow;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo samples of xi_N, CSV");
  sim->add_option("--q", si_q);
  sim->add_option("--theta", si_theta);
  sim->add_option("--c", si_c);
  sim->add_option("--alpha", si_alpha);
  sim->add_option("--k", si_k);
  sim->add_option("--slow", si_slow);
  sim->add_option("--N", si_N)->delimiter(',');
  sim->add_option("--runs", si_runs);

  // limit-cdf
  std::string lc_law = "gue";
  std::vector<double> lc_b;
  std::size_t lc_k = 1;
  double lc_lo = -8.0, lc_hi = 6.0, lc_step = 0.05;
  auto* lcdf = app.add_subcommand("limit-cdf", "Tabulate a limit CDF: x,F,err_est");
  lcdf->add_option("--law", lc_law)->check(CLI::IsMember({"gue", "bbp", "gk"}));
  lcdf->add_option("--b", lc_b, "BBP vector")->delimiter(',');
  lcdf->add_option("--k", lc_k, "Hermite rank for gk");
  lcdf->add_option("--lo", lc_lo);
  lcdf->add_option("--hi", lc_hi);
  lcdf->add_option("--step", lc_step);

  // compare
  std::string cm_preset = "gue";
  double cm_q = 0.6, cm_theta = 1.0, cm_c = 0.0;
  std::optional<double> cm_alpha, cm_ks;
  std::size_t cm_k = 1, cm_runs = 2000;
  std::vector<double> cm_bt;
  std::vector<std::size_t> cm_N;
  auto* cmp = app.add_subcommand("compare", "Run a preset experiment and compare with its limit law");
  auto* o_preset = cmp->add_option("--preset", cm_preset)->check(
      CLI::IsMember({"gue", "critical", "gaussian", "full-bbp"}));
  auto* o_q = cmp->add_option("--q", cm_q);
  auto* o_theta = cmp->add_option("--theta", cm_theta);
  auto* o_c = cmp->add_option("--c", cm_c);
  auto* o_alpha = cmp->add_option("--alpha", cm_alpha);
  auto* o_k = cmp->add_option("--k", cm_k);
  auto* o_bt = cmp->add_option("--b-tilde", cm_bt)->delimiter(',');
  auto* o_N = cmp->add_option("--N", cm_N)->delimiter(',');
  auto* o_runs = cmp->add_option("--runs", cm_runs);
  auto* o_ks = cmp->add_option("--ks-threshold", cm_ks);

  // saddle-check
  double sc_q = 0.6, sc_theta = 1.0;
  std::optional<double> sc_alpha;
  auto* sad = app.add_subcommand("saddle-check", "Critical-point identities and steep-descent scans");
  sad->add_option("--q", sc_q);
  sad->add_option("--theta", sc_theta);
  sad->add_option("--alpha", sc_alpha);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (e.get_exit_code() != 0) std::cerr << "\n" << app.help();
    return e.get_exit_code() == 0 ? 0 : kExitValidation;
  }

  try {
    nlohmann::json cfg_json;
    if (!g.config.empty()) cfg_json = load_json(g.config);

    if (*phase) {
      const QParams q(ph_q);
      const RateProfile prof = profile_from(ph_slow, ph_alpha, ph_k);
      const Phase p = classify_phase(q, ph_theta, prof);
      const HydroConstants h = hydro_constants(q, ph_theta, prof.alpha());
      std::cout << to_string(p);
      if (prof.k() > 0) std::cout << ", k=" << prof.k();
      std::cout << "\n";
      std::cout << "q=" << fmt(ph_q) << " theta=" << fmt(ph_theta) << " alpha=" << fmt(prof.alpha())
                << " q^theta=" << fmt(q.pow(ph_theta)) << "\n";
      std::cout << "kappa=" << fmt(h.kappa) << "\nf=" << fmt(h.f) << "\nchi=" << fmt(h.chi) << "\n";
      if (h.g) std::cout << "g=" << fmt(*h.g) << "\nsigma=" << fmt(*h.sigma) << "\n";
      std::cout << "lln_position=" << fmt(lln_position(q, ph_theta, prof.alpha())) << "\n";
      return 0;
    }

    if (*shape) {
      const QParams q(sh_q);
      const RateProfile prof = sh_alpha < 1.0 ? RateProfile::leading(1, sh_alpha) : RateProfile{};
      const auto pts = limit_shape(q, prof, uniform_grid(sh_lo, sh_hi, sh_step));
      std::ostringstream name;
      name << "tables/shape_q" << sh_q << "_alpha" << sh_alpha << ".csv";
      emit(g, name.str(), [&](std::ostream& os) {
        os << "theta,x,y,branch\n";
        for (const auto& p : pts) {
          os << fmt(p.theta) << ',' << fmt(p.x) << ',' << fmt(p.y) << ','
             << (p.branch == ShapeBranch::Curved ? "curved" : "straight") << '\n';
        }
      });
      return 0;
    }

    if (*sim) {
      MonteCarloConfig mc;
      mc.q = si_q;
      mc.theta = si_theta;
      mc.c = si_c;
      mc.N_list = si_N;
      mc.runs = si_runs;
      mc.profile = profile_from(si_slow, si_alpha, si_k);
      mc.master_seed = g.seed;
      mc.threads = g.threads;
      const auto rows = monte_carlo(mc);
      emit(g, "samples.csv", [&](std::ostream& os) { write_samples_csv(os, rows); });
      return 0;
    }

    if (*lcdf) {
      KernelSpec spec = lc_law == "gue" ? KernelSpec::airy()
                        : lc_law == "bbp" ? KernelSpec::bbp(lc_b)
                                          : KernelSpec::hermite(lc_k);
      const TableGrid grid{lc_lo, lc_hi, lc_step};
      const std::string name = spec.label();
      const CdfTable t = g.out_dir.empty()
                             ? build_cdf_table(spec, grid, g.threads)
                             : cached_cdf_table(spec, fs::path(g.out_dir) / "tables" / (name + ".json"),
                                                grid, g.threads);
      emit(g, fs::path("tables") / (name + ".csv"), [&](std::ostream& os) { write_cdf_csv(os, t); });
      return 0;
    }

    if (*cmp) {
      ExperimentConfig c = cfg_json.is_null() ? ExperimentConfig{} : ExperimentConfig::from_json(cfg_json);
      if (cfg_json.is_null() || o_preset->count()) c.preset = parse_preset(cm_preset);
      if (cfg_json.is_null() || o_q->count()) c.q = cm_q;
      if (cfg_json.is_null() || o_theta->count()) c.theta = cm_theta;
      if (cfg_json.is_null() || o_c->count()) c.c = cm_c;
      if (o_alpha->count()) c.alpha = cm_alpha;
      if (cfg_json.is_null() || o_k->count()) c.k = cm_k;
      if (o_bt->count()) c.b_tilde = cm_bt;
      if (o_N->count()) c.N_list = cm_N;
      if (cfg_json.is_null() || o_runs->count()) c.runs = cm_runs;
      if (o_ks->count()) c.ks_threshold = cm_ks;
      if (cfg_json.is_null() || app.get_option("--seed")->count()) c.seed = g.seed;
      c.threads = g.threads;
      const fs::path dir = g.out_dir.empty() ? fs::path("qtasep-out") : fs::path(g.out_dir);
      const ExperimentResult r = run_experiment(c, dir / "tables");
      write_experiment(r, dir);
      std::cout << r.report().dump(2) << "\n";
      return 0;
    }

    if (*sad) {
      const QParams q(sc_q);
      bool ok = true;
      std::cout << "source,d1,d2,d3,two_chi\n";
      const double two_chi = 2.0 * chi(q, sc_theta);
      for (auto [src, name] : {std::pair{DerivativeSource::ActionValues, "f0"},
                               std::pair{DerivativeSource::PrimePsi, "f0_prime_psi"},
                               std::pair{DerivativeSource::PrimeSeries, "f0_prime_series"}}) {
        const auto cc = critical_constants(q, sc_theta, src, false);
        std::cout << name << ',' << fmt(cc.d1) << ',' << fmt(cc.d2) << ',' << fmt(cc.d3) << ','
                  << fmt(two_chi) << "\n";
        ok = ok && std::abs(cc.d1) <= 1e-9 && std::abs(cc.d2) <= 1e-8 &&
             std::abs(cc.d3 - two_chi) <= 1e-6 * std::abs(two_chi);
      }
      const auto grid = uniform_grid(-5.0, 5.0, 0.01);
      const auto scan = steep_descent_scan(Action::f0(q, sc_theta), ContourRay{sc_theta}, grid);
      std::cout << "scan,f0,points=" << scan.points << ",violations=" << scan.violations.size() << "\n";
      ok = ok && scan.ok();
      const auto per = vertical_periodicity_check(Action::f0(q, sc_theta), sc_theta + 0.1);
      std::cout << "periodicity,f0,max_error=" << fmt(per.max_period_error)
                << ",monotone_violations=" << per.monotone_violations << "\n";
      ok = ok && per.ok();
      if (sc_alpha && classify_phase(q, sc_theta, *sc_alpha) == Phase::Gaussian) {
        const auto sh = shock_critical_constants(q, sc_theta, *sc_alpha, false);
        const double sg = sigma(q, sc_theta, *sc_alpha);
        std::cout << "g0,d1=" << fmt(sh.d1) << ",d2=" << fmt(sh.d2) << ",sigma=" << fmt(sg) << "\n";
        ok = ok && std::abs(sh.d1) <= 1e-9 && std::abs(sh.d2 - sg) <= 1e-8 * std::abs(sg);
        const Action a = Action::g0(q, sc_theta, *sc_alpha);
        const auto gs = steep_descent_scan(a, ContourRay{a.critical_point()}, grid);
        std::cout << "scan,g0,points=" << gs.points << ",violations=" << gs.violations.size() << "\n";
        ok = ok && gs.ok();
      }
      std::cout << (ok ? "OK" : "FAILED") << "\n";
      return ok ? 0 : kExitNumeric;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
