// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "oracles.hpp"
#include "qtasep/qtasep.hpp"

using namespace qtasep;
namespace fs = std::filesystem;

namespace {

const double kQs[] = {0.3, 0.6, 0.9};
const double kThetas[] = {0.25, 0.5, 1.0, 2.0, 4.0};

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// Outcome of one criterion: pass flag, optional soft-pass note and details.
struct Outcome {
  bool pass = true;
  bool soft = false;
  std::ostringstream detail;
  std::string failures;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failures += (failures.empty() ? "" : "; ") + what;
    }
  }
};

double rel(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

template <typename F>
double fd4(F&& fn, double x, double h) {
  return (-fn(x + 2 * h) + 8 * fn(x + h) - 8 * fn(x - h) + fn(x - 2 * h)) / (12 * h);
}

void special_function_ladder(Outcome& o) {
  double tele = 0, deriv = 0, explog = 0;
  for (double qv : kQs) {
    const QParams q(qv);
    for (double th : kThetas) {
      tele = std::max(tele, std::abs(qdigamma(th + 1, q) - qdigamma(th, q) +
                                     q.log() * q.pow(th) / q.one_minus_pow(th)));
      const double h = 1e-3 * th;
      deriv = std::max(deriv, rel(qdigamma_prime(th, q), fd4([&](double x) { return qdigamma(x, q); }, th, h)));
      deriv = std::max(deriv, rel(qdigamma_second(th, q),
                                  fd4([&](double x) { return qdigamma_prime(x, q); }, th, h)));
      const cplx z = q.pow(th);
      explog = std::max(explog, std::abs(std::exp(log_qpoch_inf(z, q)) - qpoch_inf(z, q)) /
                                    std::abs(qpoch_inf(z, q)));
    }
  }
  o.require(tele <= 1e-12, "telescoping <= 1e-12");
  o.require(deriv <= 1e-7, "derivative vs finite difference <= 1e-7 rel");
  o.require(explog <= 1e-12, "exp(log Pochhammer) <= 1e-12 rel");
  o.detail << "telescoping " << tele << ", derivatives " << deriv << ", exp/log " << explog;
}

void boundary_continuity(Outcome& o) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> uq(0.05, 0.95), ut(0.1, 5.0);
  double dg = 0, ds = 0;
  for (int i = 0; i < 20; ++i) {
    const QParams q(uq(gen));
    const double th = ut(gen);
    dg = std::max(dg, std::abs(g(q, th, q.pow(th)) - f(q, th)));
    ds = std::max(ds, std::abs(sigma(q, th, q.pow(th))));
  }
  o.require(dg <= 1e-12, "|g - f| <= 1e-12");
  o.require(ds <= 1e-12, "|sigma| <= 1e-12");
  o.detail << "max |g - f| " << dg << ", max |sigma| " << ds << " over 20 random (q, theta)";
}

void saddle_identities(Outcome& o) {
  double d1 = 0, d2 = 0, d3 = 0, s1 = 0, s2 = 0;
  std::size_t violations = 0, scans = 0;
  const auto grid = uniform_grid(-5.0, 5.0, 0.01);
  for (double qv : kQs) {
    const QParams q(qv);
    for (double th : kThetas) {
      const auto c = critical_constants(q, th, DerivativeSource::ActionValues, false);
      d1 = std::max(d1, std::abs(c.d1));
      d2 = std::max(d2, std::abs(c.d2));
      d3 = std::max(d3, rel(c.d3, 2 * chi(q, th)));
      for (double frac : {0.2, 0.5, 0.9}) {
        const double alpha = frac * q.pow(th);
        const auto s = shock_critical_constants(q, th, alpha, false);
        s1 = std::max(s1, std::abs(s.d1));
        s2 = std::max(s2, rel(s.d2, sigma(q, th, alpha)));
      }
      violations += steep_descent_scan(Action::f0(q, th), ContourRay{th}, grid).violations.size();
      const Action ga = Action::g0(q, th, 0.5 * q.pow(th));
      violations += steep_descent_scan(ga, ContourRay{ga.critical_point()}, grid).violations.size();
      scans += 2;
    }
  }
  o.require(d1 <= 1e-9, "|f0'| <= 1e-9");
  o.require(d2 <= 1e-8, "|f0''| <= 1e-8");
  o.require(d3 <= 1e-6, "f0''' = 2 chi within 1e-6 rel");
  o.require(s1 <= 1e-9, "|g0'(A)| <= 1e-9");
  o.require(s2 <= 1e-8, "g0''(A) = sigma within 1e-8 rel");
  o.require(violations == 0, "steep-descent violations");
  o.detail << "f0' " << d1 << ", f0'' " << d2 << ", f0''' rel " << d3 << ", g0' " << s1 << ", g0'' rel " << s2
           << ", " << violations << " violations in " << scans << " scans (q=0.9, theta=2 included)";
}

void limit_numerics(Outcome& o) {
  double g1 = 0, bbp0 = 0, selfc = 0;
  for (double x = -4.0; x <= 4.0 + 1e-12; x += 0.1) g1 = std::max(g1, std::abs(gk_cdf(1, x) - normal_cdf(x)));
  for (double x = -8.0; x <= 6.0 + 1e-12; x += 0.5) {
    bbp0 = std::max(bbp0, std::abs(bbp_cdf({}, x) - gue_cdf(x)));
  }
  for (const KernelSpec& s : {KernelSpec::airy(), KernelSpec::bbp({0.0}), KernelSpec::hermite(1),
                              KernelSpec::hermite(2), KernelSpec::hermite(3)}) {
    KernelSpec loose = s;
    loose.nystrom.self_convergence_tol = 1.0;  // measure rather than throw
    for (double x = -8.0; x <= 6.0 + 1e-12; x += 0.5) selfc = std::max(selfc, fredholm_eval(loose, x).err_est);
  }
  double ks = 0;
  for (std::size_t k : {1u, 2u, 3u}) {
    const CdfTable t = build_cdf_table(KernelSpec::hermite(k), {}, workers());
    RngStream rng(11, k);
    std::vector<double> xs(1000000);
    for (auto& x : xs) x = gue_largest_eig_sample(k, rng);
    ks = std::max(ks, ks_statistic(EmpiricalDistribution(std::move(xs)), t));
  }
  o.require(g1 <= 1e-8, "G_1 = Phi within 1e-8");
  o.require(bbp0 <= 1e-8, "F_BBP,k=0 = F_GUE within 1e-8");
  o.require(selfc <= 1e-7, "self-convergence <= 1e-7");
  o.require(ks <= 5e-3, "KS(G_k, GUE Monte Carlo) <= 5e-3");
  o.detail << "|G_1 - Phi| " << g1 << ", |F_BBP,0 - F_GUE| " << bbp0 << ", self-convergence " << selfc
           << ", max KS over k=1,2,3 " << ks;
}

void simulator_oracles(Outcome& o) {
  // Single particle at rate 0.7: waiting times over 1e5 events.
  auto s = new_system(1, RateProfile::leading(1, 0.7), 0.6);
  RngStream rng(3, 0);
  double prev = 0, sum = 0, sum2 = 0;
  const int n1 = 100000;
  for (int i = 0; i < n1; ++i) {
    const double t = s.step(rng).time;
    sum += t - prev;
    sum2 += (t - prev) * (t - prev);
    prev = t;
  }
  const double m1 = sum / n1, se1 = std::sqrt((sum2 / n1 - m1 * m1) / n1);
  const bool poisson_ok = std::abs(m1 - 1 / 0.7) <= 4 * se1;

  const double want = oracle::ctmc_two_particle_mean(0.5, 1.0, 40);
  RngStream rng2(6, 0);
  const int n2 = 1000000;
  double a = 0, a2 = 0;
  for (int i = 0; i < n2; ++i) {
    auto sys = new_system(2, RateProfile{}, 0.5);
    sys.run_until(1.0, rng2);
    const double v = static_cast<double>(sys.position(2) + 2);
    a += v;
    a2 += v * v;
  }
  const double m2 = a / n2, se2 = std::sqrt((a2 / n2 - m2 * m2) / n2);
  const bool ctmc_ok = std::abs(m2 - want) <= 4 * se2;

  bool exact = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto small = new_system(8, RateProfile::leading(1, 0.5), 0.6);
    auto large = new_system(16, RateProfile::leading(1, 0.5), 0.6);
    KeyedDriver ds(small, seed), dl(large, seed);
    for (double t : {5.0, 20.0, 60.0}) {
      ds.run_until(t);
      dl.run_until(t);
      auto pl = large.positions();
      pl.resize(8);
      exact = exact && small.positions() == pl;
    }
  }
  o.require(poisson_ok, "single-particle mean within 4 SE");
  o.require(ctmc_ok, "two-particle mean within 4 SE of the CTMC oracle");
  o.require(exact, "truncation exactness M=8 vs 16");
  o.detail << "Poisson |dev|/SE " << std::abs(m1 - 1 / 0.7) / se1 << ", CTMC |dev|/SE " << std::abs(m2 - want) / se2
           << " (oracle " << want << "), truncation " << (exact ? "identical" : "differs");
}

void hydrodynamic_lln(Outcome& o) {
  const QParams q(0.6);
  double dev[2];
  for (int i = 0; i < 2; ++i) {
    ExperimentConfig c;
    c.preset = i == 0 ? Preset::Gue : Preset::Gaussian;
    if (i == 1) c.alpha = 0.4;
    c.N_list = {4096};
    c.runs = 100;
    c.seed = 17;
    c.threads = workers();
    const auto plan = plan_experiment(c);
    const auto rows = monte_carlo(monte_carlo_config(plan));
    double mean = 0;
    for (const auto& r : rows) mean += static_cast<double>(r.X) / 4096.0;
    mean /= static_cast<double>(rows.size());
    const double target = (i == 0 ? f(q, 1.0) : g(q, 1.0, 0.4)) - 1.0;
    dev[i] = std::abs(mean - target);
  }
  o.require(dev[0] <= 0.01, "alpha=1 against f - 1");
  o.require(dev[1] <= 0.01, "alpha=0.4 against g - 1");
  // Diagnostic only: the F_GUE mean shifts mean(X/N) by chi^{1/3}/|log q| E[xi] N^{-2/3}.
  const double tw_mean = -1.7710868074;
  const double offset = std::cbrt(chi(q, 1.0)) / std::abs(q.log()) * std::abs(tw_mean) / std::cbrt(4096.0 * 4096.0);
  o.detail << "|mean X/N - (f-1)| " << dev[0] << " (F_GUE mean offset predicts " << offset
           << "), |mean X/N - (g-1)| " << dev[1];
}

void phase_transition(Outcome& o) {
  const fs::path cache = fs::temp_directory_path() / "qtasep_acceptance_tables";
  auto run = [&](Preset p, std::optional<double> alpha) {
    ExperimentConfig c;
    c.preset = p;
    c.alpha = alpha;
    c.threads = workers();
    return run_experiment(c, cache);
  };
  auto trend = [](const ExperimentResult& r) {
    std::ostringstream s;
    for (std::size_t i = 0; i < r.entries.size(); ++i) s << (i ? "/" : "") << r.entries[i].ks;
    return s.str();
  };
  // A miss at threshold with KS decreasing at every step is a soft pass.
  auto strictly_decreasing = [](const ExperimentResult& r) {
    return count_decreasing_steps(r.entries) + 1 == r.entries.size();
  };
  auto check = [&](bool at_threshold, bool extra, const ExperimentResult& r, const std::string& what) {
    if (at_threshold && extra) return;
    if (!at_threshold && extra && strictly_decreasing(r)) {
      o.soft = true;
      o.failures += (o.failures.empty() ? "soft: " : "; soft: ") + what;
      return;
    }
    o.require(false, what);
  };

  const auto gue = run(Preset::Gue, std::nullopt);
  const double ks_gue = gue.entries.back().ks;
  check(ks_gue <= 0.10, gue.trend_ok, gue, "GUE KS <= 0.10 with decreasing trend");

  const auto gau = run(Preset::Gaussian, 0.4);
  const double ks_gau = gau.entries.back().ks;
  check(ks_gau <= 0.06, true, gau, "Gaussian KS <= 0.06");

  const auto cri = run(Preset::Critical, std::nullopt);
  const auto& last = cri.entries.back();
  const double alt_gue = last.alternatives.at("F_GUE"), alt_phi = last.alternatives.at("G_1");
  const bool discriminates = last.ks < alt_gue && last.ks < alt_phi;
  o.require(discriminates, "critical KS below KS against F_GUE and Phi");
  check(last.ks <= 0.10, true, cri, "critical KS <= 0.10");

  o.detail << "KS at N=128/256/512/1024: GUE " << trend(gue) << "; Gaussian " << trend(gau) << "; critical "
           << trend(cri) << " (vs F_GUE " << alt_gue << ", vs Phi " << alt_phi << ")";
}

void reproducibility(Outcome& o) {
  const fs::path dir = fs::temp_directory_path() / "qtasep_acceptance_replay";
  fs::remove_all(dir);
  ExperimentConfig c;
  c.preset = Preset::Critical;
  c.N_list = {64, 128};
  c.runs = 200;
  c.seed = 99;
  c.threads = 1;
  const auto a = run_experiment(c, dir / "cache");
  write_experiment(a, dir / "a");
  std::ifstream in(dir / "a" / "manifest.json");
  ExperimentConfig replay = ExperimentConfig::from_json(nlohmann::json::parse(in));
  replay.threads = 4;
  write_experiment(run_experiment(replay, dir / "cache"), dir / "b");
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
  };
  const std::string sa = slurp(dir / "a" / "samples.csv"), sb = slurp(dir / "b" / "samples.csv");
  o.require(!sa.empty() && sa == sb, "samples.csv byte-identical");
  o.detail << "replay with 4 threads vs 1: " << (sa == sb ? "byte-identical" : "differs") << " (" << sa.size()
           << " bytes)";
  fs::remove_all(dir);
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<void(Outcome&)>> criteria[] = {
      {"special-function ladder", special_function_ladder},
      {"phase-boundary continuity", boundary_continuity},
      {"saddle identities", saddle_identities},
      {"limit-law numerics", limit_numerics},
      {"simulator micro-oracles", simulator_oracles},
      {"hydrodynamic LLN", hydrodynamic_lln},
      {"phase transition at desk scale", phase_transition},
      {"reproducibility", reproducibility},
  };
  int failed = 0;
  int id = 1;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    o.detail.precision(3);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += o.pass ? 0 : 1;
    std::string line = o.detail.str();
    if (!o.failures.empty()) line += " [" + o.failures + "]";
    std::printf("criterion %d %s: %s (%.1f s): %s\n", id++, o.pass ? (o.soft ? "SOFT-PASS" : "PASS") : "FAIL",
                name, secs, line.c_str());
    std::fflush(stdout);
  }
  return failed;
}
