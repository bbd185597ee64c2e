#pragma once

// Exact simulation of q-TASEP from step initial condition with
// a finite rate perturbation.
//
// Particle k (1-based) sits at x_k, with x_1 > x_2 > ... > x_M, and jumps one
// site to the right at rate a_k (1 - q^{gap_k}), gap_k = x_{k-1} - x_k - 1 and
// x_0 = +inf. The jump rate of particle k only depends on particle k-1, so
// the first N particles of any M >= N system follow the law of the first N
// particles of the infinite system.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qtasep/errors.hpp"
#include "qtasep/hydro.hpp"
#include "qtasep/rng.hpp"

namespace qtasep {

/// Fenwick tree over per-particle rates with O(log M) update and
/// inverse-prefix-sum search. Indices are 1-based.
class RateTree {
 public:
  RateTree() = default;

  void assign(const std::vector<double>& rates, std::size_t count) {
    n_ = 1;
    while (n_ < count) n_ <<= 1;
    t_.assign(n_ + 1, 0.0);
    for (std::size_t i = 1; i <= count; ++i) t_[i] = rates[i];
    for (std::size_t i = 1; i <= n_; ++i) {
      const std::size_t j = i + (i & (~i + 1));
      if (j <= n_) t_[j] += t_[i];
    }
  }

  void add(std::size_t i, double delta) {
    for (; i <= n_; i += i & (~i + 1)) t_[i] += delta;
  }

  double total() const { return t_[n_]; }

  /// Smallest index whose prefix sum exceeds u, for u in [0, total()).
  std::size_t find(double u) const {
    // The root covers everything and is never taken, so descent starts one
    // level down and every probed node stays inside the tree.
    std::size_t pos = 0;
    for (std::size_t step = n_ >> 1; step != 0; step >>= 1) {
      const double v = t_[pos + step];
      const bool take = v <= u;
      pos += take ? step : 0;
      u -= take ? v : 0.0;
    }
    return pos + 1;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> t_;
};

struct SimulatorLimits {
  std::uint64_t event_budget = 1'000'000'000ull;
  std::uint64_t exclusion_check_period = std::uint64_t{1} << 16;
  std::uint64_t rebuild_period = std::uint64_t{1} << 20;
  std::uint64_t ring_budget = 100'000'000'000ull;
};

struct JumpRecord {
  std::size_t particle;
  double time;
};

/// Mutable configuration of a finite q-TASEP system. Confined to one thread.
class SystemState {
 public:
  /// Step initial condition x_k = -k for k = 1..M. q may be 0 (TASEP).
  SystemState(std::size_t M, const RateProfile& profile, double q, SimulatorLimits limits = {})
      : M_(M), q_(q), limits_(limits) {
    if (M < 1) throw DomainError("M must be >= 1");
    if (!(q >= 0.0 && q < 1.0)) throw DomainError("simulator requires q in [0,1)");
    if (profile.max_index() > M) {
      throw ProfileError("perturbed particle " + std::to_string(profile.max_index()) +
                         " exceeds M = " + std::to_string(M));
    }
    // one_minus_qpow_[g] = 1 - q^g; beyond the table q^g underflows against 1.
    one_minus_qpow_.push_back(0.0);
    double qg = 1.0;
    while (true) {
      qg *= q;
      if (1.0 - qg == 1.0) break;
      one_minus_qpow_.push_back(1.0 - qg);
    }
    x_.assign(M + 1, 0);
    x_[0] = kInfinity;
    a_.assign(M + 1, 1.0);
    for (std::size_t k = 1; k <= M; ++k) {
      x_[k] = -static_cast<std::int64_t>(k);
      a_[k] = profile.rate_of(k);
    }
    a_max_ = *std::max_element(a_.begin() + 1, a_.end());
    a_scaled_.assign(M + 1, 0.0);
    for (std::size_t k = 1; k <= M; ++k) a_scaled_[k] = a_[k] / a_max_;
    r_.assign(M + 1, 0.0);
    for (std::size_t k = 1; k <= M; ++k) r_[k] = rate_for(k);
    tree_.assign(r_, M_);
  }

  std::size_t size() const { return M_; }
  double q() const { return q_; }
  double clock() const { return clock_; }
  std::uint64_t events() const { return events_; }
  /// Position of particle k (1-based).
  std::int64_t position(std::size_t k) const { return x_[k]; }
  /// Number of empty sites in front of particle k; k = 1 has an infinite gap.
  std::optional<std::int64_t> gap(std::size_t k) const {
    if (k == 1) return std::nullopt;
    return x_[k - 1] - x_[k] - 1;
  }
  double rate(std::size_t k) const { return r_[k]; }
  double base_rate(std::size_t k) const { return a_[k]; }
  double total_rate() const { return tree_.total(); }
  std::vector<std::int64_t> positions() const { return {x_.begin() + 1, x_.end()}; }

  /// One Gillespie event: Exp(total) holding time, then particle k with
  /// probability r_k / total.
  template <typename Rng>
  JumpRecord step(Rng& rng) {
    const double total = tree_.total();
    if (!(total > 0.0)) throw DeadlockError("total jump rate is zero");
    clock_ += -std::log(to_unit_open_left(rng())) / total;
    const std::size_t k = select(rng, total);
    jump(k);
    return {k, clock_};
  }

  /// Advances to time tau: all events with time <= tau are applied and the
  /// clock is set to tau. Uses uniformization: Poisson(M a_max (tau - t))
  /// rings, each picking a uniform particle and moving it with probability
  /// r_k / a_max. The sum tree is rebuilt once at the end.
  template <typename Rng>
  void run_until(double tau, Rng& rng) {
    if (tau < clock_) throw DomainError("run_until: tau precedes the current clock");
    const double lambda = static_cast<double>(M_) * a_max_ * (tau - clock_);
    if (lambda > static_cast<double>(limits_.ring_budget)) throw BudgetError("ring budget exceeded");
    const std::uint64_t rings = poisson_draw(rng, lambda);
    const std::uint64_t m = M_;
    for (std::uint64_t i = 0; i < rings; ++i) {
      const std::size_t k = 1 + static_cast<std::size_t>(bounded(rng, m));
      const double p = a_scaled_[k] * hop_probability(k);
      if (to_unit(rng()) < p) {
        ++x_[k];
        count_event();
      }
    }
    clock_ = tau;
    rebuild();
  }

  /// Applies a jump of particle k without touching the clock. Used by the
  /// keyed driver; the caller is responsible for the jump being allowed.
  void jump(std::size_t k) {
    ++x_[k];
    refresh_rate(k);
    if (k < M_) refresh_rate(k + 1);
    count_event();
    if ((events_ & (limits_.rebuild_period - 1)) == 0) rebuild();
  }

  void advance_clock_to(double t) { clock_ = t; }

  /// Recomputes every rate from positions and rebuilds the sum tree;
  /// returns the largest discrepancy against the incremental rates.
  double rebuild() {
    double worst = 0.0;
    for (std::size_t k = 1; k <= M_; ++k) {
      const double fresh = rate_for(k);
      worst = std::max(worst, std::abs(fresh - r_[k]));
      r_[k] = fresh;
    }
    tree_.assign(r_, M_);
    return worst;
  }

  void check_exclusion() const {
    for (std::size_t k = 2; k <= M_; ++k) {
      if (!(x_[k] < x_[k - 1])) throw std::logic_error("exclusion violated");
    }
  }

  /// 1 - q^gap for the current gap of particle k.
  double hop_probability(std::size_t k) const {
    const std::int64_t gp = x_[k - 1] - x_[k] - 1;
    return static_cast<std::size_t>(gp) < one_minus_qpow_.size()
               ? one_minus_qpow_[static_cast<std::size_t>(gp)]
               : 1.0;
  }

 private:
  static constexpr std::int64_t kInfinity = std::numeric_limits<std::int64_t>::max() / 4;

  double rate_for(std::size_t k) const { return a_[k] * hop_probability(k); }

  void count_event() {
    ++events_;
    if (events_ > limits_.event_budget) throw BudgetError("event budget exceeded");
    if ((events_ & (limits_.exclusion_check_period - 1)) == 0) check_exclusion();
  }

  template <typename Rng>
  static std::uint64_t poisson_draw(Rng& rng, double mean) {
    if constexpr (requires { rng.poisson(mean); }) {
      return rng.poisson(mean);
    } else {
      std::poisson_distribution<std::uint64_t> d(mean);
      return d(rng);
    }
  }

  // Unbiased integer in [0, m) by multiply-and-reject.
  template <typename Rng>
  static std::uint64_t bounded(Rng& rng, std::uint64_t m) {
    unsigned __int128 prod = static_cast<unsigned __int128>(rng()) * m;
    auto low = static_cast<std::uint64_t>(prod);
    if (low < m) {
      const std::uint64_t threshold = (0 - m) % m;
      while (low < threshold) {
        prod = static_cast<unsigned __int128>(rng()) * m;
        low = static_cast<std::uint64_t>(prod);
      }
    }
    return static_cast<std::uint64_t>(prod >> 64);
  }

  void refresh_rate(std::size_t k) {
    const double fresh = rate_for(k);
    const double delta = fresh - r_[k];
    if (delta != 0.0) {
      r_[k] = fresh;
      tree_.add(k, delta);
    }
  }

  template <typename Rng>
  std::size_t select(Rng& rng, double total) {
    // Rounding in the tree can land on a blocked particle with probability
    // of order 1e-16; such draws are repeated.
    while (true) {
      const std::size_t k = tree_.find(to_unit(rng()) * total);
      if (k <= M_ && r_[k] > 0.0) return k;
    }
  }

  std::size_t M_;
  double q_;
  SimulatorLimits limits_;
  std::vector<double> one_minus_qpow_;
  std::vector<std::int64_t> x_;
  std::vector<double> a_;
  std::vector<double> a_scaled_;
  double a_max_ = 1.0;
  std::vector<double> r_;
  RateTree tree_;
  double clock_ = 0.0;
  std::uint64_t events_ = 0;
};

inline SystemState new_system(std::size_t M, const RateProfile& profile, double q,
                              SimulatorLimits limits = {}) {
  return SystemState(M, profile, q, limits);
}

/// Alternative driver in which particle k owns a rate-a_k Poisson clock
/// whose n-th ring time and acceptance coin come from keyed_bits(seed, k, .).
/// A ring is accepted with probability 1 - q^gap. Particle k's trajectory is
/// then a function of its own keys and of particle k-1 only, so the first N
/// trajectories do not depend on M. Slower than run_until; used to
/// test truncation exactness.
class KeyedDriver {
 public:
  KeyedDriver(SystemState& state, std::uint64_t seed)
      : state_(state), seed_(seed), rings_(state.size() + 1, 0), next_(state.size() + 1, 0.0) {
    for (std::size_t k = 1; k <= state_.size(); ++k) {
      next_[k] = state_.clock() + draw_holding(k);
      heap_.push({next_[k], k});
    }
  }

  void run_until(double tau) {
    if (tau < state_.clock()) throw DomainError("run_until: tau precedes the current clock");
    while (!heap_.empty() && heap_.top().first <= tau) {
      const auto [t, k] = heap_.top();
      heap_.pop();
      const double coin = to_unit(keyed_bits(seed_, k, 2 * rings_[k] + 1));
      ++rings_[k];
      state_.advance_clock_to(t);
      if (coin < state_.hop_probability(k)) state_.jump(k);
      next_[k] = t + draw_holding(k);
      heap_.push({next_[k], k});
    }
    state_.advance_clock_to(tau);
  }

 private:
  double draw_holding(std::size_t k) const {
    const double u = to_unit_open_left(keyed_bits(seed_, k, 2 * rings_[k]));
    return -std::log(u) / state_.base_rate(k);
  }

  using Entry = std::pair<double, std::size_t>;
  SystemState& state_;
  std::uint64_t seed_;
  std::vector<std::uint64_t> rings_;
  std::vector<double> next_;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap_;
};

struct XiSample {
  double tau;
  std::int64_t X;
  double xi;
};

/// Simulates M = N particles up to the plan's time and rescales X_N.
template <typename Rng>
XiSample xi_sample(const QParams& q, const ScalingPlan& plan, const RateProfile& profile, Rng& rng,
                   SimulatorLimits limits = {}) {
  SystemState s(plan.N, profile, q.value(), limits);
  s.run_until(plan.tau, rng);
  const std::int64_t X = s.position(plan.N);
  return {plan.tau, X, plan.xi_of_position(static_cast<double>(X))};
}

template <typename Rng>
XiSample xi_sample(const QParams& q, double theta, double c, std::size_t N,
                   const RateProfile& profile, Rng& rng) {
  return xi_sample(q, scaling_plan(q, theta, c, N, profile), profile, rng);
}

struct SampleRecord {
  std::size_t N;
  std::size_t run;
  std::uint64_t seed_index;
  double tau;
  std::int64_t X;
  double xi;
};

struct MonteCarloConfig {
  double q = 0.6;
  double theta = 1.0;
  double c = 0.0;
  std::vector<std::size_t> N_list;
  std::size_t runs = 1;
  RateProfile profile;
  std::uint64_t master_seed = 0;
  unsigned threads = 1;
  // Optional per-N overrides (rates that scale with N, forced phase).
  std::function<RateProfile(std::size_t)> profile_for_N;
  std::optional<Phase> forced_phase;
};

/// Runs `runs` trajectories for every N. Run j always uses stream index j,
/// so the table depends only on the config and seed, never on threads.
/// Output is sorted by (N in list order, run).
inline std::vector<SampleRecord> monte_carlo(const MonteCarloConfig& cfg) {
  if (cfg.runs < 1) throw ValidationError("runs must be >= 1");
  if (cfg.N_list.empty()) throw ValidationError("N_list is empty");
  const QParams q(cfg.q);
  struct Job {
    ScalingPlan plan;
    RateProfile profile;
  };
  std::vector<Job> per_n;
  for (std::size_t N : cfg.N_list) {
    RateProfile prof = cfg.profile_for_N ? cfg.profile_for_N(N) : cfg.profile;
    if (prof.max_index() > N) throw ProfileError("perturbed particle index exceeds N");
    ScalingPlan plan = [&] {
      if (!cfg.forced_phase) return scaling_plan(q, cfg.theta, cfg.c, N, prof);
      if (*cfg.forced_phase == Phase::Gaussian) {
        return gaussian_scaling(q, cfg.theta, prof.alpha(), cfg.c, N);
      }
      return kpz_scaling(q, cfg.theta, cfg.c, N, *cfg.forced_phase);
    }();
    per_n.push_back({plan, std::move(prof)});
  }

  const std::size_t total = per_n.size() * cfg.runs;
  std::vector<SampleRecord> out(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      const std::size_t ni = i / cfg.runs;
      const std::size_t run = i % cfg.runs;
      RngStream rng(cfg.master_seed, run);
      const auto s = xi_sample(q, per_n[ni].plan, per_n[ni].profile, rng);
      out[i] = {cfg.N_list[ni], run, run, s.tau, s.X, s.xi};
    }
  };
  const unsigned nt = std::max(1u, cfg.threads);
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(nt);
    for (unsigned t = 0; t < nt; ++t) {
      pool.emplace_back([&, t] {
        try {
          worker();
        } catch (...) {
          errors[t] = std::current_exception();
          next = total;
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return out;
}

}  // namespace qtasep
