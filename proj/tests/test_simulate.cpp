#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qtasep/simulate.hpp"

using namespace qtasep;

namespace {

struct Moments {
  double mean = 0, se = 0, var = 0;
};

template <typename F>
Moments moments(std::size_t n, F&& draw) {
  double s = 0, s2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = draw();
    s += v;
    s2 += v * v;
  }
  Moments m;
  m.mean = s / static_cast<double>(n);
  m.var = (s2 - static_cast<double>(n) * m.mean * m.mean) / static_cast<double>(n - 1);
  m.se = std::sqrt(m.var / static_cast<double>(n));
  return m;
}

std::int64_t event_sum(const SystemState& s) {
  std::int64_t acc = 0;
  for (std::size_t k = 1; k <= s.size(); ++k) acc += s.position(k) + static_cast<std::int64_t>(k);
  return acc;
}

}  // namespace

TEST(RngStream, Reproducible) {
  RngStream a(5, 3), b(5, 3), c(5, 4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    differs = differs || x != c();
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(a.master_seed(), 5u);
  EXPECT_EQ(a.stream_index(), 3u);
}

TEST(RngStream, UnitConversions) {
  EXPECT_EQ(to_unit(0), 0.0);
  EXPECT_LT(to_unit(~0ull), 1.0);
  EXPECT_GT(to_unit_open_left(0), 0.0);
  EXPECT_EQ(to_unit_open_left(~0ull), 1.0);
}

TEST(RngStream, PoissonMoments) {
  RngStream rng(1, 0);
  for (double lambda : {0.5, 3.0, 9.9, 10.0, 50.0, 1e4, 1e7}) {
    const auto m = moments(200000, [&] { return static_cast<double>(rng.poisson(lambda)); });
    EXPECT_LE(std::abs(m.mean - lambda), 4 * std::sqrt(lambda / 200000)) << "lambda=" << lambda;
    EXPECT_NEAR(m.var / lambda, 1.0, 0.02) << "lambda=" << lambda;
  }
  EXPECT_EQ(rng.poisson(0.0), 0u);
  EXPECT_THROW(rng.poisson(-1.0), std::invalid_argument);
}

TEST(RngStream, PoissonPmfAboveSwitchover) {
  RngStream rng(2, 0);
  const double lambda = 30.0;
  const int n = 400000;
  std::vector<int> counts(200, 0);
  for (int i = 0; i < n; ++i) {
    const auto k = rng.poisson(lambda);
    if (k < counts.size()) ++counts[k];
  }
  for (int k : {15, 22, 28, 30, 33, 40, 48}) {
    const double p = std::exp(-lambda + k * std::log(lambda) - std::lgamma(k + 1.0));
    const double se = std::sqrt(p * (1 - p) / n);
    EXPECT_LE(std::abs(counts[k] / double(n) - p), 4.5 * se) << "k=" << k;
  }
}

TEST(NewSystem, Examples) {
  const auto s1 = new_system(1, RateProfile{}, 0.6);
  EXPECT_EQ(s1.position(1), -1);
  EXPECT_EQ(s1.rate(1), 1.0);
  const auto s3 = new_system(3, RateProfile{}, 0.6);
  EXPECT_EQ(s3.rate(1), 1.0);
  EXPECT_EQ(s3.rate(2), 0.0);
  EXPECT_EQ(s3.rate(3), 0.0);
  EXPECT_EQ(s3.positions(), (std::vector<std::int64_t>{-1, -2, -3}));
  EXPECT_EQ(*s3.gap(2), 0);
  EXPECT_FALSE(s3.gap(1).has_value());
  EXPECT_EQ(s3.clock(), 0.0);
  const auto sp = new_system(3, RateProfile::leading(1, 0.4), 0.6);
  EXPECT_EQ(sp.rate(1), 0.4);
  EXPECT_EQ(sp.rate(2), 0.0);
}

TEST(NewSystem, Errors) {
  EXPECT_THROW(new_system(2, RateProfile({{3, 0.5}}), 0.6), ProfileError);
  EXPECT_THROW(new_system(0, RateProfile{}, 0.6), DomainError);
  EXPECT_THROW(new_system(2, RateProfile{}, 1.0), DomainError);
}

TEST(Step, SingleParticleIsPoisson) {
  auto s = new_system(1, RateProfile::leading(1, 0.7), 0.6);
  RngStream rng(3, 0);
  double prev = 0;
  const auto m = moments(100000, [&] {
    const auto j = s.step(rng);
    EXPECT_EQ(j.particle, 1u);
    const double dt = j.time - prev;
    prev = j.time;
    return dt;
  });
  EXPECT_LE(std::abs(m.mean - 1 / 0.7), 4 * m.se);
  EXPECT_EQ(s.events(), 100000u);
}

TEST(Step, FirstEventMovesLeader) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto s = new_system(2, RateProfile{}, 0.5);
    RngStream rng(seed, 0);
    EXPECT_EQ(s.step(rng).particle, 1u);
  }
}

TEST(Step, InvariantsUnderManyEvents) {
  auto s = new_system(50, RateProfile({{3, 0.5}, {10, 0.8}}), 0.6);
  RngStream rng(4, 0);
  for (int i = 0; i < 200000; ++i) {
    s.step(rng);
    if (i % 997 == 0) {
      EXPECT_NO_THROW(s.check_exclusion());
      EXPECT_EQ(event_sum(s), static_cast<std::int64_t>(s.events()));
    }
  }
  for (std::size_t k = 1; k <= s.size(); ++k) {
    if (k > 1) EXPECT_EQ(s.rate(k) == 0.0, *s.gap(k) == 0);
  }
  EXPECT_EQ(s.rate(1), s.base_rate(1));
  double total = 0;
  for (std::size_t k = 1; k <= s.size(); ++k) total += s.rate(k);
  EXPECT_NEAR(s.total_rate(), total, 1e-9 * total);
  EXPECT_LE(s.rebuild(), 1e-9);
}

TEST(Step, TwoParticleMeanMatchesCtmcOracle) {
  const double oracle = oracle::ctmc_two_particle_mean(0.5, 1.0, 40);
  RngStream rng(5, 0);
  const auto m = moments(200000, [&] {
    auto s = new_system(2, RateProfile{}, 0.5);
    while (true) {
      auto probe = s;
      if (probe.step(rng).time > 1.0) break;
      s = probe;
    }
    return static_cast<double>(s.position(2) + 2);
  });
  EXPECT_LE(std::abs(m.mean - oracle), 4 * m.se) << "oracle=" << oracle << " mc=" << m.mean;
}

TEST(RunUntil, TwoParticleMeanMatchesCtmcOracle) {
  const double oracle = oracle::ctmc_two_particle_mean(0.5, 1.0, 40);
  // Truncation at gap 40 is invisible: the result is stable against 60.
  EXPECT_NEAR(oracle, oracle::ctmc_two_particle_mean(0.5, 1.0, 60), 1e-14);
  RngStream rng(6, 0);
  const auto m = moments(1000000, [&] {
    auto s = new_system(2, RateProfile{}, 0.5);
    s.run_until(1.0, rng);
    return static_cast<double>(s.position(2) + 2);
  });
  EXPECT_LE(std::abs(m.mean - oracle), 4 * m.se) << "oracle=" << oracle << " mc=" << m.mean;
}

TEST(RunUntil, Examples) {
  RngStream rng(7, 0);
  auto s = new_system(3, RateProfile{}, 0.6);
  s.run_until(0.0, rng);
  EXPECT_EQ(s.positions(), (std::vector<std::int64_t>{-1, -2, -3}));
  EXPECT_EQ(s.clock(), 0.0);

  auto one = new_system(1, RateProfile{}, 0.6);
  one.run_until(1e4, rng);
  EXPECT_LE(std::abs(static_cast<double>(one.position(1) + 1) - 1e4), 4 * std::sqrt(1e4));
  EXPECT_EQ(one.clock(), 1e4);
  EXPECT_THROW(one.run_until(1.0, rng), DomainError);
}

TEST(RunUntil, Deterministic) {
  auto a = new_system(64, RateProfile::leading(2, 0.5), 0.6);
  auto b = new_system(64, RateProfile::leading(2, 0.5), 0.6);
  RngStream ra(9, 17), rb(9, 17);
  a.run_until(300.0, ra);
  b.run_until(300.0, rb);
  EXPECT_EQ(a.positions(), b.positions());
  EXPECT_EQ(a.events(), b.events());
}

TEST(RunUntil, InvariantsAndRebuild) {
  auto s = new_system(200, RateProfile::leading(1, 0.4), 0.6);
  RngStream rng(10, 0);
  s.run_until(500.0, rng);
  EXPECT_NO_THROW(s.check_exclusion());
  EXPECT_EQ(event_sum(s), static_cast<std::int64_t>(s.events()));
  EXPECT_LE(s.rebuild(), 0.0);
  // Gillespie steps continue seamlessly from the uniformized state.
  for (int i = 0; i < 1000; ++i) s.step(rng);
  EXPECT_EQ(event_sum(s), static_cast<std::int64_t>(s.events()));
}

TEST(RunUntil, Budgets) {
  SimulatorLimits lim;
  lim.event_budget = 10;
  SystemState s(5, RateProfile{}, 0.6, lim);
  RngStream rng(11, 0);
  EXPECT_THROW(s.run_until(1000.0, rng), BudgetError);
  SimulatorLimits rl;
  rl.ring_budget = 100;
  SystemState r(5, RateProfile{}, 0.6, rl);
  EXPECT_THROW(r.run_until(1000.0, rng), BudgetError);
}

TEST(RunUntil, ClassicalTasepAtQZero) {
  auto s = new_system(4, RateProfile{}, 0.0);
  RngStream rng(12, 0);
  s.run_until(200.0, rng);
  EXPECT_NO_THROW(s.check_exclusion());
  for (std::size_t k = 2; k <= 4; ++k) {
    EXPECT_EQ(s.hop_probability(k), *s.gap(k) >= 1 ? 1.0 : 0.0);
  }
  const auto m = moments(20000, [&] {
    auto t = new_system(1, RateProfile{}, 0.0);
    t.run_until(5.0, rng);
    return static_cast<double>(t.position(1) + 1);
  });
  EXPECT_LE(std::abs(m.mean - 5.0), 4 * m.se);
}

TEST(KeyedDriver, TruncationIsExact) {
  const RateProfile prof = RateProfile::leading(1, 0.5);
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    auto small = new_system(8, prof, 0.6);
    auto large = new_system(16, prof, 0.6);
    KeyedDriver ds(small, seed), dl(large, seed);
    for (double t : {5.0, 20.0, 60.0}) {
      ds.run_until(t);
      dl.run_until(t);
      const auto ps = small.positions();
      auto pl = large.positions();
      pl.resize(8);
      EXPECT_EQ(ps, pl) << "seed=" << seed << " t=" << t;
    }
    EXPECT_NO_THROW(large.check_exclusion());
    EXPECT_EQ(event_sum(large), static_cast<std::int64_t>(large.events()));
  }
}

TEST(KeyedDriver, MatchesCtmcOracle) {
  const double oracle = oracle::ctmc_two_particle_mean(0.5, 1.0, 40);
  std::uint64_t seed = 0;
  const auto m = moments(200000, [&] {
    auto s = new_system(2, RateProfile{}, 0.5);
    KeyedDriver d(s, seed++);
    d.run_until(1.0);
    return static_cast<double>(s.position(2) + 2);
  });
  EXPECT_LE(std::abs(m.mean - oracle), 4 * m.se);
}

TEST(XiSample, SingleParticleIsPoisson) {
  const QParams q(0.6);
  const double k = kappa(q, 1.0);
  RngStream rng(13, 0);
  const auto m = moments(20000, [&] {
    const auto s = xi_sample(q, 1.0, 0.0, 1, RateProfile{}, rng);
    EXPECT_EQ(s.tau, k);
    return static_cast<double>(s.X + 1);
  });
  EXPECT_LE(std::abs(m.mean - k), 4 * m.se);
  EXPECT_NEAR(m.var / k, 1.0, 0.05);
}

TEST(MonteCarlo, SingleRunMatchesStreamZero) {
  MonteCarloConfig cfg;
  cfg.N_list = {32};
  cfg.runs = 1;
  cfg.master_seed = 21;
  const auto rows = monte_carlo(cfg);
  ASSERT_EQ(rows.size(), 1u);
  RngStream rng(21, 0);
  const auto s = xi_sample(QParams(0.6), 1.0, 0.0, 32, RateProfile{}, rng);
  EXPECT_EQ(rows[0].X, s.X);
  EXPECT_EQ(rows[0].xi, s.xi);
  EXPECT_EQ(rows[0].seed_index, 0u);
}

TEST(MonteCarlo, ThreadCountInvariance) {
  MonteCarloConfig cfg;
  cfg.N_list = {16, 64};
  cfg.runs = 40;
  cfg.profile = RateProfile::leading(1, 0.4);
  cfg.master_seed = 8;
  cfg.threads = 1;
  const auto a = monte_carlo(cfg);
  cfg.threads = 8;
  const auto b = monte_carlo(cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].N, b[i].N);
    EXPECT_EQ(a[i].run, b[i].run);
    EXPECT_EQ(a[i].X, b[i].X);
    EXPECT_EQ(a[i].xi, b[i].xi);
  }
  EXPECT_EQ(a.front().N, 16u);
  EXPECT_EQ(a.back().N, 64u);
  EXPECT_EQ(a.back().run, 39u);
}

TEST(MonteCarlo, Validation) {
  MonteCarloConfig cfg;
  cfg.N_list = {8};
  cfg.runs = 0;
  EXPECT_THROW(monte_carlo(cfg), ValidationError);
  cfg.runs = 1;
  cfg.N_list = {};
  EXPECT_THROW(monte_carlo(cfg), ValidationError);
  cfg.N_list = {2};
  cfg.profile = RateProfile({{5, 0.5}});
  EXPECT_THROW(monte_carlo(cfg), ProfileError);
}
