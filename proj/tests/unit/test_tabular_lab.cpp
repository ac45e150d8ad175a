#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include "dreamlab/tabular_lab.hpp"

using namespace dreamlab;
using namespace dreamlab::tabular;

namespace {

// Exact E[T] for the DREAM certificate by an absorbing Markov chain over
// (star seen, rows with 0 distinct problems, rows with 1). Rows are
// exchangeable, so counts suffice. Independent of the quadrature oracle.
double dream_chain_expectation(int action_count, int horizon) {
  const auto fam = make_bandit_family(action_count, horizon);
  const double n = static_cast<double>(fam.sequence_count);
  const double m = static_cast<double>(fam.problem_count);
  const int rows = static_cast<int>(fam.sequence_count) - 1;
  std::map<std::tuple<int, int, int>, double> memo;
  auto solve = [&](auto&& self, int star, int n0, int n1) -> double {
    if (star == 1 && n0 == 0 && n1 == 0) return 0.0;
    const auto key = std::make_tuple(star, n0, n1);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    double stay = 0.0;
    double rest = 1.0;
    if (star == 0) rest += (1.0 / n) * self(self, 1, n0, n1);
    else stay += 1.0 / n;
    if (n0 > 0) rest += (n0 / n) * self(self, star, n0 - 1, n1 + 1);
    if (n1 > 0) {
      rest += (n1 / n) * ((m - 1) / m) * self(self, star, n0, n1 - 1);
      stay += (n1 / n) / m;
    }
    stay += (rows - n0 - n1) / n;
    const double e = rest / (1.0 - stay);
    memo[key] = e;
    return e;
  };
  return solve(solve, 0, rows, 0);
}

double rl2_chain_expectation(int action_count, int horizon) {
  const auto fam = make_bandit_family(action_count, horizon);
  const double m = static_cast<double>(fam.problem_count);
  const double p = 1.0 / (m * static_cast<double>(fam.sequence_count) * static_cast<double>(fam.sequence_count));
  double e = 0.0;
  for (int k = 0; k < fam.problem_count; ++k) e += 1.0 / ((m - k) * p);
  return e;
}

}  // namespace

TEST(BanditFamily, BaseTwoHorizonOne) {
  const auto f = make_bandit_family(2, 1);
  EXPECT_EQ(f.problem_count, 2);
  EXPECT_EQ(f.a_star, 1);
  EXPECT_EQ(f.decode(f.a_mu(0)), std::vector<int>{0});
  EXPECT_EQ(f.decode(f.a_mu(1)), std::vector<int>{1});
  EXPECT_EQ(make_bandit_family(8, 1).problem_count, 8);
}

TEST(BanditFamily, DigitBijection) {
  const auto f = make_bandit_family(3, 2);
  EXPECT_EQ(f.decode(5), (std::vector<int>{2, 1}));
  EXPECT_EQ(f.decode(f.a_star), (std::vector<int>{2, 2}));
  std::vector<int> hit(9, 0);
  for (std::int64_t mu = 0; mu < f.problem_count; ++mu) {
    const auto digits = f.decode(f.a_mu(mu));
    std::int64_t value = 0, place = 1;
    for (int d : digits) {
      value += d * place;
      place *= 3;
    }
    EXPECT_EQ(value, mu);
    EXPECT_EQ(f.encode(digits), mu);
    ++hit[static_cast<std::size_t>(f.a_mu(mu))];
  }
  for (int h : hit) EXPECT_EQ(h, 1);
}

TEST(BanditFamily, RejectsBadParameters) {
  EXPECT_THROW(make_bandit_family(1, 3), ConfigError);
  EXPECT_THROW(make_bandit_family(2, 0), ConfigError);
  EXPECT_THROW(make_bandit_family(10, 30), ConfigError);
}

TEST(Explore, OnlyStarReveals) {
  const auto f = make_bandit_family(3, 1);
  EXPECT_EQ(explore(f, f.a_star, 1).revealed, std::optional<std::int64_t>(1));
  EXPECT_FALSE(explore(f, 0, 1).revealed.has_value());
}

TEST(SampleSequence, UniformOverSequences) {
  const auto f = make_bandit_family(2, 3);
  Rng rng(4);
  std::vector<int> hits(8, 0);
  const int n = 80000;
  for (int i = 0; i < n; ++i) ++hits[static_cast<std::size_t>(sample_sequence(f, rng))];
  for (int h : hits) EXPECT_NEAR(h, n / 8.0, 3 * std::sqrt(n / 8.0 * 7 / 8.0));
}

TEST(TabularDream, FirstStarTrialTargetIsZero) {
  const auto f = make_bandit_family(2, 1);
  TabularDreamState s(f);
  s.observe(1, f.a_star);
  EXPECT_DOUBLE_EQ(s.decoder(1, explore(f, f.a_star, 1)), 1.0);
  EXPECT_DOUBLE_EQ(s.q_exp(f.a_star), 0.0);
}

TEST(TabularDream, TwoProblemsOnSameSequenceHalve) {
  const auto f = make_bandit_family(2, 1);
  TabularDreamState s(f);
  s.observe(0, 0);
  s.observe(1, 0);
  EXPECT_DOUBLE_EQ(s.decoder(0, explore(f, 0, 0)), 0.5);
  EXPECT_DOUBLE_EQ(s.decoder(1, explore(f, 0, 1)), 0.5);
  EXPECT_NEAR(s.q_exp(0), std::log(0.5), 1e-15);
}

TEST(TabularDream, CountsSumAndDecoderNormalizes) {
  const auto f = make_bandit_family(3, 1);
  TabularDreamState s(f);
  Rng rng(8);
  for (int i = 0; i < 200; ++i) dream_tabular_trial(s, rng);
  for (std::int64_t a = 0; a < f.sequence_count; ++a) {
    if (a == f.a_star) continue;
    const auto tau = explore(f, a, 0);
    std::int64_t sum = 0;
    double q = 0.0;
    for (std::int64_t mu = 0; mu < f.problem_count; ++mu) {
      sum += s.count(mu, tau);
      q += s.decoder(mu, tau);
    }
    EXPECT_EQ(sum, s.count(tau));
    if (s.count(tau) > 0) EXPECT_NEAR(q, 1.0, 1e-12);
  }
}

TEST(TabularDream, QExpMatchesDirectMeanOfLogTargets) {
  const auto f = make_bandit_family(3, 1);
  TabularDreamState s(f, true);
  Rng rng(21);
  for (int i = 0; i < 300; ++i) dream_tabular_trial(s, rng, 0.5);
  for (std::int64_t a = 0; a < f.sequence_count; ++a) {
    double total = 0.0;
    int n = 0;
    for (const auto& e : s.events()) {
      if (e.explore_sequence != a) continue;
      const double q = s.decoder(e.mu, explore(f, a, e.mu));
      ASSERT_GT(q, 0.0);
      total += std::log(q);
      ++n;
    }
    EXPECT_NEAR(s.q_exp(a), n == 0 ? 0.0 : total / n, 1e-12);
  }
}

TEST(CertificateDream, ConditionEnumeration) {
  const auto f = make_bandit_family(2, 1);
  TabularDreamState fresh(f);
  EXPECT_FALSE(certificate_dream(fresh));

  TabularDreamState s(f);
  s.observe(0, 0);
  s.observe(1, 0);
  EXPECT_FALSE(certificate_dream(s));
  s.observe(0, f.a_star);
  EXPECT_TRUE(certificate_dream(s));

  TabularDreamState t(f);
  t.observe(0, 0);
  t.observe(0, 0);
  t.observe(1, f.a_star);
  EXPECT_FALSE(certificate_dream(t));
}

TEST(CertificateDream, AbsorbingAndGreedyStaysOnStar) {
  for (auto [a, h] : {std::pair{2, 1}, std::pair{3, 1}, std::pair{2, 2}}) {
    const auto f = make_bandit_family(a, h);
    Rng rng(100 + a * 10 + h);
    TabularDreamState s(f);
    while (!certificate_dream(s)) dream_tabular_trial(s, rng);
    for (int k = 0; k < 10000; ++k) {
      // Arbitrary continuations, including adversarial greedy play.
      dream_tabular_trial(s, rng, k % 2 == 0 ? 1.0 : 0.0);
      ASSERT_TRUE(certificate_dream(s));
      ASSERT_EQ(s.greedy_sequence(), f.a_star);
    }
  }
}

TEST(TabularRL2, ReturnRecordedAtExploitCell) {
  const auto f = make_bandit_family(3, 1);
  TabularRL2State s(f);
  s.observe(1, 0, f.a_mu(1));
  EXPECT_DOUBLE_EQ(s.q_task(explore(f, 0, 1), f.a_mu(1)), 1.0);
  s.observe(1, 0, 2);
  EXPECT_DOUBLE_EQ(s.q_task(explore(f, 0, 1), 2), 0.0);
  EXPECT_DOUBLE_EQ(s.q_exp(0), 1.0);
}

TEST(TabularRL2, StarValueIsMeanOverRevealedProblems) {
  const auto f = make_bandit_family(2, 1);
  TabularRL2State s(f);
  s.observe(0, f.a_star, f.a_mu(0));  // V = 1
  s.observe(1, f.a_star, f.a_mu(0));  // V = 0
  EXPECT_DOUBLE_EQ(s.q_exp(f.a_star), 0.5);
}

TEST(TabularRL2, MeansReplayFromEventLog) {
  const auto f = make_bandit_family(2, 2);
  TabularRL2State s(f, true);
  Rng rng(3);
  for (int i = 0; i < 3000; ++i) rl2_tabular_trial(s, rng, 0.7);
  std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t>, std::pair<double, int>> cells;
  for (const auto& e : s.events()) {
    const auto tau = explore(f, e.explore_sequence, e.mu);
    const std::int64_t rev = tau.revealed ? *tau.revealed : -1;
    auto& c = cells[{e.explore_sequence, rev, e.exploit_sequence}];
    c.first += e.exploit_return;
    ++c.second;
  }
  for (const auto& [k, c] : cells) {
    const auto [seq, rev, b] = k;
    ExplorationOutcome tau{seq, rev < 0 ? std::nullopt : std::optional<std::int64_t>(rev)};
    EXPECT_DOUBLE_EQ(s.q_task(tau, b), c.first / c.second);
  }
}

TEST(CertificateRL2, ConditionEnumeration) {
  const auto f = make_bandit_family(2, 1);
  TabularRL2State s(f);
  EXPECT_FALSE(certificate_rl2(s));
  s.observe(0, f.a_star, 1);
  s.observe(1, f.a_star, 0);
  EXPECT_FALSE(certificate_rl2(s));
  s.observe(0, f.a_star, 0);
  EXPECT_FALSE(certificate_rl2(s));
  s.observe(1, f.a_star, 1);
  EXPECT_TRUE(certificate_rl2(s));
  s.observe(0, 0, 1);
  EXPECT_TRUE(certificate_rl2(s));
}

TEST(CouponCollector, HandValues) {
  EXPECT_DOUBLE_EQ(coupon_collector_expectation(std::vector<double>{1.0}), 1.0);
  EXPECT_NEAR(coupon_collector_expectation(std::vector<double>{0.5, 0.25, 0.25}), 19.0 / 3.0, 1e-12);
  EXPECT_NEAR(coupon_collector_expectation(std::vector<double>{0.125, 0.125}), 12.0, 1e-12);
  EXPECT_TRUE(std::isinf(coupon_collector_expectation(std::vector<double>{0.5, 0.0})));
  EXPECT_THROW(coupon_collector_expectation(std::vector<double>{0.7, 0.7}), ValidationError);
}

TEST(CouponCollector, EqualProbabilitiesMatchHarmonicSum) {
  for (int k : {1, 5, 16, 40}) {
    const double p = 1.0 / (2.0 * k);
    std::vector<double> probs(static_cast<std::size_t>(k), p);
    double harmonic = 0.0;
    for (int i = 1; i <= k; ++i) harmonic += 1.0 / i;
    EXPECT_NEAR(coupon_collector_expectation(probs), harmonic / p, 1e-8 * harmonic / p);
  }
}

TEST(CouponCollector, MonteCarloCrossCheck) {
  const std::vector<double> probs{0.3, 0.1, 0.1, 0.05};
  Rng rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int runs = 40000;
  double sum = 0.0, sum2 = 0.0;
  for (int r = 0; r < runs; ++r) {
    std::vector<bool> got(probs.size(), false);
    int left = static_cast<int>(probs.size());
    int t = 0;
    while (left > 0) {
      ++t;
      double x = u(rng);
      for (std::size_t i = 0; i < probs.size(); ++i) {
        if (x < probs[i]) {
          if (!got[i]) {
            got[i] = true;
            --left;
          }
          break;
        }
        x -= probs[i];
      }
    }
    sum += t;
    sum2 += double(t) * t;
  }
  const double mean = sum / runs;
  const double se = std::sqrt((sum2 / runs - mean * mean) / runs);
  EXPECT_NEAR(mean, coupon_collector_expectation(probs), 4 * se);
}

TEST(CertificateExpectation, HandDerivedTwoByOne) {
  EXPECT_NEAR(certificate_expectation(AgentKind::dream, 2, 1), 19.0 / 3.0, 1e-9);
  EXPECT_NEAR(certificate_expectation(AgentKind::rl2, 2, 1), 12.0, 1e-9);
}

TEST(CertificateExpectation, MatchesMarkovChainOracle) {
  for (auto [a, h] : {std::pair{2, 1}, std::pair{3, 1}, std::pair{4, 1}, std::pair{2, 2}, std::pair{3, 2},
                      std::pair{10, 1}, std::pair{4, 2}}) {
    const double chain = dream_chain_expectation(a, h);
    EXPECT_NEAR(certificate_expectation(AgentKind::dream, a, h), chain, 1e-7 * chain) << a << "," << h;
    const double rl2 = rl2_chain_expectation(a, h);
    EXPECT_NEAR(certificate_expectation(AgentKind::rl2, a, h), rl2, 1e-8 * rl2) << a << "," << h;
  }
}

TEST(SampleComplexity, MonteCarloMatchesOracleSmall) {
  for (auto agent : {AgentKind::dream, AgentKind::rl2}) {
    const auto res = measure_sample_complexity(agent, 2, 1, 20000);
    EXPECT_EQ(res.censored, 0);
    EXPECT_NEAR(res.mean, certificate_expectation(agent, 2, 1), 3 * res.standard_error);
  }
}

TEST(SampleComplexity, CensoringIsReported) {
  SampleComplexityOptions opts;
  opts.trial_cap = 3;
  const auto res = measure_sample_complexity(AgentKind::rl2, 3, 1, 10, opts);
  EXPECT_EQ(res.censored, 10);
  for (const auto& s : res.seeds) {
    EXPECT_TRUE(s.censored);
    EXPECT_EQ(s.trials, 3);
  }
}

TEST(SampleComplexity, Deterministic) {
  const auto a = measure_sample_complexity(AgentKind::dream, 3, 1, 50);
  const auto b = measure_sample_complexity(AgentKind::dream, 3, 1, 50);
  for (std::size_t i = 0; i < a.seeds.size(); ++i) EXPECT_EQ(a.seeds[i].trials, b.seeds[i].trials);
  EXPECT_EQ(parse_agent_kind("rl2"), AgentKind::rl2);
  EXPECT_THROW(parse_agent_kind("ppo"), ConfigError);
}
