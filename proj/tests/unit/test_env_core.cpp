#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "dreamlab/env_core.hpp"
#include "dreamlab/tabular_lab.hpp"

using namespace dreamlab;

namespace {

ProblemFamily counting_family(int n) {
  ProblemFamily f;
  f.name = "counting";
  f.problem_count = n;
  f.horizon = 3;
  f.action_count = 2;
  f.train.resize(static_cast<std::size_t>(n));
  std::iota(f.train.begin(), f.train.end(), 0);
  return f;
}

// Walks a counter; reward 1 for action 1, done when the counter reaches 2.
class CounterEnv final : public Environment {
 public:
  CounterEnv() {
    fam_ = counting_family(1);
    fam_.horizon = 5;
    fam_.feature_cardinalities = {6};
  }
  const ProblemFamily& family() const override { return fam_; }
  std::vector<GoalId> goals_for(ProblemId) const override { return {0, 1, 2}; }
  EnvState initial_state(ProblemId) const override { return {0}; }
  StepResult step(const EnvState& s, int a, ProblemId, GoalId, EpisodeMode) const override {
    StepResult r{{s[0] + a}, a == 1 ? 1.0 : 0.0, false};
    r.done = r.state[0] >= 2;
    return r;
  }
  Observation observe(const EnvState& s, ProblemId, GoalId) const override { return s; }

 private:
  ProblemFamily fam_;
};

// Reads the problem id through the guard on every step.
class PeekingPolicy final : public Policy {
 public:
  void begin_episode(const EpisodeContext& ctx) override { (void)ctx.problem.read(); }
  int act(const Trajectory&, Rng&) override { return 0; }
};

}  // namespace

TEST(SampleProblem, SingletonSplit) {
  auto f = counting_family(3);
  f.train = {0};
  f.test = {1, 2};
  Rng rng(1);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(sample_problem(f, Split::train, rng).index, 0);
}

TEST(SampleProblem, EmptySplitIsConfigError) {
  auto f = counting_family(3);
  Rng rng(1);
  EXPECT_THROW(sample_problem(f, Split::test, rng), ConfigError);
}

TEST(SampleProblem, UniformOverSplit) {
  auto f = counting_family(24);
  Rng rng(7);
  std::vector<int> hits(24, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++hits[static_cast<std::size_t>(sample_problem(f, Split::train, rng).index)];
  const double p = 1.0 / 24.0;
  const double sigma = std::sqrt(n * p * (1 - p));
  double chi2 = 0.0;
  for (int h : hits) {
    EXPECT_LT(std::abs(h - n * p), 3 * sigma + 1);
    chi2 += (h - n * p) * (h - n * p) / (n * p);
  }
  // 23 dof, 99.9% quantile ~ 49.7
  EXPECT_LT(chi2, 49.7);
}

TEST(ProblemFamilyValidate, RejectsOverlapAndRange) {
  auto f = counting_family(4);
  f.train = {0, 1};
  f.test = {1};
  EXPECT_THROW(f.validate(), ConfigError);
  f.test = {4};
  EXPECT_THROW(f.validate(), ConfigError);
  f.test = {2, 3};
  EXPECT_NO_THROW(f.validate());
}

TEST(RunEpisode, BanditHorizonOneHasOneStep) {
  tabular::BanditEnvironment env(tabular::make_bandit_family(2, 1));
  ScriptedPolicy fixed({0});
  Rng rng(3);
  const auto traj = run_episode(fixed, env, ProblemId{1}, kNoGoal, EpisodeMode::exploit, rng);
  EXPECT_EQ(traj.length(), 1u);
  EXPECT_EQ(traj.observations.size(), 2u);
}

TEST(RunEpisode, OutOfRangeActionIsProtocolError) {
  tabular::BanditEnvironment env(tabular::make_bandit_family(2, 1));
  ScriptedPolicy bad({5});
  Rng rng(3);
  EXPECT_THROW(run_episode(bad, env, ProblemId{0}, kNoGoal, EpisodeMode::exploit, rng), ProtocolError);
}

TEST(RunEpisode, StopsOnDone) {
  CounterEnv env;
  ScriptedPolicy ones({1});
  Rng rng(3);
  const auto traj = run_episode(ones, env, ProblemId{0}, 0, EpisodeMode::exploit, rng);
  EXPECT_EQ(traj.length(), 2u);
  EXPECT_TRUE(traj.terminated());
  EXPECT_DOUBLE_EQ(traj.total_return(), 2.0);
}

TEST(Trajectory, PrefixKeepsFirstStepsAndState) {
  CounterEnv env;
  ScriptedPolicy p({0, 0, 1, 1});
  Rng rng(3);
  const auto traj = run_episode(p, env, ProblemId{0}, 0, EpisodeMode::exploit, rng);
  const auto pre = traj.prefix(2);
  EXPECT_EQ(pre.length(), 2u);
  EXPECT_EQ(pre.observations.size(), 3u);
  EXPECT_EQ(pre.observations.back(), traj.observations[2]);
  EXPECT_THROW(traj.prefix(traj.length() + 1), ValidationError);
  EXPECT_EQ(traj.prefix(0).length(), 0u);
}

TEST(RunTrial, CountsTrajectories) {
  CounterEnv env;
  UniformPolicy u(2);
  Rng rng(11);
  const auto rec = run_trial(u, u, env, ProblemId{0}, rng);
  EXPECT_EQ(rec.exploitations.size(), 1u);
  EXPECT_EQ(rec.returns.size(), 1u);
  EXPECT_LE(rec.exploration.length(), 5u);
}

TEST(RunTrial, DeterministicPoliciesGiveIdenticalExploitations) {
  CounterEnv env;
  ScriptedPolicy p({0, 1, 0, 1});
  Rng rng(11);
  TrialOptions opts;
  opts.exploitation_episodes = 3;
  const auto rec = run_trial(p, p, env, ProblemId{0}, rng, opts);
  ASSERT_EQ(rec.returns.size(), 3u);
  EXPECT_EQ(rec.returns[0], rec.returns[1]);
  EXPECT_EQ(rec.returns[1], rec.returns[2]);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(rec.returns[i], rec.exploitations[i].total_return());
}

TEST(RunTrial, BanditRevealThenExploit) {
  const auto fam = tabular::make_bandit_family(2, 1);
  tabular::BanditEnvironment env(fam);
  for (int mu = 0; mu < 2; ++mu) {
    ScriptedPolicy explore({static_cast<int>(fam.a_star)});
    ScriptedPolicy exploit({mu});
    Rng rng(5);
    const auto rec = run_trial(explore, exploit, env, ProblemId{mu}, rng);
    EXPECT_DOUBLE_EQ(rec.returns[0], 1.0);
    EXPECT_DOUBLE_EQ(rec.exploration_return, 0.0);
    EXPECT_EQ(rec.exploration.last_observation().back(), mu + 1);
  }
}

TEST(RunTrial, SameSeedSameRecord) {
  tabular::BanditEnvironment env(tabular::make_bandit_family(3, 2));
  UniformPolicy u(3);
  Rng a(99), b(99);
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(run_trial(u, u, env, ProblemId{i % 9}, a), run_trial(u, u, env, ProblemId{i % 9}, b));
  }
}

TEST(RunTrial, ExplorationGoalHiddenByDefault) {
  CounterEnv env;
  ScriptedPolicy p({1});
  Rng rng(2);
  auto rec = run_trial(p, p, env, ProblemId{0}, rng);
  EXPECT_EQ(rec.exploration.goal, kNoGoal);
  EXPECT_NE(rec.exploitations[0].goal, kNoGoal);
  TrialOptions opts;
  opts.exploration_sees_goal = true;
  rec = run_trial(p, p, env, ProblemId{0}, rng, opts);
  EXPECT_EQ(rec.exploration.goal, rec.exploitations[0].goal);
}

TEST(InformationFirewall, ReadingProblemAtMetaTestThrows) {
  CounterEnv env;
  PeekingPolicy peek;
  UniformPolicy u(2);
  Rng rng(1);
  TrialOptions opts;
  EXPECT_NO_THROW(run_trial(u, peek, env, ProblemId{0}, rng, opts));
  opts.meta_test = true;
  EXPECT_THROW(run_trial(u, peek, env, ProblemId{0}, rng, opts), InformationLeak);
  EXPECT_THROW(run_trial(peek, u, env, ProblemId{0}, rng, opts), InformationLeak);
}
