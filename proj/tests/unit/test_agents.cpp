#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "dreamlab/agents/dream.hpp"
#include "dreamlab/agents/erl2.hpp"
#include "dreamlab/gridworlds.hpp"
#include "dreamlab/tabular_lab.hpp"

using namespace dreamlab;
using namespace dreamlab::agents;
using dreamlab::grid::BusWorld;
using dreamlab::grid::reduced_bus_layout;

namespace {

nn::NetShape tiny_shape() {
  nn::NetShape s;
  s.feature_width = 4;
  s.state_widths = {16};
  s.action_width = 4;
  s.reward_width = 4;
  s.done_width = 4;
  s.experience_width = 16;
  s.hidden = 16;
  s.trunk = 16;
  s.z_dim = 8;
  s.encoder_widths = {16};
  s.decoder_hidden = 16;
  s.decoder_widths = {16};
  return s;
}

DreamConfig tiny_dream() {
  DreamConfig c;
  c.learner.shape = tiny_shape();
  c.learner.batch = 4;
  c.learner.lr = 1e-3;
  c.learner.update_every = 1;
  c.learner.target_sync = 50;
  c.explore_epsilon = {1.0, 0.05, 2000};
  c.exploit_epsilon = {1.0, 0.05, 2000};
  return c;
}

Erl2Config tiny_erl2() {
  Erl2Config c;
  c.learner.shape = tiny_shape();
  c.learner.batch = 4;
  c.learner.lr = 1e-3;
  c.learner.update_every = 1;
  c.learner.target_sync = 50;
  c.epsilon = {1.0, 0.05, 2000};
  return c;
}

std::vector<double> flat(nn::ParamRefs params) {
  std::vector<double> out;
  for (auto* p : params) out.insert(out.end(), p->value.data(), p->value.data() + p->value.size());
  return out;
}

tabular::BanditEnvironment bandit(int A, int H) { return tabular::BanditEnvironment(tabular::make_bandit_family(A, H)); }

}  // namespace

TEST(Epsilon, LinearThenFlat) {
  EpsilonSchedule e{1.0, 0.01, 100};
  EXPECT_DOUBLE_EQ(e(0), 1.0);
  EXPECT_DOUBLE_EQ(e(50), 0.505);
  EXPECT_DOUBLE_EQ(e(100), 0.01);
  EXPECT_DOUBLE_EQ(e(1'000'000), 0.01);
  EXPECT_THROW(e(-1), ValidationError);
}

TEST(Epsilon, GreedyAtZeroUniformAtOne) {
  Rng rng(1);
  nn::Vec q(3);
  q << 0.1, 0.7, 0.7;
  for (int i = 0; i < 20; ++i) EXPECT_EQ(epsilon_greedy(q, 0.0, rng), 1);
  std::vector<int> hits(3, 0);
  for (int i = 0; i < 3000; ++i) ++hits[static_cast<std::size_t>(epsilon_greedy(q, 1.0, rng))];
  for (int h : hits) EXPECT_NEAR(h, 1000, 3 * std::sqrt(3000 * (1.0 / 3) * (2.0 / 3)));
}

TEST(LearnerConfig, ParsesAndValidates) {
  auto cfg = KeyValueConfig::parse("gamma = 0.9\nbatch = 8\nhidden = 12\nstate_widths = 10,6\n");
  const auto c = parse_learner_config(cfg);
  EXPECT_DOUBLE_EQ(c.gamma, 0.9);
  EXPECT_EQ(c.batch, 8u);
  EXPECT_EQ(c.shape.hidden, 12);
  EXPECT_EQ(c.shape.state_widths, (std::vector<int>{10, 6}));
  EXPECT_EQ(c.target_sync, 5000);
  EXPECT_THROW(parse_learner_config(KeyValueConfig::parse("gamma = 1.5\n")), ConfigError);
  EXPECT_THROW(parse_learner_config(KeyValueConfig::parse("batch = 0\n")), ConfigError);
}

TEST(DdqnLoss, HandComputed) {
  nn::Mat q(2, 3), qt(2, 3);
  q << 1, 0, 5,  //
      2, 3, 1;
  qt << 0, 10, 7,  //
      0, 20, 9;
  Decisions d;
  d.add(0, 1, 0, 1.0, false);  // online argmax at col 1 is action 1; target 1 + 0.5 * 20 = 11
  d.add(1, 2, 1, 0.0, true);   // terminal: target 0
  nn::Mat dq;
  const double loss = ddqn_loss(q, qt, d, 0.5, dq);
  EXPECT_DOUBLE_EQ(loss, ((1.0 - 11.0) * (1.0 - 11.0) + 9.0) / 2.0);
  EXPECT_DOUBLE_EQ(dq(0, 0), 2.0 * (1.0 - 11.0) / 2.0);
  EXPECT_DOUBLE_EQ(dq(1, 1), 2.0 * 3.0 / 2.0);
  EXPECT_DOUBLE_EQ(dq.cwiseAbs().sum(), 10.0 + 3.0);
}

TEST(Dream, TrialParityAlternates) {
  auto env = bandit(2, 1);
  Rng init(3), rng(4);
  DreamAgent agent(env, tiny_dream(), init);
  for (int i = 0; i < 10; ++i) agent.train_trial(rng);
  EXPECT_EQ(agent.encoder_trials(), 5);
  EXPECT_EQ(agent.decoder_trials(), 5);
  EXPECT_EQ(DreamAgent::z_source(0), ZSource::encoder);
  EXPECT_EQ(DreamAgent::z_source(1), ZSource::decoder);
  EXPECT_EQ(agent.trials(), 10);
  EXPECT_EQ(agent.env_steps(), 20);
  EXPECT_EQ(agent.updates(), 20);
}

TEST(Dream, UpdatesArePaidByEnvironmentSteps) {
  auto env = bandit(2, 1);
  auto cfg = tiny_dream();
  cfg.learner.update_every = 4;
  Rng init(3), rng(4);
  DreamAgent agent(env, cfg, init);
  for (int i = 0; i < 9; ++i) agent.train_trial(rng);
  EXPECT_EQ(agent.updates(), 18 / 4);
}

TEST(Dream, ExplorationAndTaskSidesAreDecoupled) {
  auto env = BusWorld(reduced_bus_layout());
  Rng init(5), rng(6);
  DreamAgent agent(env, tiny_dream(), init);
  for (int i = 0; i < 12; ++i) agent.train_trial(rng);

  for (int parity : {0, 1}) {
    DreamAgent full = agent, no_task = agent, no_explore = agent;
    Rng r1(7), r2(7), r3(7);
    full.update(r1, parity);
    no_task.update(r2, parity, {false, true});
    no_explore.update(r3, parity, {true, false});
    // The exploration Q-network never sees the task loss, and vice versa.
    EXPECT_EQ(flat(full.explore_params()), flat(no_task.explore_params()));
    EXPECT_EQ(flat(full.task_params()), flat(no_explore.task_params()));
    EXPECT_NE(flat(full.task_params()), flat(no_task.task_params()));
    EXPECT_NE(flat(full.explore_params()), flat(no_explore.explore_params()));
    // Encoder and decoder move the same with or without either Q loss
    // contribution on the exploration side.
    EXPECT_EQ(flat(full.encoder_params()), flat(no_explore.encoder_params()));
    EXPECT_EQ(flat(full.decoder_params()), flat(no_explore.decoder_params()));
  }
}

TEST(Dream, ExplorationRewardsComeFromLiveEncoderAndDecoder) {
  auto env = BusWorld(reduced_bus_layout());
  Rng init(8), rng(9);
  DreamAgent agent(env, tiny_dream(), init);
  for (int i = 0; i < 12; ++i) agent.train_trial(rng);
  for (int k = 0; k < 5; ++k) {
    const DreamAgent before = agent;
    agent.update(rng, k % 2);
    const auto* item = agent.last_exploration_item();
    ASSERT_NE(item, nullptr);
    const auto expect = before.exploration_rewards(*item);
    const auto& got = agent.last_exploration_rewards();
    ASSERT_EQ(got.size(), expect.size());
    for (std::size_t t = 0; t < got.size(); ++t) EXPECT_NEAR(got[t], expect[t], 1e-12);
    // After the update the networks moved, so the same item is re-scored.
    const auto after = agent.exploration_rewards(*item);
    double diff = 0.0;
    for (std::size_t t = 0; t < got.size(); ++t) diff += std::abs(after[t] - got[t]);
    EXPECT_GT(diff, 0.0);
  }
}

TEST(Dream, RewardsTelescopeOnReplayedData) {
  auto env = BusWorld(reduced_bus_layout());
  Rng init(10), rng(11);
  auto cfg = tiny_dream();
  cfg.c = 0.03;
  DreamAgent agent(env, cfg, init);
  for (int i = 0; i < 30; ++i) agent.train_trial(rng);
  const auto& replay = agent.explore_replay();
  for (std::size_t i = 0; i < replay.size(); ++i) {
    const auto& item = replay.at(i);
    const auto r = agent.exploration_rewards(item);
    const auto g = agent.decode_prefixes(item.steps);
    const nn::Vec f = agent.encode(item.mu);
    double sum = 0.0;
    for (double x : r) sum += x;
    const double T = static_cast<double>(r.size());
    const double expect = (f - g.front()).squaredNorm() - (f - g.back()).squaredNorm() - cfg.c * T;
    EXPECT_NEAR(sum, expect, 1e-9 * std::max(1.0, std::abs(expect)));
  }
}

TEST(Dream, PenaltyShiftsEveryRewardByC) {
  auto env = BusWorld(reduced_bus_layout());
  auto c0 = tiny_dream(), c1 = tiny_dream();
  c0.c = 0.0;
  c1.c = 0.25;
  Rng i0(12), i1(12), r0(13), r1(13);
  DreamAgent a0(env, c0, i0), a1(env, c1, i1);
  a0.train_trial(r0);
  a1.train_trial(r1);
  const auto x0 = a0.exploration_rewards(a0.explore_replay().at(0));
  const auto x1 = a0.exploration_rewards(a1.explore_replay().at(0));
  const auto y1 = a1.exploration_rewards(a1.explore_replay().at(0));
  ASSERT_EQ(x1.size(), y1.size());
  for (std::size_t t = 0; t < x1.size(); ++t) EXPECT_NEAR(x1[t] - y1[t], 0.25, 1e-12);
  EXPECT_FALSE(x0.empty());
}

TEST(Dream, MetaTestNeverReadsTheProblemId) {
  auto env = BusWorld(reduced_bus_layout());
  Rng init(14), rng(15);
  DreamAgent agent(env, tiny_dream(), init);
  agent.train_trial(rng);
  EXPECT_NO_THROW(agent.test_trial(ProblemId{0}, rng));
  auto leaky = tiny_dream();
  leaky.test_z_from_encoder = true;
  Rng init2(14);
  DreamAgent bad(env, leaky, init2);
  EXPECT_THROW(bad.test_trial(ProblemId{0}, rng), InformationLeak);
}

TEST(Dream, DeterministicGivenSeeds) {
  auto env = BusWorld(reduced_bus_layout());
  Rng ia(16), ib(16), ra(17), rb(17);
  DreamAgent a(env, tiny_dream(), ia), b(env, tiny_dream(), ib);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(a.train_trial(ra), b.train_trial(rb));
  EXPECT_EQ(flat(a.parameters()), flat(b.parameters()));
  EXPECT_EQ(a.test_trial(ProblemId{1}, ra), b.test_trial(ProblemId{1}, rb));
}

TEST(Dream, LearnsTwoArmedRevealingBandit) {
  // A = 2, H = 1: exploration must pull arm 1 to reveal mu, exploitation
  // then pulls arm mu. The optimum is 1 per trial.
  auto env = bandit(2, 1);
  Rng init(18), rng(19);
  DreamAgent agent(env, tiny_dream(), init);
  for (int i = 0; i < 3000; ++i) agent.train_trial(rng);
  double total = 0.0;
  for (int mu = 0; mu < 2; ++mu) total += agent.test_trial(ProblemId{mu}, rng).mean_return();
  EXPECT_DOUBLE_EQ(total / 2.0, 1.0);
}

TEST(Dream, CheckpointRoundTrip) {
  auto env = BusWorld(reduced_bus_layout());
  Rng ia(20), ib(21), rng(22);
  DreamAgent a(env, tiny_dream(), ia), b(env, tiny_dream(), ib);
  for (int i = 0; i < 6; ++i) a.train_trial(rng);
  const auto path = std::filesystem::temp_directory_path() / "dreamlab_agent_ckpt.bin";
  a.save(path);
  EXPECT_NE(flat(a.parameters()), flat(b.parameters()));
  b.load(path);
  EXPECT_EQ(flat(a.parameters()), flat(b.parameters()));
  Rng t1(23), t2(23);
  EXPECT_EQ(a.test_trial(ProblemId{2}, t1), b.test_trial(ProblemId{2}, t2));
  // Targets follow the loaded weights: two fresh agents with different inits
  // train identically after loading the same file.
  Rng ic(26);
  DreamAgent c(env, tiny_dream(), ic);
  c.load(path);
  Rng r1(27), r2(27);
  for (int i = 0; i < 6; ++i) {
    b.train_trial(r1);
    c.train_trial(r2);
  }
  EXPECT_EQ(flat(b.parameters()), flat(c.parameters()));
  Rng ie(24);
  Erl2Agent other(env, tiny_erl2(), ie);
  EXPECT_THROW(other.load(path), ValidationError);
  std::filesystem::remove(path);
}

TEST(Erl2, ItemZeroesExplorationRewardsAndBridgesEpisodes) {
  auto env = bandit(2, 2);
  Rng rng(25);
  ScriptedPolicy explore({1, 1}), exploit({0, 1});
  // mu = 2 is sequence (0, 1): pays 1 in exploitation.
  const TrialRecord rec = run_trial(explore, exploit, env, ProblemId{2}, rng);
  ASSERT_EQ(rec.exploration.length(), 2u);
  ASSERT_DOUBLE_EQ(rec.returns.front(), 1.0);
  const Erl2Item item = erl2_item(rec);
  ASSERT_EQ(item.steps.size(), 6u);
  ASSERT_EQ(item.decisions.size(), 4u);
  EXPECT_EQ(item.steps.prev_done, (std::vector<int>{0, 0, 1, 0, 0, 1}));
  EXPECT_EQ(item.steps.prev_action, (std::vector<int>{0, 2, 2, 0, 1, 2}));
  const auto& d = item.decisions;
  EXPECT_EQ(d[0].t, 0);
  EXPECT_EQ(d[0].next, 1);
  EXPECT_EQ(d[1].t, 1);
  EXPECT_EQ(d[1].next, 3);  // into exploitation s_0, past the terminal step
  EXPECT_EQ(d[2].t, 3);
  EXPECT_EQ(d[3].next, -1);
  for (int k : {0, 1}) EXPECT_DOUBLE_EQ(d[static_cast<std::size_t>(k)].reward, 0.0);
  EXPECT_DOUBLE_EQ(d[2].reward + d[3].reward, 1.0);
}

TEST(Erl2, DeterministicAndLearnsRevealingBandit) {
  auto env = bandit(2, 1);
  Rng ia(26), ib(26), ra(27), rb(27);
  Erl2Agent a(env, tiny_erl2(), ia), b(env, tiny_erl2(), ib);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(a.train_trial(ra), b.train_trial(rb));
  EXPECT_EQ(flat(a.parameters()), flat(b.parameters()));
  for (int i = 0; i < 3000; ++i) a.train_trial(ra);
  double total = 0.0;
  for (int mu = 0; mu < 2; ++mu) total += a.test_trial(ProblemId{mu}, ra).mean_return();
  EXPECT_DOUBLE_EQ(total / 2.0, 1.0);
}

TEST(Erl2, FactoryBuildsBothAgents) {
  auto env = bandit(3, 1);
  Rng init(28);
  auto cfg = KeyValueConfig::parse("agent = erl2\nhidden = 8\nstate_widths = 8\nz_dim = 4\n");
  EXPECT_EQ(make_agent(cfg, env, init)->name(), "erl2");
  cfg.set("agent", "dream");
  EXPECT_EQ(make_agent(cfg, env, init)->name(), "dream");
  cfg.set("agent", "pearl");
  EXPECT_THROW(make_agent(cfg, env, init), ConfigError);
}

// The history-table E-RL2 learner at H = 1 reduces to the tabular RL2 state:
// same draws, same choices, same outcomes on every trial.
class TabularEquivalence : public ::testing::TestWithParam<std::tuple<int, double>> {};

TEST_P(TabularEquivalence, EventForEvent) {
  const auto [A, eps] = GetParam();
  auto family = tabular::make_bandit_family(A, 1);
  tabular::BanditEnvironment env(family);
  TabularErl2Agent agent(env, 1.0, eps);
  tabular::TabularRL2State state(family, true);
  Rng ra(29), rb(29);
  for (int i = 0; i < 400; ++i) {
    const TrialRecord rec = agent.train_trial(ra);
    tabular::rl2_tabular_trial(state, rb, eps);
    const auto& ev = state.events().back();
    ASSERT_EQ(rec.problem.index, ev.mu) << "trial " << i;
    ASSERT_EQ(rec.exploration.actions.front(), ev.explore_sequence) << "trial " << i;
    ASSERT_EQ(rec.exploitations.front().actions.front(), ev.exploit_sequence) << "trial " << i;
    ASSERT_DOUBLE_EQ(rec.returns.front(), ev.exploit_return) << "trial " << i;
  }
}

INSTANTIATE_TEST_SUITE_P(Bandits, TabularEquivalence,
                         ::testing::Values(std::make_tuple(2, 1.0), std::make_tuple(4, 1.0),
                                           std::make_tuple(3, 0.3), std::make_tuple(5, 0.5)));
