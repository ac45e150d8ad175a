#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "dreamlab/gridworlds.hpp"
#include "support/cooking_oracle.hpp"

using namespace dreamlab;
using namespace dreamlab::grid;

namespace {

double run_script(const Environment& env, ProblemId mu, GoalId goal, const std::vector<int>& actions,
                  bool* done = nullptr, std::size_t* steps = nullptr) {
  EnvState s = env.initial_state(mu);
  double ret = 0.0;
  bool d = false;
  std::size_t n = 0;
  for (int a : actions) {
    auto r = env.step(s, a, mu, goal, EpisodeMode::exploit);
    s = r.state;
    ret += r.reward;
    ++n;
    if (r.done) {
      d = true;
      break;
    }
  }
  if (done) *done = d;
  if (steps) *steps = n;
  return ret;
}

}  // namespace

TEST(Moves, ClampAtWalls) {
  EXPECT_EQ(apply_move({0, 0}, up, 3, 3), (Point{0, 0}));
  EXPECT_EQ(apply_move({0, 0}, left, 3, 3), (Point{0, 0}));
  EXPECT_EQ(apply_move({0, 0}, down, 3, 3), (Point{0, 1}));
  EXPECT_EQ(apply_move({2, 2}, right, 3, 3), (Point{2, 2}));
  EXPECT_EQ(apply_move({1, 1}, ride, 3, 3), (Point{1, 1}));
}

TEST(Permutations, LexicographicIndexMatchesNextPermutation) {
  std::vector<int> perm{0, 1, 2, 3};
  int index = 0;
  do {
    EXPECT_EQ(permutation_from_index(index, 4), perm);
    EXPECT_EQ(permutation_index(perm), index);
    ++index;
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_EQ(index, 24);
}

TEST(DistractingBus, ProblemCountAndSplit) {
  BusWorld env(default_bus_layout(BusVariant::distracting));
  const auto& f = env.family();
  EXPECT_EQ(f.problem_count, 576);
  EXPECT_EQ(f.train.size(), 24u);
  EXPECT_EQ(f.test.size(), 552u);
  std::set<int> all(f.train.begin(), f.train.end());
  all.insert(f.test.begin(), f.test.end());
  EXPECT_EQ(all.size(), 576u);
  EXPECT_EQ(f.horizon, 20);
}

TEST(DistractingBus, StandStillCostsTwo) {
  BusWorld env(default_bus_layout(BusVariant::distracting));
  ScriptedPolicy still({pickup});
  Rng rng(0);
  const auto traj = run_episode(still, env, ProblemId{7}, 0, EpisodeMode::exploit, rng);
  EXPECT_EQ(traj.length(), 20u);
  EXPECT_FALSE(traj.terminated());
  EXPECT_NEAR(traj.total_return(), -2.0, 1e-12);
}

TEST(DistractingBus, ReachingGoalPaysAndEnds) {
  auto layout = reduced_bus_layout();
  BusWorld env(layout);
  // From (2,0) the bottom-left goal (0,0) is two steps left.
  bool done = false;
  std::size_t steps = 0;
  const double ret = run_script(env, ProblemId{0}, 2, {left, left, left}, &done, &steps);
  EXPECT_TRUE(done);
  EXPECT_EQ(steps, 2u);
  EXPECT_NEAR(ret, -0.2 + 1.0, 1e-12);
  const auto last = env.step({1, 0}, left, ProblemId{0}, 2, EpisodeMode::exploit);
  EXPECT_NEAR(last.reward, -0.1 + 1.0, 1e-12);
}

TEST(DistractingBus, ColoredRidesFollowPermutationTable) {
  const auto layout = default_bus_layout(BusVariant::distracting);
  BusWorld env(layout);
  std::vector<int> sigma{0, 1, 2, 3};
  int index = 0;
  do {
    for (int gray = 0; gray < 24; gray += 7) {
      const ProblemId mu{index + 24 * gray};
      EXPECT_EQ(env.colored_permutation(mu), index);
      for (int i = 0; i < 4; ++i) {
        const Point stop = layout.colored_stops[static_cast<std::size_t>(i)];
        const auto r = env.step({stop.x, stop.y}, ride, mu, kNoGoal, EpisodeMode::explore);
        const Point expect = layout.colored_destinations[static_cast<std::size_t>(sigma[static_cast<std::size_t>(i)])];
        EXPECT_EQ((Point{r.state[0], r.state[1]}), expect);
        // Destinations are fixed within the problem.
        const auto again = env.step({stop.x, stop.y}, ride, mu, kNoGoal, EpisodeMode::explore);
        EXPECT_EQ(again.state, r.state);
      }
    }
    ++index;
  } while (std::next_permutation(sigma.begin(), sigma.end()));
}

TEST(DistractingBus, GrayRidesUseQuotientPermutation) {
  const auto layout = default_bus_layout(BusVariant::distracting);
  BusWorld env(layout);
  const ProblemId mu{5 * 24 + 3};
  EXPECT_EQ(env.gray_permutation(mu), 5);
  const auto perm = permutation_from_index(5, 4);
  for (int i = 0; i < 4; ++i) {
    const Point stop = layout.gray_stops[static_cast<std::size_t>(i)];
    EXPECT_EQ(env.ride_destination(stop, mu), layout.gray_destinations[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
  }
  EXPECT_EQ(env.ride_destination({0, 0}, mu), (Point{0, 0}));
}

TEST(MapVariant, ReadoutOnlyOnMapCell) {
  const auto layout = default_bus_layout(BusVariant::map);
  BusWorld env(layout);
  EXPECT_EQ(env.family().problem_count, 24);
  for (int mu = 0; mu < 24; ++mu) {
    for (int x = 0; x < layout.width; ++x) {
      for (int y = 0; y < layout.height; ++y) {
        const auto obs = env.observe({x, y}, ProblemId{mu}, 1);
        if (Point{x, y} == layout.map_cell) {
          EXPECT_EQ(obs[freadout], mu);
          EXPECT_EQ(obs[fobject], map);
        } else {
          EXPECT_EQ(obs[freadout], 0);
        }
      }
    }
  }
}

TEST(Observations, FixedLengthAndDeterministic) {
  std::vector<std::unique_ptr<Environment>> envs;
  envs.push_back(std::make_unique<BusWorld>(default_bus_layout(BusVariant::distracting)));
  envs.push_back(std::make_unique<BusWorld>(default_bus_layout(BusVariant::map)));
  envs.push_back(std::make_unique<CookingWorld>(default_cooking_layout(false)));
  envs.push_back(std::make_unique<CookingWorld>(default_cooking_layout(true)));
  for (const auto& env : envs) {
    const auto& f = env->family();
    ASSERT_EQ(f.feature_cardinalities.size(), static_cast<std::size_t>(kFeatureCount));
    for (int mu = 0; mu < f.problem_count; mu += std::max(1, f.problem_count / 37)) {
      auto goals = env->goals_for(ProblemId{mu});
      goals.push_back(kNoGoal);
      for (GoalId g : goals) {
        const auto s = env->initial_state(ProblemId{mu});
        const auto o = env->observe(s, ProblemId{mu}, g);
        EXPECT_EQ(o.size(), static_cast<std::size_t>(kFeatureCount));
        EXPECT_EQ(o, env->observe(EnvState(s), ProblemId{mu}, g));
        for (int i = 0; i < kFeatureCount; ++i) {
          EXPECT_GE(o[static_cast<std::size_t>(i)], 0);
          EXPECT_LT(o[static_cast<std::size_t>(i)], f.feature_cardinalities[static_cast<std::size_t>(i)]);
        }
      }
    }
  }
}

TEST(ReducedBus, ShapeMatchesAcceptanceLayout) {
  BusWorld env(reduced_bus_layout());
  EXPECT_EQ(env.family().problem_count, 4);
  EXPECT_EQ(env.family().horizon, 10);
  EXPECT_EQ(env.family().train, (std::vector<int>{0, 1}));
  EXPECT_EQ(env.family().test, (std::vector<int>{2, 3}));
}

TEST(Cooking, ProblemsSplitAndContents) {
  CookingWorld env(default_cooking_layout(false));
  EXPECT_EQ(env.family().problem_count, 64);
  EXPECT_EQ(env.family().test, std::vector<int>{11});
  EXPECT_EQ(env.family().train.size(), 63u);
  Rng rng(1);
  EXPECT_EQ(sample_problem(env.family(), Split::test, rng).index, 11);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c) EXPECT_EQ(env.fridge_contents(16 * a + 4 * b + c), (std::vector<int>{a, b, c}));
}

TEST(Cooking, GoalsAreRealizableRecipesOnly) {
  CookingWorld env(default_cooking_layout(false));
  for (int mu = 0; mu < 64; ++mu) {
    const auto contents = env.fridge_contents(mu);
    std::set<int> present(contents.begin(), contents.end());
    const auto goals = env.goals_for(ProblemId{mu});
    EXPECT_EQ(goals.size(), present.size() * present.size());
    for (GoalId g : goals) {
      const auto r = env.recipe_of(g);
      EXPECT_TRUE(present.count(r.first) && present.count(r.second));
    }
  }
}

TEST(Cooking, CleanRecipeReturn) {
  CookingWorld env(default_cooking_layout(false));
  const ProblemId mu{16 * 1 + 4 * 2 + 3};  // fridges (4,0)=1, (4,2)=2, (4,4)=3
  const GoalId goal = 2 * 4 + 1;            // first 2, then 1
  const std::vector<int> script{right, right, pickup, left, left, drop,
                                right, right, up, up, pickup, down, down, left, left, drop};
  bool done = false;
  std::size_t steps = 0;
  const double ret = run_script(env, mu, goal, script, &done, &steps);
  EXPECT_TRUE(done);
  EXPECT_EQ(steps, script.size());
  EXPECT_NEAR(ret, -0.1 * static_cast<double>(steps) + 1.0, 1e-12);
}

TEST(Cooking, WrongPickupIsOnePenalty) {
  CookingWorld env(default_cooking_layout(false));
  const ProblemId mu{16 * 1 + 4 * 2 + 3};
  const GoalId goal = 2 * 4 + 1;
  // (4,4) holds 3, which is not the first ingredient.
  EnvState s{4, 4, 0, 0};
  const auto r = env.step(s, pickup, mu, goal, EpisodeMode::exploit);
  EXPECT_NEAR(r.reward, -0.1 - 0.25, 1e-12);
  EXPECT_EQ(r.state[2], 4);
  // Dropping it outside the pot costs nothing more: it was never goal-relevant.
  EXPECT_NEAR(env.step(r.state, drop, mu, goal, EpisodeMode::exploit).reward, -0.1, 1e-12);
}

TEST(Cooking, DroppingHeldIngredientOutsidePotUndoesBonus) {
  CookingWorld env(default_cooking_layout(false));
  const ProblemId mu{16 * 1 + 4 * 2 + 3};
  const GoalId goal = 2 * 4 + 1;
  const auto picked = env.step({4, 2, 0, 0}, pickup, mu, goal, EpisodeMode::exploit);
  EXPECT_NEAR(picked.reward, -0.1 + 0.25, 1e-12);
  const auto dropped = env.step(picked.state, drop, mu, goal, EpisodeMode::exploit);
  EXPECT_NEAR(dropped.reward, -0.1 - 0.25, 1e-12);
  EXPECT_EQ(dropped.state[3], 0);
}

TEST(Cooking, NoGoalMeansNoStagedReward) {
  CookingWorld env(default_cooking_layout(false));
  const auto r = env.step({4, 2, 0, 0}, pickup, ProblemId{27}, kNoGoal, EpisodeMode::explore);
  EXPECT_NEAR(r.reward, -0.1, 1e-12);
  EXPECT_EQ(r.state[2], 3);
  EXPECT_EQ(env.observe(r.state, ProblemId{27}, kNoGoal)[finventory], 3);
}

TEST(CookingNoGoal, ProblemsCarryRecipes) {
  CookingWorld env(default_cooking_layout(true));
  const auto& f = env.family();
  EXPECT_EQ(f.goal_count, 0);
  EXPECT_EQ(f.feature_cardinalities[finventory], 8);
  int expected = 0;
  for (int c = 0; c < 343; ++c) {
    const auto contents = env.fridge_contents(c);
    std::set<int> present(contents.begin(), contents.end());
    expected += static_cast<int>(present.size() * present.size());
  }
  EXPECT_EQ(f.problem_count, expected);
  for (int mu : f.test) EXPECT_EQ(env.config_of(ProblemId{mu}), 11);
  EXPECT_EQ(f.test.size(), 9u);  // config 11 = (0, 1, 4) in base 7: 3 x 3 recipes
  EXPECT_TRUE(env.goals_for(ProblemId{0}).empty());
}

TEST(CookingNoGoal, InventoryMustBeEmptyAndSecondIsSignalled) {
  CookingWorld env(default_cooking_layout(true));
  // Find a problem whose recipe uses two different ingredients.
  int mu = -1;
  for (int m = 0; m < env.family().problem_count; ++m) {
    const auto r = *env.active_recipe(ProblemId{m}, kNoGoal);
    const auto contents = env.fridge_contents(env.config_of(ProblemId{m}));
    if (r.first != r.second && contents[0] == r.second && contents[1] == r.first) {
      mu = m;
      break;
    }
  }
  ASSERT_GE(mu, 0);
  const ProblemId id{mu};
  // Fridge 0 holds the second ingredient: picking it early pays +0.25.
  const auto early = env.step({4, 0, 0, 0}, pickup, id, kNoGoal, EpisodeMode::explore);
  EXPECT_NEAR(early.reward, -0.1 + 0.25, 1e-12);
  // Inventory full: a second pickup is a no-op.
  auto moved = env.step(early.state, down, id, kNoGoal, EpisodeMode::explore);
  moved = env.step(moved.state, down, id, kNoGoal, EpisodeMode::explore);
  const auto blocked = env.step(moved.state, pickup, id, kNoGoal, EpisodeMode::explore);
  EXPECT_EQ(blocked.state, moved.state);
  EXPECT_NEAR(blocked.reward, -0.1, 1e-12);
  const auto dropped = env.step(blocked.state, drop, id, kNoGoal, EpisodeMode::explore);
  EXPECT_NEAR(dropped.reward, -0.1 - 0.25, 1e-12);
}

TEST(MakeEnvironment, FromConfigText) {
  auto cfg = KeyValueConfig::parse("family = bus-reduced\nhorizon = 12\n");
  auto env = make_environment(cfg);
  EXPECT_EQ(env->family().horizon, 12);
  EXPECT_EQ(env->family().problem_count, 4);
  cfg = KeyValueConfig::parse("family = cooking\nfridges = 4,0 4,2\n");
  EXPECT_EQ(make_environment(cfg)->family().problem_count, 16);
  cfg = KeyValueConfig::parse("family = bandit\nbandit_actions = 3\nbandit_horizon = 2\n");
  EXPECT_EQ(make_environment(cfg)->family().problem_count, 9);
  EXPECT_THROW(make_environment(KeyValueConfig::parse("family = maze\n")), ConfigError);
  EXPECT_THROW(make_environment(KeyValueConfig::parse("family = map\ngoals = 9,9\n")), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse("novalue\n"), ConfigError);
}

TEST(CookingBookkeeping, EverySuccessfulEpisodeCollectsExactlyOne) {
  CookingWorld env(default_cooking_layout(false));
  const int T = env.family().horizon;
  for (int m = 0; m < 64; ++m) {
    const ProblemId mu{m};
    for (GoalId g : env.goals_for(mu)) {
      const Recipe r = env.recipe_of(g);
      // (state, oracle placed count) -> achievable staged sums in quarters.
      std::map<std::pair<EnvState, int>, std::set<int>> frontier;
      frontier[{env.initial_state(mu), 0}] = {0};
      for (int t = 0; t < T; ++t) {
        std::map<std::pair<EnvState, int>, std::set<int>> next;
        for (const auto& [key, sums] : frontier) {
          for (int a = 0; a < kActionCount; ++a) {
            testing_support::StageOracle oracle{key.second};
            const auto res = env.step(key.first, a, mu, g, EpisodeMode::exploit);
            const auto [bonus, wrong] = oracle.on_step(env, r, key.first, a, res.state);
            const double expected = -0.1 + 0.25 * bonus + (wrong ? -0.25 : 0.0);
            ASSERT_NEAR(res.reward, expected, 1e-12);
            for (int s : sums) {
              if (res.done) {
                ASSERT_EQ(s + bonus, 4) << "mu=" << m << " goal=" << g;
              } else {
                next[{res.state, oracle.placed}].insert(s + bonus);
              }
            }
          }
        }
        frontier = std::move(next);
      }
    }
  }
}

TEST(CookingBookkeeping, NoRewardCycleOnSmallGrid) {
  CookingLayout layout = default_cooking_layout(false);
  layout.width = 4;
  layout.height = 1;
  layout.start = {0, 0};
  layout.pot = {0, 0};
  layout.fridges = {{1, 0}, {2, 0}, {3, 0}};
  for (bool goal_free : {false, true}) {
    layout.goal_free = goal_free;
    layout.ingredient_count = goal_free ? 3 : 4;
    CookingWorld env(layout);
    const auto& fam = env.family();
    for (int m = 0; m < fam.problem_count; m += 3) {
      const ProblemId mu{m};
      auto goals = env.goals_for(mu);
      if (goals.empty()) goals.push_back(kNoGoal);
      for (GoalId g : goals) {
        // Max-plus over every action sequence of length <= 20 from each
        // state: the non-step reward collected on a cycle is never positive.
        std::set<EnvState> states;
        for (int x = 0; x < 4; ++x)
          for (int inv = 0; inv <= layout.ingredient_count; ++inv)
            for (int stage = 0; stage < 4; ++stage) states.insert({x, 0, inv, stage});
        for (const auto& start : states) {
          std::map<EnvState, double> best{{start, 0.0}};
          for (int t = 0; t < 20; ++t) {
            std::map<EnvState, double> next;
            for (const auto& [s, v] : best) {
              for (int a = 0; a < kActionCount; ++a) {
                const auto res = env.step(s, a, mu, g, EpisodeMode::exploit);
                if (res.done) continue;
                const double gain = v + res.reward - layout.step_reward;
                auto it = next.find(res.state);
                if (it == next.end() || gain > it->second) next[res.state] = gain;
              }
            }
            best = std::move(next);
            if (auto it = best.find(start); it != best.end()) ASSERT_LE(it->second, 1e-12);
          }
        }
      }
    }
  }
}
