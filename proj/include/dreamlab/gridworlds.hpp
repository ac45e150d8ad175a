#pragma once

// Grid-world families: distracting bus, map, cooking and cooking without
// goals. All share the action set and a six-feature observation
// [x, y, object, inventory, goal + 1, readout].

#include <compare>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dreamlab/config.hpp"
#include "dreamlab/env_core.hpp"

namespace dreamlab::grid {

enum Action : int { up = 0, down, left, right, ride, pickup, drop };
inline constexpr int kActionCount = 7;

enum ObjectKind : int { none = 0, bus, map, pot, fridge };
inline constexpr int kObjectKinds = 5;

enum Feature : int { fx = 0, fy, fobject, finventory, fgoal, freadout };
inline constexpr int kFeatureCount = 6;

struct Point {
  int x = 0;
  int y = 0;
  auto operator<=>(const Point&) const = default;
};

// Move actions translate by one cell (y grows downward) and clamp at walls;
// every other action leaves the position alone.
Point apply_move(Point p, int action, int width, int height);

int factorial(int k);
// k! permutations in lexicographic order; index 0 is the identity.
std::vector<int> permutation_from_index(int index, int k);
int permutation_index(const std::vector<int>& perm);

enum class BusVariant { distracting, map };

struct BusLayout {
  BusVariant variant = BusVariant::distracting;
  int width = 9;
  int height = 9;
  int horizon = 20;
  Point start{4, 4};
  std::vector<Point> colored_stops;
  std::vector<Point> colored_destinations;
  std::vector<Point> goals;
  std::vector<Point> gray_stops;         // distracting variant only
  std::vector<Point> gray_destinations;  // distracting variant only
  Point map_cell{3, 3};                  // map variant only
  double step_reward = -0.1;
  double goal_reward = 1.0;
  // Empty means the default rule: distracting trains on gray permutation 0
  // and holds out the rest; map trains on every problem.
  std::vector<int> train;
  std::vector<int> test;
};

BusLayout default_bus_layout(BusVariant variant);
// 5x5, two colored and two gray buses, |M| = 4, horizon 10.
BusLayout reduced_bus_layout();
BusLayout parse_bus_layout(const KeyValueConfig& cfg);

class BusWorld final : public Environment {
 public:
  explicit BusWorld(BusLayout layout);

  const ProblemFamily& family() const override { return family_; }
  const BusLayout& layout() const { return layout_; }
  std::vector<GoalId> goals_for(ProblemId mu) const override;
  EnvState initial_state(ProblemId mu) const override;
  StepResult step(const EnvState& state, int action, ProblemId mu, GoalId goal,
                  EpisodeMode mode) const override;
  Observation observe(const EnvState& state, ProblemId mu, GoalId goal) const override;

  int colored_permutation(ProblemId mu) const;
  int gray_permutation(ProblemId mu) const;
  // Where riding the bus at `stop` leads in problem mu; stop itself if the
  // cell holds no bus.
  Point ride_destination(Point stop, ProblemId mu) const;

 private:
  ObjectKind object_at(Point p) const;

  BusLayout layout_;
  ProblemFamily family_;
  std::vector<std::vector<int>> colored_perms_;
  std::vector<std::vector<int>> gray_perms_;
};

struct CookingLayout {
  bool goal_free = false;
  int width = 5;
  int height = 5;
  int horizon = 20;
  Point start{2, 2};
  Point pot{2, 2};
  std::vector<Point> fridges;  // a, b, c
  int ingredient_count = 4;
  double step_reward = -0.1;
  double stage_reward = 0.25;
  double wrong_pickup_reward = -0.25;
  std::vector<int> test_configs{11};
};

CookingLayout default_cooking_layout(bool goal_free);
CookingLayout parse_cooking_layout(const KeyValueConfig& cfg);

// Recipe (first, second) over ingredients.
struct Recipe {
  int first = 0;
  int second = 0;
  bool operator==(const Recipe&) const = default;
};

// State: [x, y, inventory (0 = empty, else ingredient + 1), stage 0..4].
// Stage 1 = holding the first ingredient, 2 = first in pot, 3 = holding the
// second, 4 = done. Staged rewards are differences of a potential, so any
// successful episode collects exactly 4 x stage_reward of stage bonus.
class CookingWorld final : public Environment {
 public:
  explicit CookingWorld(CookingLayout layout);

  const ProblemFamily& family() const override { return family_; }
  const CookingLayout& layout() const { return layout_; }
  std::vector<GoalId> goals_for(ProblemId mu) const override;
  EnvState initial_state(ProblemId mu) const override;
  StepResult step(const EnvState& state, int action, ProblemId mu, GoalId goal,
                  EpisodeMode mode) const override;
  Observation observe(const EnvState& state, ProblemId mu, GoalId goal) const override;

  // Fridge configuration index (base-k digits a, b, c) behind problem mu.
  int config_of(ProblemId mu) const;
  std::vector<int> fridge_contents(int config) const;
  Recipe recipe_of(GoalId goal) const;
  // Recipe in force: the goal, or the problem's own recipe when goal-free.
  std::optional<Recipe> active_recipe(ProblemId mu, GoalId goal) const;
  // Stage potential in units of stage_reward.
  int potential(const EnvState& state, const Recipe& recipe) const;

 private:
  struct Problem {
    int config = 0;
    Recipe recipe;
  };

  CookingLayout layout_;
  ProblemFamily family_;
  std::vector<Problem> problems_;  // goal-free variant
};

std::vector<Recipe> realizable_recipes(const std::vector<int>& contents, int ingredient_count);

// Builds an environment from "family = distracting-bus | map | bus-reduced |
// cooking | cooking-no-goal | bandit" plus layout keys.
std::unique_ptr<Environment> make_environment(const KeyValueConfig& cfg);

}  // namespace dreamlab::grid
