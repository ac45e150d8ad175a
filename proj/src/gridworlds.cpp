#include "dreamlab/gridworlds.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "dreamlab/tabular_lab.hpp"

namespace dreamlab::grid {

Point apply_move(Point p, int action, int width, int height) {
  switch (action) {
    case up: p.y = std::max(0, p.y - 1); break;
    case down: p.y = std::min(height - 1, p.y + 1); break;
    case left: p.x = std::max(0, p.x - 1); break;
    case right: p.x = std::min(width - 1, p.x + 1); break;
    default: break;
  }
  return p;
}

int factorial(int k) {
  if (k < 0 || k > 10) throw ConfigError("factorial argument out of range");
  int f = 1;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

std::vector<int> permutation_from_index(int index, int k) {
  if (index < 0 || index >= factorial(k)) throw ValidationError("permutation index out of range");
  std::vector<int> pool(static_cast<std::size_t>(k));
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<int> perm;
  for (int i = k; i >= 1; --i) {
    const int f = factorial(i - 1);
    const int pick = index / f;
    index %= f;
    perm.push_back(pool[static_cast<std::size_t>(pick)]);
    pool.erase(pool.begin() + pick);
  }
  return perm;
}

int permutation_index(const std::vector<int>& perm) {
  const int k = static_cast<int>(perm.size());
  int index = 0;
  for (int i = 0; i < k; ++i) {
    int smaller = 0;
    for (int j = i + 1; j < k; ++j) smaller += perm[static_cast<std::size_t>(j)] < perm[static_cast<std::size_t>(i)] ? 1 : 0;
    index += smaller * factorial(k - 1 - i);
  }
  return index;
}

namespace {

void check_in_bounds(const std::vector<Point>& pts, int w, int h, const std::string& what) {
  for (const auto& p : pts) {
    if (p.x < 0 || p.y < 0 || p.x >= w || p.y >= h) {
      throw ConfigError(what + " (" + std::to_string(p.x) + "," + std::to_string(p.y) + ") outside the grid");
    }
  }
}

std::vector<Point> to_points(const std::vector<std::pair<int, int>>& raw) {
  std::vector<Point> out;
  for (auto [x, y] : raw) out.push_back({x, y});
  return out;
}

Point to_point(const KeyValueConfig& cfg, const std::string& key, Point fallback) {
  if (!cfg.has(key)) return fallback;
  const auto pts = cfg.get_points(key);
  if (pts.size() != 1) throw ConfigError("key '" + key + "' needs exactly one point");
  return {pts[0].first, pts[0].second};
}

}  // namespace

// ---------------------------------------------------------------------------
// Bus / map

BusLayout default_bus_layout(BusVariant variant) {
  BusLayout l;
  l.variant = variant;
  l.colored_stops = {{4, 3}, {5, 4}, {4, 5}, {3, 4}};
  l.goals = {{0, 0}, {8, 0}, {8, 8}, {0, 8}};
  l.colored_destinations = {{1, 0}, {7, 0}, {7, 8}, {1, 8}};
  if (variant == BusVariant::distracting) {
    l.gray_stops = {{2, 2}, {6, 2}, {6, 6}, {2, 6}};
    l.gray_destinations = {{4, 0}, {8, 4}, {4, 8}, {0, 4}};
  }
  return l;
}

BusLayout reduced_bus_layout() {
  BusLayout l;
  l.variant = BusVariant::distracting;
  l.width = 5;
  l.height = 5;
  l.horizon = 10;
  l.start = {2, 0};
  l.colored_stops = {{1, 0}, {3, 0}};
  l.colored_destinations = {{0, 3}, {4, 3}};
  l.goals = {{0, 4}, {4, 4}, {0, 0}, {4, 0}};
  l.gray_stops = {{1, 1}, {3, 1}};
  l.gray_destinations = {{0, 2}, {4, 2}};
  return l;
}

BusLayout parse_bus_layout(const KeyValueConfig& cfg) {
  const std::string fam = cfg.get_string("family", "distracting-bus");
  BusLayout l;
  if (fam == "bus-reduced") l = reduced_bus_layout();
  else if (fam == "map") l = default_bus_layout(BusVariant::map);
  else if (fam == "distracting-bus") l = default_bus_layout(BusVariant::distracting);
  else throw ConfigError("not a bus family: " + fam);

  l.width = cfg.get_int("width", l.width);
  l.height = cfg.get_int("height", l.height);
  l.horizon = cfg.get_int("horizon", l.horizon);
  l.start = to_point(cfg, "start", l.start);
  if (cfg.has("colored_stops")) l.colored_stops = to_points(cfg.get_points("colored_stops"));
  if (cfg.has("colored_destinations")) l.colored_destinations = to_points(cfg.get_points("colored_destinations"));
  if (cfg.has("goals")) l.goals = to_points(cfg.get_points("goals"));
  if (cfg.has("gray_stops")) l.gray_stops = to_points(cfg.get_points("gray_stops"));
  if (cfg.has("gray_destinations")) l.gray_destinations = to_points(cfg.get_points("gray_destinations"));
  l.map_cell = to_point(cfg, "map_cell", l.map_cell);
  l.step_reward = cfg.get_double("step_reward", l.step_reward);
  l.goal_reward = cfg.get_double("goal_reward", l.goal_reward);
  if (cfg.has("train")) l.train = cfg.get_ints("train");
  if (cfg.has("test")) l.test = cfg.get_ints("test");
  return l;
}

BusWorld::BusWorld(BusLayout layout) : layout_(std::move(layout)) {
  const auto& l = layout_;
  if (l.width < 1 || l.height < 1 || l.horizon < 1) throw ConfigError("bus layout: bad grid size or horizon");
  if (l.colored_stops.empty() || l.colored_stops.size() != l.colored_destinations.size()) {
    throw ConfigError("bus layout: colored stops and destinations must be non-empty and equal in number");
  }
  if (l.gray_stops.size() != l.gray_destinations.size()) {
    throw ConfigError("bus layout: gray stops and destinations must be equal in number");
  }
  if (l.variant == BusVariant::map && !l.gray_stops.empty()) throw ConfigError("map layout has no gray buses");
  if (l.goals.empty()) throw ConfigError("bus layout: need at least one goal");
  check_in_bounds({l.start}, l.width, l.height, "start");
  check_in_bounds(l.colored_stops, l.width, l.height, "colored stop");
  check_in_bounds(l.colored_destinations, l.width, l.height, "colored destination");
  check_in_bounds(l.goals, l.width, l.height, "goal");
  check_in_bounds(l.gray_stops, l.width, l.height, "gray stop");
  check_in_bounds(l.gray_destinations, l.width, l.height, "gray destination");
  std::set<Point> stops(l.colored_stops.begin(), l.colored_stops.end());
  stops.insert(l.gray_stops.begin(), l.gray_stops.end());
  if (stops.size() != l.colored_stops.size() + l.gray_stops.size()) throw ConfigError("bus layout: stops overlap");
  if (l.variant == BusVariant::map) {
    check_in_bounds({l.map_cell}, l.width, l.height, "map cell");
    if (stops.count(l.map_cell) != 0) throw ConfigError("bus layout: map cell overlaps a stop");
  }

  const int k = static_cast<int>(l.colored_stops.size());
  const int g = static_cast<int>(l.gray_stops.size());
  for (int i = 0; i < factorial(k); ++i) colored_perms_.push_back(permutation_from_index(i, k));
  for (int i = 0; i < factorial(g); ++i) gray_perms_.push_back(permutation_from_index(i, g));

  family_.name = l.variant == BusVariant::map ? "map" : "distracting-bus";
  family_.problem_count = factorial(k) * (l.variant == BusVariant::distracting ? factorial(g) : 1);
  family_.horizon = l.horizon;
  family_.action_count = kActionCount;
  family_.goal_count = static_cast<int>(l.goals.size());
  const int readout = l.variant == BusVariant::map ? family_.problem_count : 1;
  family_.feature_cardinalities = {l.width, l.height, kObjectKinds, 1, family_.goal_count + 1, readout};
  if (!l.train.empty() || !l.test.empty()) {
    family_.train = l.train;
    family_.test = l.test;
  } else {
    const int train_size = l.variant == BusVariant::distracting ? factorial(k) : family_.problem_count;
    for (int mu = 0; mu < family_.problem_count; ++mu) (mu < train_size ? family_.train : family_.test).push_back(mu);
  }
  family_.validate();
}

int BusWorld::colored_permutation(ProblemId mu) const {
  return mu.index % static_cast<int>(colored_perms_.size());
}

int BusWorld::gray_permutation(ProblemId mu) const {
  if (layout_.variant == BusVariant::map) return 0;
  return mu.index / static_cast<int>(colored_perms_.size());
}

Point BusWorld::ride_destination(Point stop, ProblemId mu) const {
  const auto& l = layout_;
  for (std::size_t i = 0; i < l.colored_stops.size(); ++i) {
    if (l.colored_stops[i] == stop) {
      const auto& perm = colored_perms_[static_cast<std::size_t>(colored_permutation(mu))];
      return l.colored_destinations[static_cast<std::size_t>(perm[i])];
    }
  }
  for (std::size_t i = 0; i < l.gray_stops.size(); ++i) {
    if (l.gray_stops[i] == stop) {
      const auto& perm = gray_perms_[static_cast<std::size_t>(gray_permutation(mu))];
      return l.gray_destinations[static_cast<std::size_t>(perm[i])];
    }
  }
  return stop;
}

ObjectKind BusWorld::object_at(Point p) const {
  const auto& l = layout_;
  if (std::find(l.colored_stops.begin(), l.colored_stops.end(), p) != l.colored_stops.end()) return bus;
  if (std::find(l.gray_stops.begin(), l.gray_stops.end(), p) != l.gray_stops.end()) return bus;
  if (l.variant == BusVariant::map && p == l.map_cell) return map;
  return none;
}

std::vector<GoalId> BusWorld::goals_for(ProblemId) const {
  std::vector<GoalId> goals(layout_.goals.size());
  std::iota(goals.begin(), goals.end(), 0);
  return goals;
}

EnvState BusWorld::initial_state(ProblemId) const { return {layout_.start.x, layout_.start.y}; }

StepResult BusWorld::step(const EnvState& state, int action, ProblemId mu, GoalId goal, EpisodeMode) const {
  Point p{state[0], state[1]};
  if (action == ride) p = ride_destination(p, mu);
  else p = apply_move(p, action, layout_.width, layout_.height);
  StepResult out{{p.x, p.y}, layout_.step_reward, false};
  if (goal != kNoGoal && p == layout_.goals.at(static_cast<std::size_t>(goal))) {
    out.reward += layout_.goal_reward;
    out.done = true;
  }
  return out;
}

Observation BusWorld::observe(const EnvState& state, ProblemId mu, GoalId goal) const {
  const Point p{state[0], state[1]};
  const ObjectKind obj = object_at(p);
  const int readout = obj == map ? mu.index : 0;
  return {p.x, p.y, obj, 0, goal == kNoGoal ? 0 : goal + 1, readout};
}

// ---------------------------------------------------------------------------
// Cooking

CookingLayout default_cooking_layout(bool goal_free) {
  CookingLayout l;
  l.goal_free = goal_free;
  l.fridges = {{4, 0}, {4, 2}, {4, 4}};
  if (goal_free) l.ingredient_count = 7;
  return l;
}

CookingLayout parse_cooking_layout(const KeyValueConfig& cfg) {
  const std::string fam = cfg.get_string("family", "cooking");
  if (fam != "cooking" && fam != "cooking-no-goal") throw ConfigError("not a cooking family: " + fam);
  CookingLayout l = default_cooking_layout(fam == "cooking-no-goal");
  l.width = cfg.get_int("width", l.width);
  l.height = cfg.get_int("height", l.height);
  l.horizon = cfg.get_int("horizon", l.horizon);
  l.start = to_point(cfg, "start", l.start);
  l.pot = to_point(cfg, "pot", l.pot);
  if (cfg.has("fridges")) l.fridges = to_points(cfg.get_points("fridges"));
  l.ingredient_count = cfg.get_int("ingredients", l.ingredient_count);
  l.step_reward = cfg.get_double("step_reward", l.step_reward);
  l.stage_reward = cfg.get_double("stage_reward", l.stage_reward);
  l.wrong_pickup_reward = cfg.get_double("wrong_pickup_reward", l.wrong_pickup_reward);
  if (cfg.has("test_configs")) l.test_configs = cfg.get_ints("test_configs");
  return l;
}

std::vector<Recipe> realizable_recipes(const std::vector<int>& contents, int ingredient_count) {
  std::vector<Recipe> out;
  for (int a = 0; a < ingredient_count; ++a) {
    for (int b = 0; b < ingredient_count; ++b) {
      const bool has_a = std::find(contents.begin(), contents.end(), a) != contents.end();
      const bool has_b = std::find(contents.begin(), contents.end(), b) != contents.end();
      if (has_a && has_b) out.push_back({a, b});
    }
  }
  return out;
}

CookingWorld::CookingWorld(CookingLayout layout) : layout_(std::move(layout)) {
  const auto& l = layout_;
  if (l.width < 1 || l.height < 1 || l.horizon < 1) throw ConfigError("cooking layout: bad grid size or horizon");
  if (l.fridges.empty()) throw ConfigError("cooking layout: need at least one fridge");
  if (l.ingredient_count < 1) throw ConfigError("cooking layout: need at least one ingredient");
  check_in_bounds({l.start, l.pot}, l.width, l.height, "start/pot");
  check_in_bounds(l.fridges, l.width, l.height, "fridge");
  std::set<Point> cells(l.fridges.begin(), l.fridges.end());
  cells.insert(l.pot);
  if (cells.size() != l.fridges.size() + 1) throw ConfigError("cooking layout: fridges and pot overlap");

  long long configs = 1;
  for (std::size_t i = 0; i < l.fridges.size(); ++i) {
    configs *= l.ingredient_count;
    if (configs > 1'000'000) throw ConfigError("cooking layout: too many fridge configurations");
  }
  const int n_configs = static_cast<int>(configs);
  for (int c : l.test_configs) {
    if (c < 0 || c >= n_configs) throw ConfigError("cooking layout: test config out of range");
  }
  auto is_test = [&](int config) {
    return std::find(l.test_configs.begin(), l.test_configs.end(), config) != l.test_configs.end();
  };

  const int k = l.ingredient_count;
  family_.name = l.goal_free ? "cooking-no-goal" : "cooking";
  family_.horizon = l.horizon;
  family_.action_count = kActionCount;
  if (l.goal_free) {
    for (int c = 0; c < n_configs; ++c) {
      for (const auto& r : realizable_recipes(fridge_contents(c), k)) problems_.push_back({c, r});
    }
    family_.problem_count = static_cast<int>(problems_.size());
    family_.goal_count = 0;
    for (int mu = 0; mu < family_.problem_count; ++mu) {
      (is_test(problems_[static_cast<std::size_t>(mu)].config) ? family_.test : family_.train).push_back(mu);
    }
  } else {
    family_.problem_count = n_configs;
    family_.goal_count = k * k;
    for (int mu = 0; mu < n_configs; ++mu) (is_test(mu) ? family_.test : family_.train).push_back(mu);
  }
  family_.feature_cardinalities = {l.width, l.height, kObjectKinds, k + 1,
                                   l.goal_free ? 1 : family_.goal_count + 1, 1};
  family_.validate();
}

int CookingWorld::config_of(ProblemId mu) const {
  if (layout_.goal_free) return problems_.at(static_cast<std::size_t>(mu.index)).config;
  return mu.index;
}

std::vector<int> CookingWorld::fridge_contents(int config) const {
  // First fridge is the most significant digit: mu = k^2 a + k b + c.
  const int n = static_cast<int>(layout_.fridges.size());
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int i = n - 1; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = config % layout_.ingredient_count;
    config /= layout_.ingredient_count;
  }
  return out;
}

Recipe CookingWorld::recipe_of(GoalId goal) const {
  return {goal / layout_.ingredient_count, goal % layout_.ingredient_count};
}

std::optional<Recipe> CookingWorld::active_recipe(ProblemId mu, GoalId goal) const {
  if (layout_.goal_free) return problems_.at(static_cast<std::size_t>(mu.index)).recipe;
  if (goal == kNoGoal) return std::nullopt;
  return recipe_of(goal);
}

std::vector<GoalId> CookingWorld::goals_for(ProblemId mu) const {
  if (layout_.goal_free) return {};
  std::vector<GoalId> out;
  for (const auto& r : realizable_recipes(fridge_contents(mu.index), layout_.ingredient_count)) {
    out.push_back(r.first * layout_.ingredient_count + r.second);
  }
  return out;
}

EnvState CookingWorld::initial_state(ProblemId) const { return {layout_.start.x, layout_.start.y, 0, 0}; }

int CookingWorld::potential(const EnvState& state, const Recipe& recipe) const {
  const int inventory = state[2];
  const int stage = state[3];
  // Goal-free: holding the second ingredient before the first is in the pot
  // is worth one stage, so the recipe can be read off the rewards.
  const bool early_second = layout_.goal_free && stage == 0 && recipe.first != recipe.second &&
                            inventory == recipe.second + 1;
  return stage + (early_second ? 1 : 0);
}

StepResult CookingWorld::step(const EnvState& state, int action, ProblemId mu, GoalId goal, EpisodeMode) const {
  const auto recipe = active_recipe(mu, goal);
  Point p{state[0], state[1]};
  int inventory = state[2];
  int stage = state[3];
  bool wrong = false;

  if (action == pickup) {
    const auto it = std::find(layout_.fridges.begin(), layout_.fridges.end(), p);
    const bool blocked = layout_.goal_free && inventory != 0;
    if (it != layout_.fridges.end() && !blocked) {
      const int fridge = static_cast<int>(it - layout_.fridges.begin());
      const int ing = fridge_contents(config_of(mu))[static_cast<std::size_t>(fridge)];
      inventory = ing + 1;
      if (recipe) {
        const int needed = stage < 2 ? recipe->first : recipe->second;
        const bool early_second = layout_.goal_free && stage < 2 && ing == recipe->second;
        wrong = ing != needed && !early_second;
        if (stage == 0 && ing == recipe->first) stage = 1;
        else if (stage == 1 && ing != recipe->first) stage = 0;
        else if (stage == 2 && ing == recipe->second) stage = 3;
        else if (stage == 3 && ing != recipe->second) stage = 2;
      }
    }
  } else if (action == drop) {
    if (inventory != 0) {
      if (p == layout_.pot) {
        if (stage == 1 || stage == 3) ++stage;
      } else {
        if (stage == 1 || stage == 3) --stage;
      }
      inventory = 0;
    }
  } else if (action != ride) {
    p = apply_move(p, action, layout_.width, layout_.height);
  }

  StepResult out{{p.x, p.y, inventory, stage}, layout_.step_reward, false};
  if (recipe) {
    const int delta = potential(out.state, *recipe) - potential(state, *recipe);
    out.reward += layout_.stage_reward * delta;
    if (wrong) out.reward += layout_.wrong_pickup_reward;
    out.done = stage == 4;
  }
  return out;
}

Observation CookingWorld::observe(const EnvState& state, ProblemId, GoalId goal) const {
  const Point p{state[0], state[1]};
  ObjectKind obj = none;
  if (p == layout_.pot) obj = pot;
  else if (std::find(layout_.fridges.begin(), layout_.fridges.end(), p) != layout_.fridges.end()) obj = fridge;
  const int goal_feature = layout_.goal_free || goal == kNoGoal ? 0 : goal + 1;
  return {p.x, p.y, obj, state[2], goal_feature, 0};
}

// ---------------------------------------------------------------------------

std::unique_ptr<Environment> make_environment(const KeyValueConfig& cfg) {
  const std::string fam = cfg.get_string("family", "");
  if (fam == "distracting-bus" || fam == "map" || fam == "bus-reduced") {
    return std::make_unique<BusWorld>(parse_bus_layout(cfg));
  }
  if (fam == "cooking" || fam == "cooking-no-goal") {
    return std::make_unique<CookingWorld>(parse_cooking_layout(cfg));
  }
  if (fam == "bandit") {
    const auto bandit = tabular::make_bandit_family(cfg.get_int("bandit_actions", 2), cfg.get_int("bandit_horizon", 1));
    return std::make_unique<tabular::BanditEnvironment>(bandit);
  }
  throw ConfigError("unknown environment family '" + fam +
                    "' (expected distracting-bus|map|bus-reduced|cooking|cooking-no-goal|bandit)");
}

}  // namespace dreamlab::grid
