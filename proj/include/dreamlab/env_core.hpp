#pragma once

// Trial-structured meta-RL protocol: problem families, episodes, trajectories
// and the exploration-then-exploitation trial loop.

#include <compare>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dreamlab/errors.hpp"

namespace dreamlab {

using Rng = std::mt19937_64;

// One-hot problem index. The value carries no metric structure.
struct ProblemId {
  int index = 0;
  auto operator<=>(const ProblemId&) const = default;
};

using GoalId = int;
inline constexpr GoalId kNoGoal = -1;

// Environment-internal state. Small integer vectors keep every environment
// hashable for the exact oracles.
using EnvState = std::vector<int>;

// Discrete observation features; cardinalities come from the family.
using Observation = std::vector<int>;

enum class Split { train, test };
enum class EpisodeMode { explore, exploit };

const char* to_string(Split split);
const char* to_string(EpisodeMode mode);

struct ProblemFamily {
  std::string name;
  int problem_count = 0;
  int horizon = 0;
  int action_count = 0;
  int goal_count = 0;  // 0 when the family is not goal-conditioned
  int exploitation_episodes = 1;
  std::vector<int> train;
  std::vector<int> test;
  std::vector<int> feature_cardinalities;

  const std::vector<int>& split(Split which) const { return which == Split::train ? train : test; }

  // Throws ConfigError when counts are non-positive, splits overlap, or
  // a split member lies outside [0, problem_count).
  void validate() const;
};

struct StepResult {
  EnvState state;
  double reward = 0.0;
  bool done = false;
};

// A deterministic, finite family of MDPs indexed by ProblemId.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const ProblemFamily& family() const = 0;

  // Goals that may be sampled in problem mu (empty for goal-free families).
  virtual std::vector<GoalId> goals_for(ProblemId mu) const = 0;

  virtual EnvState initial_state(ProblemId mu) const = 0;

  virtual StepResult step(const EnvState& state, int action, ProblemId mu, GoalId goal,
                          EpisodeMode mode) const = 0;

  virtual Observation observe(const EnvState& state, ProblemId mu, GoalId goal) const = 0;
};

// One episode. observations/states hold steps+1 entries; the last one is the
// terminal state s_T.
struct Trajectory {
  GoalId goal = kNoGoal;
  EpisodeMode mode = EpisodeMode::explore;
  std::vector<Observation> observations;
  std::vector<EnvState> states;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<std::uint8_t> done;

  std::size_t length() const { return actions.size(); }
  double total_return() const;
  bool terminated() const { return !done.empty() && done.back() != 0; }
  const Observation& last_observation() const { return observations.back(); }

  // tau_{:t}: the first t steps plus observation t.
  Trajectory prefix(std::size_t t) const;

  bool operator==(const Trajectory&) const = default;
};

// Hands the problem ID to policies during meta-training only. Any read while
// the trial runs in meta-test mode raises InformationLeak.
class ProblemIdGuard {
 public:
  ProblemIdGuard(ProblemId id, bool meta_test) : id_(id), meta_test_(meta_test) {}

  bool available() const { return !meta_test_; }
  ProblemId read() const;

 private:
  ProblemId id_;
  bool meta_test_;
};

struct EpisodeContext {
  EpisodeMode mode = EpisodeMode::explore;
  GoalId goal = kNoGoal;
  int episode_index = 0;                   // 0 = exploration, 1..N = exploitation
  const Trajectory* exploration = nullptr;  // set for exploitation episodes
  const Trajectory* previous = nullptr;     // the trial's preceding episode
  ProblemIdGuard problem{ProblemId{}, true};
};

class Policy {
 public:
  virtual ~Policy() = default;

  virtual void begin_episode(const EpisodeContext& /*context*/) {}

  // `so_far` is the current episode up to (and including) the latest
  // observation. Must return an action in [0, action_count).
  virtual int act(const Trajectory& so_far, Rng& rng) = 0;
};

struct TrialRecord {
  ProblemId problem;
  Trajectory exploration;
  std::vector<Trajectory> exploitations;
  std::vector<double> returns;  // undiscounted, one per exploitation episode
  double exploration_return = 0.0;

  double mean_return() const;
  bool operator==(const TrialRecord&) const = default;
};

struct TrialOptions {
  int exploitation_episodes = 1;
  bool meta_test = false;
  bool exploration_sees_goal = false;
};

ProblemId sample_problem(const ProblemFamily& family, Split split, Rng& rng);

// Uniform over goals_for(mu); kNoGoal for goal-free families.
GoalId sample_goal(const Environment& env, ProblemId mu, Rng& rng);

Trajectory run_episode(Policy& policy, const Environment& env, ProblemId mu, GoalId goal,
                       EpisodeMode mode, Rng& rng, const EpisodeContext& context);

// Convenience overload building the context from mode/goal/meta_test.
Trajectory run_episode(Policy& policy, const Environment& env, ProblemId mu, GoalId goal,
                       EpisodeMode mode, Rng& rng, bool meta_test = false);

TrialRecord run_trial(Policy& exploration_policy, Policy& task_policy, const Environment& env,
                      ProblemId mu, Rng& rng, const TrialOptions& options = {});

// Uniform random actions; useful as a baseline and in tests.
class UniformPolicy final : public Policy {
 public:
  explicit UniformPolicy(int action_count) : action_count_(action_count) {}
  int act(const Trajectory& so_far, Rng& rng) override;

 private:
  int action_count_;
};

// Replays a fixed action list, repeating the last action when exhausted.
class ScriptedPolicy final : public Policy {
 public:
  explicit ScriptedPolicy(std::vector<int> actions) : actions_(std::move(actions)) {}
  int act(const Trajectory& so_far, Rng& rng) override;

 private:
  std::vector<int> actions_;
};

}  // namespace dreamlab
