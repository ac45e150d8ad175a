#pragma once

// Brute-force reference values over deterministic families: full-information
// optimum, the best single episode from the prior, the exact posterior over
// problems and the Thompson-sampling upper bound.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dreamlab/config.hpp"
#include "dreamlab/env_core.hpp"

namespace dreamlab::oracles {

struct PlanOptions {
  EpisodeMode mode = EpisodeMode::exploit;
  std::vector<int> disabled_actions;
};

// Finite-horizon optimal values V_t(s) for one fully specified problem,
// computed lazily by memoized backward induction. Ties pick the lowest action.
class ProblemPlanner {
 public:
  ProblemPlanner(const Environment& env, ProblemId mu, GoalId goal, PlanOptions options = {});

  double value(int t, const EnvState& state);
  int best_action(int t, const EnvState& state);
  // Optimal undiscounted return from the initial state.
  double optimal_return();
  // Greedy rollout of the optimal policy from the initial state.
  std::vector<int> optimal_actions();

 private:
  struct Entry {
    double value;
    int action;
  };
  Entry solve(int t, const EnvState& state);

  const Environment* env_;
  ProblemId mu_;
  GoalId goal_;
  PlanOptions options_;
  std::vector<std::map<EnvState, Entry>> memo_;  // per t
};

double optimal_returns(const Environment& env, ProblemId mu, GoalId goal, const PlanOptions& options = {});

// Mean of optimal_returns over the split and each problem's goals (uniform).
double expected_optimal_returns(const Environment& env, Split split);

// Problems evaluation runs on: the test split, or train when test is empty.
const std::vector<int>& evaluation_problems(const ProblemFamily& family);

// Tabulated backward induction over every state reachable from the start;
// used to check that one more Bellman sweep leaves the table unchanged.
struct ValueTable {
  std::vector<EnvState> states;
  std::vector<std::vector<double>> values;  // [t][state index], t = 0..T
};
ValueTable tabulate_values(const Environment& env, ProblemId mu, GoalId goal);
double bellman_residual(const Environment& env, ProblemId mu, GoalId goal, const ValueTable& table);

struct BeliefOptions {
  std::size_t node_cap = 1'000'000;
};

// Optimal expected return of one exploitation episode that starts from the
// prior over `problems` (goals uniform per problem, observed) and updates an
// exact belief from in-episode observations only.
double no_exploration_returns(const Environment& env, std::span<const int> problems, const BeliefOptions& options = {});
double no_exploration_returns(const Environment& env, Split split, const BeliefOptions& options = {});

// Posterior over all |M| problems: uniform over the members of `support`
// (default: every problem) that reproduce every observation, reward and done
// flag of the trajectory, zero elsewhere.
std::vector<double> exact_posterior(const Environment& env, const Trajectory& traj,
                                    std::optional<std::span<const int>> support = std::nullopt);

struct PearlOptions {
  // true: the exploitation episode executes a fresh posterior sample.
  // false: the exploration sample is kept while still consistent.
  bool resample_per_episode = true;
  double work_cap = 2e8;
};

// Thompson-sampling bound: exploration executes the optimal policy of a
// prior sample (mu', g'); exploitation executes the optimal policy of a
// posterior sample for the true goal. Exact expectation by enumeration.
double pearl_ub(const Environment& env, std::span<const int> problems, const PearlOptions& options = {});
double pearl_ub(const Environment& env, Split split, const PearlOptions& options = {});

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view text);

// Oracle values persisted as text lines "<hash> <oracle> <value>", with a
// version header. Keys combine the configuration hash and the oracle name.
class OracleCache {
 public:
  static constexpr int kVersion = 1;

  explicit OracleCache(std::filesystem::path path);

  std::optional<double> get(std::uint64_t config_hash, const std::string& oracle) const;
  void put(std::uint64_t config_hash, const std::string& oracle, double value);
  void save() const;

 private:
  std::filesystem::path path_;
  std::map<std::pair<std::uint64_t, std::string>, double> values_;
};

}  // namespace dreamlab::oracles
