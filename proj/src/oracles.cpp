#include "dreamlab/oracles.hpp"

#include <algorithm>
#include <bit>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace dreamlab::oracles {

namespace {

std::vector<GoalId> goals_or_none(const Environment& env, ProblemId mu) {
  auto goals = env.goals_for(mu);
  if (goals.empty()) goals.push_back(kNoGoal);
  return goals;
}

bool allowed(const PlanOptions& options, int action) {
  return std::find(options.disabled_actions.begin(), options.disabled_actions.end(), action) ==
         options.disabled_actions.end();
}

}  // namespace

ProblemPlanner::ProblemPlanner(const Environment& env, ProblemId mu, GoalId goal, PlanOptions options)
    : env_(&env), mu_(mu), goal_(goal), options_(std::move(options)),
      memo_(static_cast<std::size_t>(env.family().horizon) + 1) {}

ProblemPlanner::Entry ProblemPlanner::solve(int t, const EnvState& state) {
  const int horizon = env_->family().horizon;
  if (t >= horizon) return {0.0, 0};
  auto& table = memo_[static_cast<std::size_t>(t)];
  if (auto it = table.find(state); it != table.end()) return it->second;
  Entry best{-std::numeric_limits<double>::infinity(), 0};
  for (int a = 0; a < env_->family().action_count; ++a) {
    if (!allowed(options_, a)) continue;
    const auto res = env_->step(state, a, mu_, goal_, options_.mode);
    const double v = res.reward + (res.done ? 0.0 : solve(t + 1, res.state).value);
    if (v > best.value) best = {v, a};
  }
  if (!std::isfinite(best.value)) throw ConfigError("planner: every action is disabled");
  table.emplace(state, best);
  return best;
}

double ProblemPlanner::value(int t, const EnvState& state) { return solve(t, state).value; }

int ProblemPlanner::best_action(int t, const EnvState& state) { return solve(t, state).action; }

double ProblemPlanner::optimal_return() { return value(0, env_->initial_state(mu_)); }

std::vector<int> ProblemPlanner::optimal_actions() {
  std::vector<int> out;
  EnvState s = env_->initial_state(mu_);
  for (int t = 0; t < env_->family().horizon; ++t) {
    const int a = best_action(t, s);
    out.push_back(a);
    const auto res = env_->step(s, a, mu_, goal_, options_.mode);
    if (res.done) break;
    s = res.state;
  }
  return out;
}

double optimal_returns(const Environment& env, ProblemId mu, GoalId goal, const PlanOptions& options) {
  ProblemPlanner planner(env, mu, goal, options);
  return planner.optimal_return();
}

const std::vector<int>& evaluation_problems(const ProblemFamily& family) {
  return family.test.empty() ? family.train : family.test;
}

double expected_optimal_returns(const Environment& env, Split split) {
  const auto& ids = env.family().split(split);
  if (ids.empty()) throw ConfigError("expected_optimal_returns: empty split");
  double total = 0.0;
  for (int mu : ids) {
    const auto goals = goals_or_none(env, ProblemId{mu});
    double per = 0.0;
    for (GoalId g : goals) per += optimal_returns(env, ProblemId{mu}, g);
    total += per / static_cast<double>(goals.size());
  }
  return total / static_cast<double>(ids.size());
}

// ---------------------------------------------------------------------------

ValueTable tabulate_values(const Environment& env, ProblemId mu, GoalId goal) {
  const auto& fam = env.family();
  std::map<EnvState, std::size_t> index;
  ValueTable table;
  std::vector<EnvState> frontier{env.initial_state(mu)};
  index[frontier[0]] = 0;
  table.states.push_back(frontier[0]);
  while (!frontier.empty()) {
    std::vector<EnvState> next;
    for (const auto& s : frontier) {
      for (int a = 0; a < fam.action_count; ++a) {
        const auto res = env.step(s, a, mu, goal, EpisodeMode::exploit);
        if (index.emplace(res.state, table.states.size()).second) {
          table.states.push_back(res.state);
          next.push_back(res.state);
        }
      }
    }
    frontier = std::move(next);
  }
  const std::size_t n = table.states.size();
  table.values.assign(static_cast<std::size_t>(fam.horizon) + 1, std::vector<double>(n, 0.0));
  for (int t = fam.horizon - 1; t >= 0; --t) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < fam.action_count; ++a) {
        const auto res = env.step(table.states[i], a, mu, goal, EpisodeMode::exploit);
        const double v = res.reward + (res.done ? 0.0 : table.values[static_cast<std::size_t>(t) + 1][index.at(res.state)]);
        best = std::max(best, v);
      }
      table.values[static_cast<std::size_t>(t)][i] = best;
    }
  }
  return table;
}

double bellman_residual(const Environment& env, ProblemId mu, GoalId goal, const ValueTable& table) {
  const auto& fam = env.family();
  std::map<EnvState, std::size_t> index;
  for (std::size_t i = 0; i < table.states.size(); ++i) index[table.states[i]] = i;
  double residual = 0.0;
  for (int t = 0; t < fam.horizon; ++t) {
    for (std::size_t i = 0; i < table.states.size(); ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < fam.action_count; ++a) {
        const auto res = env.step(table.states[i], a, mu, goal, EpisodeMode::exploit);
        const auto it = index.find(res.state);
        if (it == index.end()) throw ValidationError("value table is not closed under the dynamics");
        best = std::max(best, res.reward + (res.done ? 0.0 : table.values[static_cast<std::size_t>(t) + 1][it->second]));
      }
      residual = std::max(residual, std::abs(best - table.values[static_cast<std::size_t>(t)][i]));
    }
  }
  return residual;
}

// ---------------------------------------------------------------------------
// Belief-state expectimax

namespace {

struct Particle {
  int mu;
  GoalId goal;
  EnvState state;
  double weight;
};

std::vector<long long> outcome_key(const Observation& obs, double reward) {
  std::vector<long long> key(obs.begin(), obs.end());
  key.push_back(std::llround(reward * 1e9));
  return key;
}

class BeliefSolver {
 public:
  BeliefSolver(const Environment& env, const BeliefOptions& options) : env_(env), options_(options) {}

  // Unnormalized: sum over particles of weight x return.
  double value(int t, const std::vector<Particle>& belief) {
    if (t >= env_.family().horizon || belief.empty()) return 0.0;
    std::vector<int> key{t};
    for (const auto& p : belief) {
      key.push_back(p.mu);
      key.push_back(p.goal);
      key.insert(key.end(), p.state.begin(), p.state.end());
      key.push_back(-7);  // separator: states may differ in length
    }
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    if (memo_.size() >= options_.node_cap) {
      throw UnsupportedInstance("belief-state search exceeded " + std::to_string(options_.node_cap) + " nodes");
    }

    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < env_.family().action_count; ++a) {
      double total = 0.0;
      std::map<std::vector<long long>, std::vector<Particle>> groups;
      for (const auto& p : belief) {
        const auto res = env_.step(p.state, a, ProblemId{p.mu}, p.goal, EpisodeMode::exploit);
        total += p.weight * res.reward;
        if (res.done) continue;
        groups[outcome_key(env_.observe(res.state, ProblemId{p.mu}, p.goal), res.reward)].push_back(
            {p.mu, p.goal, res.state, p.weight});
      }
      for (const auto& [k, group] : groups) total += value(t + 1, group);
      best = std::max(best, total);
    }
    memo_.emplace(std::move(key), best);
    return best;
  }

 private:
  const Environment& env_;
  BeliefOptions options_;
  std::map<std::vector<int>, double> memo_;
};

}  // namespace

double no_exploration_returns(const Environment& env, std::span<const int> problems, const BeliefOptions& options) {
  if (problems.empty()) throw ConfigError("no_exploration_returns: empty problem set");
  std::map<std::vector<long long>, std::vector<Particle>> groups;
  for (int mu : problems) {
    const auto goals = goals_or_none(env, ProblemId{mu});
    const double w = 1.0 / static_cast<double>(problems.size()) / static_cast<double>(goals.size());
    for (GoalId g : goals) {
      const auto s = env.initial_state(ProblemId{mu});
      groups[outcome_key(env.observe(s, ProblemId{mu}, g), 0.0)].push_back({mu, g, s, w});
    }
  }
  BeliefSolver solver(env, options);
  double total = 0.0;
  for (const auto& [k, group] : groups) total += solver.value(0, group);
  return total;
}

double no_exploration_returns(const Environment& env, Split split, const BeliefOptions& options) {
  return no_exploration_returns(env, env.family().split(split), options);
}

// ---------------------------------------------------------------------------

std::vector<double> exact_posterior(const Environment& env, const Trajectory& traj,
                                    std::optional<std::span<const int>> support) {
  const auto& fam = env.family();
  std::vector<int> candidates;
  if (support) candidates.assign(support->begin(), support->end());
  else for (int mu = 0; mu < fam.problem_count; ++mu) candidates.push_back(mu);

  std::vector<double> post(static_cast<std::size_t>(fam.problem_count), 0.0);
  int consistent = 0;
  for (int m : candidates) {
    const ProblemId mu{m};
    EnvState s = env.initial_state(mu);
    bool ok = traj.observations.empty() || env.observe(s, mu, traj.goal) == traj.observations[0];
    for (std::size_t t = 0; ok && t < traj.length(); ++t) {
      const auto res = env.step(s, traj.actions[t], mu, traj.goal, traj.mode);
      ok = res.reward == traj.rewards[t] && (res.done ? 1 : 0) == traj.done[t] &&
           env.observe(res.state, mu, traj.goal) == traj.observations[t + 1];
      s = res.state;
    }
    if (ok) {
      post[static_cast<std::size_t>(m)] = 1.0;
      ++consistent;
    }
  }
  if (consistent == 0) throw InconsistentTrajectory("no problem in the support explains the trajectory");
  for (auto& p : post) p /= consistent;
  return post;
}

// ---------------------------------------------------------------------------
// Thompson-sampling bound

double pearl_ub(const Environment& env, std::span<const int> problems, const PearlOptions& options) {
  if (problems.empty()) throw ConfigError("pearl_ub: empty problem set");
  const auto& fam = env.family();

  struct Sample {
    int mu;
    GoalId goal;
    double weight;
  };
  std::vector<Sample> prior;
  std::map<int, std::vector<GoalId>> goals_of;
  for (int mu : problems) {
    const auto goals = goals_or_none(env, ProblemId{mu});
    goals_of[mu] = goals;
    for (GoalId g : goals) {
      prior.push_back({mu, g, 1.0 / static_cast<double>(problems.size()) / static_cast<double>(goals.size())});
    }
  }
  const double work = static_cast<double>(prior.size()) * static_cast<double>(prior.size()) *
                      static_cast<double>(problems.size()) * fam.horizon;
  if (work > options.work_cap) throw UnsupportedInstance("pearl_ub enumeration too large for this instance");

  std::map<std::pair<int, GoalId>, std::unique_ptr<ProblemPlanner>> planners;
  auto planner = [&](int mu, GoalId g) -> ProblemPlanner& {
    auto& slot = planners[{mu, g}];
    if (!slot) slot = std::make_unique<ProblemPlanner>(env, ProblemId{mu}, g);
    return *slot;
  };
  // Return of the optimal policy for (assumed, g) executed in the true problem.
  auto rollout = [&](int truth, int assumed, GoalId g, EpisodeMode mode, Trajectory* record) {
    auto& plan = planner(assumed, g);
    EnvState s = env.initial_state(ProblemId{truth});
    double ret = 0.0;
    if (record) {
      record->goal = g;
      record->mode = mode;
      record->observations.push_back(env.observe(s, ProblemId{truth}, g));
    }
    for (int t = 0; t < fam.horizon; ++t) {
      const int a = plan.best_action(t, s);
      const auto res = env.step(s, a, ProblemId{truth}, g, mode);
      ret += res.reward;
      s = res.state;
      if (record) {
        record->actions.push_back(a);
        record->rewards.push_back(res.reward);
        record->done.push_back(res.done ? 1 : 0);
        record->observations.push_back(env.observe(s, ProblemId{truth}, g));
      }
      if (res.done) break;
    }
    return ret;
  };
  std::map<std::tuple<int, GoalId, int>, double> exploit_value;
  auto exploit = [&](int truth, GoalId g, int assumed) {
    const auto key = std::make_tuple(truth, g, assumed);
    if (auto it = exploit_value.find(key); it != exploit_value.end()) return it->second;
    const double v = rollout(truth, assumed, g, EpisodeMode::exploit, nullptr);
    exploit_value.emplace(key, v);
    return v;
  };

  double total = 0.0;
  for (const auto& truth : prior) {
    for (const auto& ts : prior) {
      Trajectory traj;
      rollout(truth.mu, ts.mu, ts.goal, EpisodeMode::explore, &traj);
      const auto post = exact_posterior(env, traj, problems);
      // Condition on the observed exploitation goal as well.
      std::vector<std::pair<int, double>> weights;
      double norm = 0.0;
      bool keep_sample = false;
      for (int mu : problems) {
        if (post[static_cast<std::size_t>(mu)] == 0.0) continue;
        const auto& goals = goals_of[mu];
        if (std::find(goals.begin(), goals.end(), truth.goal) == goals.end()) continue;
        const double w = post[static_cast<std::size_t>(mu)] / static_cast<double>(goals.size());
        weights.emplace_back(mu, w);
        norm += w;
        keep_sample = keep_sample || mu == ts.mu;
      }
      double value = 0.0;
      if (!options.resample_per_episode && keep_sample) {
        value = exploit(truth.mu, truth.goal, ts.mu);
      } else {
        for (const auto& [mu, w] : weights) value += w / norm * exploit(truth.mu, truth.goal, mu);
      }
      total += truth.weight * ts.weight * value;
    }
  }
  return total;
}

double pearl_ub(const Environment& env, Split split, const PearlOptions& options) {
  return pearl_ub(env, env.family().split(split), options);
}

// ---------------------------------------------------------------------------

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

OracleCache::OracleCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  std::getline(in, line);
  if (line != "dreamlab-oracle-cache " + std::to_string(kVersion)) {
    throw ValidationError("oracle cache " + path_.string() + ": unsupported header '" + line + "'");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string hash_hex, name, value;
    if (!(ss >> hash_hex >> name >> value)) throw ValidationError("oracle cache: malformed line '" + line + "'");
    values_[{std::stoull(hash_hex, nullptr, 16), name}] = std::stod(value);
  }
}

std::optional<double> OracleCache::get(std::uint64_t config_hash, const std::string& oracle) const {
  auto it = values_.find({config_hash, oracle});
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

void OracleCache::put(std::uint64_t config_hash, const std::string& oracle, double value) {
  if (oracle.find_first_of(" \t\n") != std::string::npos) throw ValidationError("oracle name must not contain spaces");
  values_[{config_hash, oracle}] = value;
}

void OracleCache::save() const {
  std::ofstream out(path_);
  if (!out) throw ConfigError("cannot write oracle cache " + path_.string());
  out << "dreamlab-oracle-cache " << kVersion << "\n";
  char buf[128];
  for (const auto& [key, value] : values_) {
    std::snprintf(buf, sizeof buf, "%016" PRIx64 " %s %.17g\n", key.first, key.second.c_str(), value);
    out << buf;
  }
}

}  // namespace dreamlab::oracles
