#include "dreamlab/env_core.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

namespace dreamlab {

const char* to_string(Split split) { return split == Split::train ? "train" : "test"; }

const char* to_string(EpisodeMode mode) {
  return mode == EpisodeMode::explore ? "explore" : "exploit";
}

void ProblemFamily::validate() const {
  if (problem_count <= 0) throw ConfigError(name + ": problem_count must be positive");
  if (horizon <= 0) throw ConfigError(name + ": horizon must be positive");
  if (action_count <= 0) throw ConfigError(name + ": action_count must be positive");
  if (exploitation_episodes <= 0) throw ConfigError(name + ": need at least one exploitation episode");
  std::set<int> seen;
  for (int id : train) {
    if (id < 0 || id >= problem_count) throw ConfigError(name + ": train id out of range");
    seen.insert(id);
  }
  for (int id : test) {
    if (id < 0 || id >= problem_count) throw ConfigError(name + ": test id out of range");
    if (seen.count(id) != 0) throw ConfigError(name + ": train and test splits overlap");
  }
}

double Trajectory::total_return() const {
  return std::accumulate(rewards.begin(), rewards.end(), 0.0);
}

Trajectory Trajectory::prefix(std::size_t t) const {
  if (t > length()) throw ValidationError("prefix longer than trajectory");
  Trajectory out;
  out.goal = goal;
  out.mode = mode;
  out.observations.assign(observations.begin(), observations.begin() + static_cast<long>(t) + 1);
  out.states.assign(states.begin(), states.begin() + static_cast<long>(t) + 1);
  out.actions.assign(actions.begin(), actions.begin() + static_cast<long>(t));
  out.rewards.assign(rewards.begin(), rewards.begin() + static_cast<long>(t));
  out.done.assign(done.begin(), done.begin() + static_cast<long>(t));
  return out;
}

ProblemId ProblemIdGuard::read() const {
  if (meta_test_) throw InformationLeak("problem ID read during meta-test");
  return id_;
}

double TrialRecord::mean_return() const {
  if (returns.empty()) return 0.0;
  return std::accumulate(returns.begin(), returns.end(), 0.0) / static_cast<double>(returns.size());
}

ProblemId sample_problem(const ProblemFamily& family, Split split, Rng& rng) {
  const auto& ids = family.split(split);
  if (ids.empty()) {
    throw ConfigError(family.name + ": cannot sample from empty " + to_string(split) + " split");
  }
  std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
  return ProblemId{ids[pick(rng)]};
}

GoalId sample_goal(const Environment& env, ProblemId mu, Rng& rng) {
  const auto goals = env.goals_for(mu);
  if (goals.empty()) return kNoGoal;
  std::uniform_int_distribution<std::size_t> pick(0, goals.size() - 1);
  return goals[pick(rng)];
}

Trajectory run_episode(Policy& policy, const Environment& env, ProblemId mu, GoalId goal,
                       EpisodeMode mode, Rng& rng, const EpisodeContext& context) {
  const auto& family = env.family();
  Trajectory traj;
  traj.goal = goal;
  traj.mode = mode;
  EnvState state = env.initial_state(mu);
  traj.states.push_back(state);
  traj.observations.push_back(env.observe(state, mu, goal));

  policy.begin_episode(context);
  for (int t = 0; t < family.horizon; ++t) {
    const int action = policy.act(traj, rng);
    if (action < 0 || action >= family.action_count) {
      throw ProtocolError("policy emitted action " + std::to_string(action) + " outside [0, " +
                          std::to_string(family.action_count) + ")");
    }
    StepResult next = env.step(state, action, mu, goal, mode);
    state = std::move(next.state);
    traj.actions.push_back(action);
    traj.rewards.push_back(next.reward);
    traj.done.push_back(next.done ? 1 : 0);
    traj.states.push_back(state);
    traj.observations.push_back(env.observe(state, mu, goal));
    if (next.done) break;
  }
  return traj;
}

Trajectory run_episode(Policy& policy, const Environment& env, ProblemId mu, GoalId goal,
                       EpisodeMode mode, Rng& rng, bool meta_test) {
  EpisodeContext context;
  context.mode = mode;
  context.goal = goal;
  context.episode_index = mode == EpisodeMode::explore ? 0 : 1;
  context.problem = ProblemIdGuard(mu, meta_test);
  return run_episode(policy, env, mu, goal, mode, rng, context);
}

TrialRecord run_trial(Policy& exploration_policy, Policy& task_policy, const Environment& env,
                      ProblemId mu, Rng& rng, const TrialOptions& options) {
  if (options.exploitation_episodes < 1) throw ConfigError("trial needs N >= 1");
  TrialRecord record;
  record.problem = mu;

  // The first exploitation goal is drawn up front so a goal-observing
  // exploration episode sees the same goal.
  const GoalId first_goal = sample_goal(env, mu, rng);

  EpisodeContext explore_ctx;
  explore_ctx.mode = EpisodeMode::explore;
  explore_ctx.goal = options.exploration_sees_goal ? first_goal : kNoGoal;
  explore_ctx.episode_index = 0;
  explore_ctx.problem = ProblemIdGuard(mu, options.meta_test);
  record.exploration = run_episode(exploration_policy, env, mu, explore_ctx.goal,
                                   EpisodeMode::explore, rng, explore_ctx);
  record.exploration_return = record.exploration.total_return();

  for (int n = 0; n < options.exploitation_episodes; ++n) {
    EpisodeContext ctx;
    ctx.mode = EpisodeMode::exploit;
    ctx.goal = n == 0 ? first_goal : sample_goal(env, mu, rng);
    ctx.episode_index = n + 1;
    ctx.exploration = &record.exploration;
    ctx.previous = n == 0 ? &record.exploration : &record.exploitations.back();
    ctx.problem = ProblemIdGuard(mu, options.meta_test);
    Trajectory traj = run_episode(task_policy, env, mu, ctx.goal, EpisodeMode::exploit, rng, ctx);
    record.returns.push_back(traj.total_return());
    record.exploitations.push_back(std::move(traj));
  }
  return record;
}

int UniformPolicy::act(const Trajectory&, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, action_count_ - 1);
  return pick(rng);
}

int ScriptedPolicy::act(const Trajectory& so_far, Rng&) {
  if (actions_.empty()) return 0;
  const std::size_t t = std::min(so_far.length(), actions_.size() - 1);
  return actions_[t];
}

}  // namespace dreamlab
