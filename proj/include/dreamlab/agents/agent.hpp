#pragma once

// Shared pieces of the meta-RL learners: epsilon schedules, the DQN
// hyperparameters every method shares, and the interface the harness drives.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "dreamlab/config.hpp"
#include "dreamlab/env_core.hpp"
#include "dreamlab/nn/networks.hpp"

namespace dreamlab::agents {

// Linear decay from start to end over decay_steps, then constant.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.01;
  std::int64_t decay_steps = 250'000;

  double operator()(std::int64_t step) const;
};

struct LearnerConfig {
  double gamma = 0.99;
  double lr = 1e-4;
  std::size_t batch = 32;
  std::int64_t target_sync = 5000;  // in updates
  int update_every = 4;             // environment steps per update
  double clip_norm = 10.0;
  std::size_t replay_capacity = 16000;
  std::size_t sequence_length = 50;
  nn::NetShape shape;
};

// Reads the shared keys (gamma, lr, batch, target_sync, update_every,
// clip_norm, replay_capacity, sequence_length and the width keys).
LearnerConfig parse_learner_config(const KeyValueConfig& cfg);
EpsilonSchedule parse_epsilon(const KeyValueConfig& cfg, const std::string& prefix,
                              std::int64_t default_decay);

// Greedy with probability 1 - epsilon. A uniform variate is drawn only when
// 0 < epsilon < 1, then a uniform action when exploring.
int epsilon_greedy(const nn::Vec& q, double epsilon, Rng& rng);

// Decision steps of a replayed batch for a double-Q loss. next_col < 0 or
// terminal = 1 ends the bootstrap.
struct Decisions {
  std::vector<int> col;
  std::vector<int> next_col;
  std::vector<int> action;
  std::vector<double> reward;
  std::vector<std::uint8_t> terminal;

  std::size_t size() const { return col.size(); }
  void add(int c, int next, int a, double r, bool term);
};

// Mean squared double-Q error over the decisions. Writes dL/dQ into dq
// (same shape as q_online, zero off the decision entries).
double ddqn_loss(const nn::Mat& q_online, const nn::Mat& q_target, const Decisions& d, double gamma,
                 nn::Mat& dq);

class MetaAgent {
 public:
  virtual ~MetaAgent() = default;

  virtual std::string name() const = 0;
  virtual const Environment& environment() const = 0;

  // One meta-training trial on a problem drawn from the train split,
  // followed by the updates its steps pay for.
  virtual TrialRecord train_trial(Rng& rng) = 0;
  // Greedy meta-test trial. The problem ID is hidden from every policy.
  virtual TrialRecord test_trial(ProblemId mu, Rng& rng, int exploitation_episodes = 1) = 0;

  // Environment steps consumed by training, exploration and exploitation.
  virtual std::int64_t env_steps() const = 0;
  virtual std::int64_t trials() const = 0;

  virtual nn::ParamRefs parameters() = 0;
  // Copies online parameters into the target networks.
  virtual void sync_targets() = 0;

  // Online parameters only; load re-syncs the targets.
  void save(const std::filesystem::path& path);
  void load(const std::filesystem::path& path);
};

// agent = dream | erl2, plus learner keys.
std::unique_ptr<MetaAgent> make_agent(const KeyValueConfig& cfg, const Environment& env, Rng& init_rng);

}  // namespace dreamlab::agents
