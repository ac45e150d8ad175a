#pragma once

// E-RL2: one recurrent Q-network over the whole trial. Its hidden state runs
// across the exploration/exploitation boundary and resets between trials.
// Exploration-episode rewards enter the learning targets as 0 and the last
// exploration step bootstraps from the first exploitation step, so
// exploration is credited only through later exploitation value.

#include <map>
#include <vector>

#include "dreamlab/agents/agent.hpp"
#include "dreamlab/nn/replay.hpp"
#include "dreamlab/nn/training.hpp"

namespace dreamlab::agents {

struct Erl2Config {
  LearnerConfig learner;
  EpsilonSchedule epsilon{1.0, 0.01, 500'000};
};

// Shared learner keys plus epsilon_{start,end,decay}.
Erl2Config parse_erl2_config(const KeyValueConfig& cfg);

// One decision inside a trial sequence, in sequence positions.
struct Erl2Decision {
  int t = 0;
  int next = -1;  // -1: terminal
  int action = 0;
  double reward = 0.0;  // as used in the target
};

struct Erl2Item {
  nn::StepSequence steps;
  std::vector<Erl2Decision> decisions;
};

// Lays a trial out as one sequence (exploration s_0..s_T, then each
// exploitation episode) with the zeroed-exploration-reward decisions.
Erl2Item erl2_item(const TrialRecord& record);

class Erl2Agent final : public MetaAgent {
 public:
  Erl2Agent(const Environment& env, Erl2Config config, Rng& init_rng);

  std::string name() const override { return "erl2"; }
  const Environment& environment() const override { return *env_; }
  TrialRecord train_trial(Rng& rng) override;
  TrialRecord test_trial(ProblemId mu, Rng& rng, int exploitation_episodes = 1) override;
  std::int64_t env_steps() const override { return steps_; }
  std::int64_t trials() const override { return trials_; }
  nn::ParamRefs parameters() override;
  void sync_targets() override { target_ = q_; }

  const Erl2Config& config() const { return config_; }
  double update(Rng& rng);
  std::int64_t updates() const { return updates_; }
  const nn::SequenceReplay<Erl2Item>& replay() const { return replay_; }

 private:
  const Environment* env_;
  Erl2Config config_;
  int features_ = 0;
  nn::RecurrentQNet q_, target_;
  nn::Adam opt_;
  nn::SequenceReplay<Erl2Item> replay_;
  std::int64_t trials_ = 0;
  std::int64_t steps_ = 0;
  std::int64_t pending_steps_ = 0;
  std::int64_t updates_ = 0;
};

// E-RL2 with function approximation replaced by lookup tables keyed on the
// full trial history. Q(h, a) is the mean over every stored transition from
// (h, a) of r + gamma * max_a' Q(h', a'), evaluated with the current tables
// (unvisited entries are 0, ties go to the lowest action). Exploration
// rewards are zeroed as in the network version.
class TabularErl2Agent {
 public:
  using Key = std::vector<int>;

  TabularErl2Agent(const Environment& env, double gamma, double epsilon);

  TrialRecord train_trial(Rng& rng);
  double q(const Key& history, int action) const;
  double v(const Key& history) const;
  int greedy(const Key& history) const;

  std::int64_t trials() const { return trials_; }
  double epsilon() const { return epsilon_; }
  const Environment& environment() const { return *env_; }

 private:
  struct Outcome {
    double reward_sum = 0.0;
    std::int64_t count = 0;
  };
  // history -> action -> next history (empty = terminal) -> outcome
  std::map<Key, std::map<int, std::map<Key, Outcome>>> table_;

  const Environment* env_;
  double gamma_;
  double epsilon_;
  std::int64_t trials_ = 0;
};

}  // namespace dreamlab::agents
