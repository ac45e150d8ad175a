#pragma once

// DREAM with double-Q learners: a recurrent exploration Q-network trained on
// information-gain rewards from the decoder, and an exploitation Q-network
// conditioned on z, trained on encoder samples and decoder embeddings on
// alternating trials.

#include <memory>
#include <vector>

#include "dreamlab/agents/agent.hpp"
#include "dreamlab/nn/replay.hpp"
#include "dreamlab/nn/training.hpp"

namespace dreamlab::agents {

struct DreamConfig {
  LearnerConfig learner;
  EpsilonSchedule explore_epsilon;
  EpsilonSchedule exploit_epsilon;
  double c = 0.01;       // per-step exploration penalty
  double rho2 = 0.1;     // encoder / decoder variance
  double lambda = 1.0;   // bottleneck weight
  double K = 1.0;        // bottleneck clamp
  // Conditions meta-test exploitation on the encoder instead of the
  // decoder. Only useful to show the information firewall trips.
  bool test_z_from_encoder = false;
};

// Shared learner keys plus c, rho2, lambda, K and
// explore_/exploit_epsilon_{start,end,decay}.
DreamConfig parse_dream_config(const KeyValueConfig& cfg);

struct DreamExploreItem {
  int mu = 0;
  nn::StepSequence steps;  // s_0 .. s_T
  std::vector<int> actions;
  std::vector<std::uint8_t> done;
};

struct DreamTaskItem {
  int mu = 0;
  nn::StepSequence steps;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<std::uint8_t> done;
  std::shared_ptr<const nn::StepSequence> exploration;
};

enum class ZSource { encoder, decoder };

struct DreamUpdateOptions {
  bool skip_explore = false;  // zero the exploration-Q gradients
  bool skip_task = false;     // zero the exploitation-Q gradients
};

struct DreamUpdateStats {
  bool explore_ran = false;
  bool task_ran = false;
  double explore_loss = 0.0;
  double task_loss = 0.0;
  double decoder_loss = 0.0;
  double bottleneck = 0.0;
};

class DreamAgent final : public MetaAgent {
 public:
  DreamAgent(const Environment& env, DreamConfig config, Rng& init_rng);

  std::string name() const override { return "dream"; }
  const Environment& environment() const override { return *env_; }
  TrialRecord train_trial(Rng& rng) override;
  TrialRecord test_trial(ProblemId mu, Rng& rng, int exploitation_episodes = 1) override;
  std::int64_t env_steps() const override { return explore_steps_ + exploit_steps_; }
  std::int64_t trials() const override { return trials_; }
  nn::ParamRefs parameters() override;
  void sync_targets() override;

  const DreamConfig& config() const { return config_; }

  // Trial n conditions exploitation on an encoder sample when n is even and
  // on the decoder embedding when n is odd (n counts from 0).
  static ZSource z_source(std::int64_t trial) { return trial % 2 == 0 ? ZSource::encoder : ZSource::decoder; }
  std::int64_t encoder_trials() const { return encoder_trials_; }
  std::int64_t decoder_trials() const { return decoder_trials_; }

  // One gradient update of every loss, with the task side on the given
  // trial parity. Skipped sides still run their forward passes.
  DreamUpdateStats update(Rng& rng, int parity, const DreamUpdateOptions& options = {});
  std::int64_t updates() const { return updates_; }

  // Exploration rewards of an item under the current encoder and decoder.
  std::vector<double> exploration_rewards(const DreamExploreItem& item) const;
  nn::Vec encode(int mu) const;
  // g(tau_{:t}) for t = 0 .. T of one exploration sequence.
  std::vector<nn::Vec> decode_prefixes(const nn::StepSequence& steps) const;

  // Rewards used by the most recent exploration loss for its first sampled
  // item, and that item.
  const std::vector<double>& last_exploration_rewards() const { return last_rewards_; }
  const DreamExploreItem* last_exploration_item() const { return last_item_; }

  const nn::SequenceReplay<DreamExploreItem>& explore_replay() const { return explore_replay_; }
  const nn::SequenceReplay<DreamTaskItem>& task_replay() const { return task_replay_; }

  nn::ParamRefs explore_params();
  nn::ParamRefs task_params();
  nn::ParamRefs encoder_params();
  nn::ParamRefs decoder_params();

 private:
  bool explore_update(Rng& rng, bool skip, DreamUpdateStats& stats);
  bool task_update(Rng& rng, int parity, bool skip, DreamUpdateStats& stats);

  const Environment* env_;
  DreamConfig config_;
  int features_ = 0;

  nn::RecurrentQNet explore_q_, explore_target_;
  nn::RecurrentQNet task_q_, task_target_;
  nn::ProblemEncoder encoder_, encoder_target_;
  nn::TrajectoryDecoder decoder_, decoder_target_;
  nn::Adam explore_opt_, task_opt_, encoder_opt_, decoder_opt_;

  nn::SequenceReplay<DreamExploreItem> explore_replay_;
  nn::SequenceReplay<DreamTaskItem> task_replay_;

  std::int64_t trials_ = 0;
  std::int64_t explore_steps_ = 0;
  std::int64_t exploit_steps_ = 0;
  std::int64_t pending_steps_ = 0;
  std::int64_t updates_ = 0;
  std::int64_t encoder_trials_ = 0;
  std::int64_t decoder_trials_ = 0;

  std::vector<double> last_rewards_;
  const DreamExploreItem* last_item_ = nullptr;
};

}  // namespace dreamlab::agents
