#include "dreamlab/agents/erl2.hpp"

namespace dreamlab::agents {

namespace {

using nn::Mat;
using nn::Vec;

// Feeds a whole trial through one stepper. At the start of each
// exploitation episode the previous episode's terminal step is fed first,
// matching the training sequence layout.
class TrialPolicy final : public Policy {
 public:
  TrialPolicy(const nn::RecurrentQNet& net, const EpsilonSchedule* schedule, std::int64_t* counter)
      : stepper_(net), schedule_(schedule), counter_(counter) {}

  void begin_episode(const EpisodeContext& ctx) override {
    if (ctx.episode_index == 0 || ctx.previous == nullptr) {
      stepper_.reset();
      return;
    }
    const Trajectory& prev = *ctx.previous;
    const std::size_t T = prev.length();
    if (T > 0) {
      stepper_.step(prev.observations[T], prev.actions[T - 1] + 1, prev.rewards[T - 1], 1);
    }
  }

  int act(const Trajectory& so_far, Rng& rng) override {
    const std::size_t t = so_far.length();
    const Vec q = stepper_.step(so_far.observations[t], t == 0 ? 0 : so_far.actions[t - 1] + 1,
                                t == 0 ? 0.0 : so_far.rewards[t - 1], 0);
    double eps = 0.0;
    if (schedule_ != nullptr) {
      eps = (*schedule_)(*counter_);
      ++*counter_;
    }
    return epsilon_greedy(q, eps, rng);
  }

 private:
  nn::QStepper stepper_;
  const EpsilonSchedule* schedule_;
  std::int64_t* counter_;
};

// Appends an episode's steps; the terminal step carries done = 1 even when
// the episode stopped at the horizon.
void append(nn::StepSequence& seq, const Trajectory& traj) {
  seq.push(traj.observations.at(0), 0, 0.0, 0);
  for (std::size_t t = 0; t < traj.length(); ++t) {
    const bool last = t + 1 == traj.length();
    seq.push(traj.observations[t + 1], traj.actions[t] + 1, traj.rewards[t], last || traj.done[t] != 0 ? 1 : 0);
  }
}

}  // namespace

Erl2Config parse_erl2_config(const KeyValueConfig& cfg) {
  Erl2Config c;
  c.learner = parse_learner_config(cfg);
  c.epsilon = parse_epsilon(cfg, "", 500'000);
  return c;
}

Erl2Item erl2_item(const TrialRecord& record) {
  Erl2Item item;
  std::vector<const Trajectory*> episodes{&record.exploration};
  for (const auto& e : record.exploitations) episodes.push_back(&e);
  for (std::size_t k = 0; k < episodes.size(); ++k) {
    const Trajectory& ep = *episodes[k];
    const int base = static_cast<int>(item.steps.size());
    append(item.steps, ep);
    const int T = static_cast<int>(ep.length());
    const bool explore = k == 0;
    for (int t = 0; t < T; ++t) {
      Erl2Decision d;
      d.t = base + t;
      d.action = ep.actions[static_cast<std::size_t>(t)];
      d.reward = explore ? 0.0 : ep.rewards[static_cast<std::size_t>(t)];
      if (t + 1 < T) {
        d.next = base + t + 1;
      } else if (k + 1 < episodes.size()) {
        d.next = base + T + 1;  // skip the terminal step into the next episode's s_0
      }
      item.decisions.push_back(d);
    }
  }
  return item;
}

Erl2Agent::Erl2Agent(const Environment& env, Erl2Config config, Rng& init_rng)
    : env_(&env),
      config_(std::move(config)),
      replay_(config_.learner.replay_capacity, config_.learner.sequence_length) {
  const auto& fam = env.family();
  if (fam.feature_cardinalities.empty()) throw ConfigError(fam.name + ": family declares no observation features");
  features_ = static_cast<int>(fam.feature_cardinalities.size());
  q_ = nn::RecurrentQNet(fam.feature_cardinalities, fam.action_count, 0, config_.learner.shape, true, true,
                         init_rng, "erl2_q");
  target_ = q_;
  nn::AdamOptions opt;
  opt.lr = config_.learner.lr;
  opt.clip_norm = config_.learner.clip_norm;
  opt_ = nn::Adam(opt);
}

nn::ParamRefs Erl2Agent::parameters() {
  nn::ParamRefs p;
  q_.params(p);
  return p;
}

TrialRecord Erl2Agent::train_trial(Rng& rng) {
  const ProblemId mu = sample_problem(env_->family(), Split::train, rng);
  TrialPolicy policy(q_, &config_.epsilon, &steps_);
  TrialRecord rec = run_trial(policy, policy, *env_, mu, rng);
  Erl2Item item = erl2_item(rec);
  const std::size_t len = item.steps.size();
  replay_.push(std::move(item), len);
  ++trials_;
  pending_steps_ += static_cast<std::int64_t>(rec.exploration.length() + rec.exploitations.front().length());
  while (pending_steps_ >= config_.learner.update_every) {
    pending_steps_ -= config_.learner.update_every;
    update(rng);
  }
  return rec;
}

TrialRecord Erl2Agent::test_trial(ProblemId mu, Rng& rng, int exploitation_episodes) {
  TrialPolicy policy(q_, nullptr, nullptr);
  TrialOptions opts;
  opts.exploitation_episodes = exploitation_episodes;
  opts.meta_test = true;
  return run_trial(policy, policy, *env_, mu, rng, opts);
}

double Erl2Agent::update(Rng& rng) {
  const auto sample = replay_.sample(config_.learner.batch, rng);
  if (!sample) return 0.0;
  const auto& items = *sample;
  std::vector<const nn::StepSequence*> seqs;
  for (const auto* it : items) seqs.push_back(&it->steps);
  const nn::SequenceBatch b = nn::pack_sequences(seqs, features_);

  Decisions d;
  for (int j = 0; j < b.batch; ++j) {
    for (const auto& dec : items[static_cast<std::size_t>(j)]->decisions) {
      d.add(b.col(dec.t, j), dec.next < 0 ? -1 : b.col(dec.next, j), dec.action, dec.reward, dec.next < 0);
    }
  }
  nn::QCache cache;
  const Mat q = q_.forward(b, nullptr, &cache);
  const Mat qt = target_.forward(b, nullptr, nullptr);
  Mat dq;
  const double loss = ddqn_loss(q, qt, d, config_.learner.gamma, dq);
  const auto params = parameters();
  nn::zero_grads(params);
  q_.backward(b, cache, dq);
  opt_.step(params);
  ++updates_;
  if (updates_ % config_.learner.target_sync == 0) sync_targets();
  return loss;
}

// ---------------------------------------------------------------------------

namespace {

// History key: observations and actions of the trial so far, episodes
// separated by -1.
void append_key(TabularErl2Agent::Key& key, const Observation& obs) {
  key.insert(key.end(), obs.begin(), obs.end());
}

TabularErl2Agent::Key episode_key(TabularErl2Agent::Key key, const Trajectory& so_far) {
  for (std::size_t t = 0; t < so_far.observations.size(); ++t) {
    append_key(key, so_far.observations[t]);
    if (t < so_far.actions.size()) key.push_back(so_far.actions[t]);
  }
  return key;
}

class TabularPolicy final : public Policy {
 public:
  TabularPolicy(const TabularErl2Agent& agent, double epsilon) : agent_(agent), epsilon_(epsilon) {}

  void begin_episode(const EpisodeContext& ctx) override {
    if (ctx.episode_index == 0 || ctx.previous == nullptr) {
      prefix_.clear();
      return;
    }
    prefix_ = episode_key(std::move(prefix_), *ctx.previous);
    prefix_.push_back(-1);
  }

  int act(const Trajectory& so_far, Rng& rng) override {
    const int actions = agent_.environment().family().action_count;
    bool explore = epsilon_ >= 1.0;
    if (epsilon_ > 0.0 && epsilon_ < 1.0) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      explore = u(rng) < epsilon_;
    }
    if (!explore) return agent_.greedy(episode_key(prefix_, so_far));
    std::uniform_int_distribution<int> pick(0, actions - 1);
    return pick(rng);
  }

 private:
  const TabularErl2Agent& agent_;
  double epsilon_;
  TabularErl2Agent::Key prefix_;
};

}  // namespace

TabularErl2Agent::TabularErl2Agent(const Environment& env, double gamma, double epsilon)
    : env_(&env), gamma_(gamma), epsilon_(epsilon) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
}

double TabularErl2Agent::q(const Key& history, int action) const {
  auto row = table_.find(history);
  if (row == table_.end()) return 0.0;
  auto cell = row->second.find(action);
  if (cell == row->second.end()) return 0.0;
  double total = 0.0;
  std::int64_t n = 0;
  for (const auto& [next, out] : cell->second) {
    total += out.reward_sum;
    if (!next.empty()) total += static_cast<double>(out.count) * gamma_ * v(next);
    n += out.count;
  }
  return total / static_cast<double>(n);
}

double TabularErl2Agent::v(const Key& history) const { return q(history, greedy(history)); }

int TabularErl2Agent::greedy(const Key& history) const {
  const int actions = env_->family().action_count;
  int best = 0;
  double best_value = q(history, 0);
  for (int a = 1; a < actions; ++a) {
    const double value = q(history, a);
    if (value > best_value) {
      best_value = value;
      best = a;
    }
  }
  return best;
}

TrialRecord TabularErl2Agent::train_trial(Rng& rng) {
  const ProblemId mu = sample_problem(env_->family(), Split::train, rng);
  TabularPolicy policy(*this, epsilon_);
  TrialRecord rec = run_trial(policy, policy, *env_, mu, rng);

  std::vector<const Trajectory*> episodes{&rec.exploration};
  for (const auto& e : rec.exploitations) episodes.push_back(&e);
  Key prefix;
  for (std::size_t k = 0; k < episodes.size(); ++k) {
    const Trajectory& ep = *episodes[k];
    const bool explore = k == 0;
    Trajectory partial;
    partial.observations.push_back(ep.observations[0]);
    for (std::size_t t = 0; t < ep.length(); ++t) {
      const Key here = episode_key(prefix, partial);
      partial.actions.push_back(ep.actions[t]);
      partial.observations.push_back(ep.observations[t + 1]);
      Key next;
      if (t + 1 < ep.length()) {
        next = episode_key(prefix, partial);
      } else if (k + 1 < episodes.size()) {
        next = episode_key(prefix, partial);
        next.push_back(-1);
        append_key(next, episodes[k + 1]->observations[0]);
      }
      auto& out = table_[here][ep.actions[t]][next];
      out.reward_sum += explore ? 0.0 : ep.rewards[t];
      ++out.count;
    }
    prefix = episode_key(prefix, ep);
    prefix.push_back(-1);
  }
  ++trials_;
  return rec;
}

}  // namespace dreamlab::agents
