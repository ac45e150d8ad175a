#include "dreamlab/agents/dream.hpp"

#include <cmath>

#include "dreamlab/dream_math.hpp"

namespace dreamlab::agents {

namespace {

using nn::Mat;
using nn::Vec;

// Acts from a recurrent Q-network, feeding one step per decision.
class QPolicy final : public Policy {
 public:
  QPolicy(const nn::RecurrentQNet& net, const EpsilonSchedule* schedule, std::int64_t* counter)
      : stepper_(net), schedule_(schedule), counter_(counter) {}

  void set_z(std::optional<Vec> z) { z_ = std::move(z); }
  void begin_episode(const EpisodeContext&) override { stepper_.reset(); }

  int act(const Trajectory& so_far, Rng& rng) override {
    const std::size_t t = so_far.length();
    const Vec q = stepper_.step(so_far.observations[t], t == 0 ? 0 : so_far.actions[t - 1] + 1,
                                t == 0 ? 0.0 : so_far.rewards[t - 1], t == 0 ? 0 : so_far.done[t - 1],
                                z_ ? &*z_ : nullptr);
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
  std::optional<Vec> z_;
};

// Exploitation policy: picks z at the start of each episode.
class TaskPolicy final : public Policy {
 public:
  using ZFn = std::function<Vec(const EpisodeContext&)>;
  TaskPolicy(const nn::RecurrentQNet& net, const EpsilonSchedule* schedule, std::int64_t* counter, ZFn z)
      : inner_(net, schedule, counter), z_fn_(std::move(z)) {}

  void begin_episode(const EpisodeContext& ctx) override {
    inner_.set_z(z_fn_(ctx));
    inner_.begin_episode(ctx);
  }
  int act(const Trajectory& so_far, Rng& rng) override { return inner_.act(so_far, rng); }

 private:
  QPolicy inner_;
  ZFn z_fn_;
};

Mat repeat_columns(const Mat& per_seq, const nn::SequenceBatch& b) {
  Mat z(per_seq.rows(), b.columns());
  for (int t = 0; t < b.length; ++t) z.middleCols(static_cast<Eigen::Index>(t) * b.batch, b.batch) = per_seq;
  return z;
}

// Sums dz over the valid columns of each sequence.
Mat sum_columns(const Mat& dz, const nn::SequenceBatch& b) {
  Mat out = Mat::Zero(dz.rows(), b.batch);
  for (int t = 0; t < b.length; ++t) {
    for (int j = 0; j < b.batch; ++j) {
      const int c = b.col(t, j);
      if (b.valid[static_cast<std::size_t>(c)] != 0) out.col(j) += dz.col(c);
    }
  }
  return out;
}

template <class Item>
std::vector<const nn::StepSequence*> step_ptrs(const std::vector<const Item*>& items) {
  std::vector<const nn::StepSequence*> out;
  for (const Item* it : items) out.push_back(&it->steps);
  return out;
}

std::vector<int> features_of(const Environment& env) { return env.family().feature_cardinalities; }

}  // namespace

DreamConfig parse_dream_config(const KeyValueConfig& cfg) {
  DreamConfig c;
  c.learner = parse_learner_config(cfg);
  c.explore_epsilon = parse_epsilon(cfg, "explore_", 250'000);
  c.exploit_epsilon = parse_epsilon(cfg, "exploit_", 250'000);
  c.c = cfg.get_double("c", c.c);
  c.rho2 = cfg.get_double("rho2", c.rho2);
  c.lambda = cfg.get_double("lambda", c.lambda);
  c.K = cfg.get_double("K", c.K);
  c.test_z_from_encoder = cfg.get_bool("test_z_from_encoder", false);
  if (!(c.rho2 >= 0.0)) throw ConfigError("rho2 must be non-negative");
  return c;
}

DreamAgent::DreamAgent(const Environment& env, DreamConfig config, Rng& init_rng)
    : env_(&env),
      config_(std::move(config)),
      explore_replay_(config_.learner.replay_capacity, config_.learner.sequence_length),
      task_replay_(config_.learner.replay_capacity, config_.learner.sequence_length) {
  const auto& fam = env.family();
  const auto cards = features_of(env);
  if (cards.empty()) throw ConfigError(fam.name + ": family declares no observation features");
  features_ = static_cast<int>(cards.size());
  const auto& shape = config_.learner.shape;
  explore_q_ = nn::RecurrentQNet(cards, fam.action_count, 0, shape, true, false, init_rng, "explore_q");
  task_q_ = nn::RecurrentQNet(cards, fam.action_count, shape.z_dim, shape, true, false, init_rng, "task_q");
  encoder_ = nn::ProblemEncoder(fam.problem_count, shape, init_rng, "encoder");
  decoder_ = nn::TrajectoryDecoder(cards, fam.action_count, shape, init_rng, "decoder");
  explore_target_ = explore_q_;
  task_target_ = task_q_;
  encoder_target_ = encoder_;
  decoder_target_ = decoder_;

  nn::AdamOptions opt;
  opt.lr = config_.learner.lr;
  opt.clip_norm = config_.learner.clip_norm;
  explore_opt_ = nn::Adam(opt);
  task_opt_ = nn::Adam(opt);
  encoder_opt_ = nn::Adam(opt);
  decoder_opt_ = nn::Adam(opt);
}

nn::ParamRefs DreamAgent::explore_params() {
  nn::ParamRefs p;
  explore_q_.params(p);
  return p;
}
nn::ParamRefs DreamAgent::task_params() {
  nn::ParamRefs p;
  task_q_.params(p);
  return p;
}
nn::ParamRefs DreamAgent::encoder_params() {
  nn::ParamRefs p;
  encoder_.params(p);
  return p;
}
nn::ParamRefs DreamAgent::decoder_params() {
  nn::ParamRefs p;
  decoder_.params(p);
  return p;
}

nn::ParamRefs DreamAgent::parameters() {
  nn::ParamRefs p;
  explore_q_.params(p);
  task_q_.params(p);
  encoder_.params(p);
  decoder_.params(p);
  return p;
}

void DreamAgent::sync_targets() {
  explore_target_ = explore_q_;
  task_target_ = task_q_;
  encoder_target_ = encoder_;
  decoder_target_ = decoder_;
}

Vec DreamAgent::encode(int mu) const {
  const int ids[1] = {mu};
  return encoder_.forward(ids, nullptr).col(0);
}

std::vector<Vec> DreamAgent::decode_prefixes(const nn::StepSequence& steps) const {
  const Mat g = decoder_.forward(nn::pack_sequences({&steps}, features_), nullptr);
  std::vector<Vec> out;
  for (Eigen::Index t = 0; t < g.cols(); ++t) out.push_back(g.col(t));
  return out;
}

std::vector<double> DreamAgent::exploration_rewards(const DreamExploreItem& item) const {
  const auto g = decode_prefixes(item.steps);
  return dream::exploration_rewards(encode(item.mu), g, config_.c);
}

TrialRecord DreamAgent::train_trial(Rng& rng) {
  const ProblemId mu = sample_problem(env_->family(), Split::train, rng);
  const std::int64_t trial = trials_;
  const ZSource source = z_source(trial);
  const double rho = std::sqrt(config_.rho2);

  QPolicy explorer(explore_q_, &config_.explore_epsilon, &explore_steps_);
  TaskPolicy exploiter(task_q_, &config_.exploit_epsilon, &exploit_steps_, [&](const EpisodeContext& ctx) {
    if (source == ZSource::encoder) {
      return dream::sample_embedding(encode(ctx.problem.read().index), rho, rng);
    }
    return Vec(decode_prefixes(nn::episode_steps(*ctx.exploration)).back());
  });

  TrialOptions opts;
  opts.exploitation_episodes = 1;
  TrialRecord rec = run_trial(explorer, exploiter, *env_, mu, rng, opts);
  (source == ZSource::encoder ? encoder_trials_ : decoder_trials_) += 1;

  DreamExploreItem ex;
  ex.mu = mu.index;
  ex.steps = nn::episode_steps(rec.exploration);
  ex.actions = rec.exploration.actions;
  ex.done = rec.exploration.done;
  auto shared = std::make_shared<const nn::StepSequence>(ex.steps);
  const std::size_t ex_len = ex.steps.size();
  explore_replay_.push(std::move(ex), ex_len);

  const Trajectory& exploit = rec.exploitations.front();
  DreamTaskItem task;
  task.mu = mu.index;
  task.steps = nn::episode_steps(exploit);
  task.actions = exploit.actions;
  task.rewards = exploit.rewards;
  task.done = exploit.done;
  task.exploration = std::move(shared);
  const std::size_t task_len = task.steps.size();
  task_replay_.push(std::move(task), task_len);

  ++trials_;
  pending_steps_ += static_cast<std::int64_t>(rec.exploration.length() + exploit.length());
  const int parity = static_cast<int>(trial % 2);
  while (pending_steps_ >= config_.learner.update_every) {
    pending_steps_ -= config_.learner.update_every;
    update(rng, parity);
  }
  return rec;
}

TrialRecord DreamAgent::test_trial(ProblemId mu, Rng& rng, int exploitation_episodes) {
  QPolicy explorer(explore_q_, nullptr, nullptr);
  TaskPolicy exploiter(task_q_, nullptr, nullptr, [&](const EpisodeContext& ctx) {
    if (config_.test_z_from_encoder) return encode(ctx.problem.read().index);
    return Vec(decode_prefixes(nn::episode_steps(*ctx.exploration)).back());
  });
  TrialOptions opts;
  opts.exploitation_episodes = exploitation_episodes;
  opts.meta_test = true;
  return run_trial(explorer, exploiter, *env_, mu, rng, opts);
}

DreamUpdateStats DreamAgent::update(Rng& rng, int parity, const DreamUpdateOptions& options) {
  DreamUpdateStats stats;
  // The exploration side reads the encoder and decoder before the task side
  // moves them; neither side touches the other's Q parameters.
  stats.explore_ran = explore_update(rng, options.skip_explore, stats);
  stats.task_ran = task_update(rng, parity, options.skip_task, stats);
  ++updates_;
  if (updates_ % config_.learner.target_sync == 0) sync_targets();
  return stats;
}

bool DreamAgent::explore_update(Rng& rng, bool skip, DreamUpdateStats& stats) {
  const auto sample = explore_replay_.sample(config_.learner.batch, rng);
  if (!sample) return false;
  const auto& items = *sample;
  const nn::SequenceBatch b = nn::pack_sequences(step_ptrs(items), features_);

  // Rewards from the live encoder and decoder.
  std::vector<int> mus;
  for (const auto* it : items) mus.push_back(it->mu);
  const Mat f = encoder_.forward(mus, nullptr);
  const Mat g = decoder_.forward(b, nullptr);

  Decisions d;
  for (int j = 0; j < b.batch; ++j) {
    const auto& it = *items[static_cast<std::size_t>(j)];
    const int len = static_cast<int>(it.actions.size());
    for (int t = 0; t < len; ++t) {
      const int c = b.col(t, j), n = b.col(t + 1, j);
      const double r = (f.col(j) - g.col(c)).squaredNorm() - (f.col(j) - g.col(n)).squaredNorm() - config_.c;
      // The final step of an exploration episode ends it, time limit or not.
      d.add(c, n, it.actions[static_cast<std::size_t>(t)], r, it.done[static_cast<std::size_t>(t)] != 0 || t + 1 == len);
      if (j == 0) {
        if (t == 0) last_rewards_.clear();
        last_rewards_.push_back(r);
      }
    }
  }
  last_item_ = items.front();

  nn::QCache cache;
  const Mat q = explore_q_.forward(b, nullptr, &cache);
  const Mat qt = explore_target_.forward(b, nullptr, nullptr);
  Mat dq;
  stats.explore_loss = ddqn_loss(q, qt, d, config_.learner.gamma, dq);
  if (skip) return true;
  const auto params = explore_params();
  nn::zero_grads(params);
  explore_q_.backward(b, cache, dq);
  explore_opt_.step(params);
  return true;
}

bool DreamAgent::task_update(Rng& rng, int parity, bool skip, DreamUpdateStats& stats) {
  const auto sample = task_replay_.sample(config_.learner.batch, rng);
  if (!sample) return false;
  const auto& items = *sample;
  const nn::SequenceBatch b = nn::pack_sequences(step_ptrs(items), features_);
  std::vector<const nn::StepSequence*> ex_ptrs;
  std::vector<int> mus;
  for (const auto* it : items) {
    ex_ptrs.push_back(it->exploration.get());
    mus.push_back(it->mu);
  }
  const nn::SequenceBatch eb = nn::pack_sequences(ex_ptrs, features_);
  const int B = b.batch;
  const int zd = encoder_.z_dim();

  nn::EncoderCache enc_cache;
  const Mat f = encoder_.forward(mus, &enc_cache);
  nn::DecoderCache dec_cache;
  const Mat g = decoder_.forward(eb, &dec_cache);

  std::vector<int> last_col(static_cast<std::size_t>(B));
  Mat g_final(zd, B);
  for (int j = 0; j < B; ++j) {
    last_col[static_cast<std::size_t>(j)] = eb.col(static_cast<int>(ex_ptrs[static_cast<std::size_t>(j)]->size()) - 1, j);
    g_final.col(j) = g.col(last_col[static_cast<std::size_t>(j)]);
  }

  Mat z_seq, z_target_seq;
  if (parity == 0) {
    const double rho = std::sqrt(config_.rho2);
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat noise(zd, B);
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = rho * normal(rng);
    z_seq = f + noise;
    z_target_seq = encoder_target_.forward(mus, nullptr);
  } else {
    z_seq = g_final;
    const Mat gt = decoder_target_.forward(eb, nullptr);
    z_target_seq.resize(zd, B);
    for (int j = 0; j < B; ++j) z_target_seq.col(j) = gt.col(last_col[static_cast<std::size_t>(j)]);
  }
  const Mat z = repeat_columns(z_seq, b);
  const Mat zt = repeat_columns(z_target_seq, b);

  Decisions d;
  for (int j = 0; j < B; ++j) {
    const auto& it = *items[static_cast<std::size_t>(j)];
    const int len = static_cast<int>(it.actions.size());
    for (int t = 0; t < len; ++t) {
      d.add(b.col(t, j), b.col(t + 1, j), it.actions[static_cast<std::size_t>(t)],
            it.rewards[static_cast<std::size_t>(t)], it.done[static_cast<std::size_t>(t)] != 0 || t + 1 == len);
    }
  }
  nn::QCache cache;
  const Mat q = task_q_.forward(b, &z, &cache);
  const Mat qt = task_target_.forward(b, &zt, nullptr);
  Mat dq;
  stats.task_loss = ddqn_loss(q, qt, d, config_.learner.gamma, dq);

  const auto tparams = task_params();
  const auto eparams = encoder_params();
  const auto dparams = decoder_params();
  nn::zero_grads(tparams);
  nn::zero_grads(eparams);
  nn::zero_grads(dparams);
  if (skip) dq.setZero();
  const Mat dz = sum_columns(task_q_.backward(b, cache, dq), b);

  Mat df = Mat::Zero(zd, B);
  Mat dg = Mat::Zero(zd, eb.columns());
  if (parity == 0) {
    df += dz;
  } else {
    for (int j = 0; j < B; ++j) dg.col(last_col[static_cast<std::size_t>(j)]) += dz.col(j);
  }

  // Bottleneck: lambda * mean_mu min(||f(mu)||^2, K).
  const double inv_b = 1.0 / static_cast<double>(B);
  for (int j = 0; j < B; ++j) {
    stats.bottleneck += dream::bottleneck_penalty(f.col(j), config_.K, config_.lambda) * inv_b;
    df.col(j) += dream::bottleneck_gradient(f.col(j), config_.K, config_.lambda) * inv_b;
  }
  // Decoder: mean over sequences of sum_t ||f(mu) - g(tau_{:t})||^2, f held fixed.
  for (int j = 0; j < B; ++j) {
    const int len = static_cast<int>(ex_ptrs[static_cast<std::size_t>(j)]->size());
    for (int t = 0; t < len; ++t) {
      const int c = eb.col(t, j);
      const Vec diff = g.col(c) - f.col(j);
      stats.decoder_loss += diff.squaredNorm() * inv_b;
      dg.col(c) += 2.0 * diff * inv_b;
    }
  }

  encoder_.backward(enc_cache, df);
  decoder_.backward(eb, dec_cache, dg);
  if (!skip) task_opt_.step(tparams);
  encoder_opt_.step(eparams);
  decoder_opt_.step(dparams);
  return true;
}

}  // namespace dreamlab::agents
