#include "dreamlab/agents/agent.hpp"

#include <algorithm>

#include "dreamlab/agents/dream.hpp"
#include "dreamlab/agents/erl2.hpp"
#include "dreamlab/nn/checkpoint.hpp"
#include "dreamlab/nn/training.hpp"

namespace dreamlab::agents {

double EpsilonSchedule::operator()(std::int64_t step) const {
  if (step < 0) throw ValidationError("epsilon schedule: negative step");
  if (decay_steps <= 0 || step >= decay_steps) return end;
  const double frac = static_cast<double>(step) / static_cast<double>(decay_steps);
  return start + (end - start) * frac;
}

namespace {

std::vector<int> widths_or(const KeyValueConfig& cfg, const std::string& key, std::vector<int> fallback) {
  return cfg.has(key) ? cfg.get_ints(key) : fallback;
}

}  // namespace

LearnerConfig parse_learner_config(const KeyValueConfig& cfg) {
  LearnerConfig c;
  c.gamma = cfg.get_double("gamma", c.gamma);
  c.lr = cfg.get_double("lr", c.lr);
  c.batch = static_cast<std::size_t>(cfg.get_int("batch", static_cast<int>(c.batch)));
  c.target_sync = cfg.get_int64("target_sync", c.target_sync);
  c.update_every = cfg.get_int("update_every", c.update_every);
  c.clip_norm = cfg.get_double("clip_norm", c.clip_norm);
  c.replay_capacity =
      static_cast<std::size_t>(cfg.get_int64("replay_capacity", static_cast<long long>(c.replay_capacity)));
  c.sequence_length =
      static_cast<std::size_t>(cfg.get_int("sequence_length", static_cast<int>(c.sequence_length)));

  auto& s = c.shape;
  s.feature_width = cfg.get_int("feature_width", s.feature_width);
  s.state_widths = widths_or(cfg, "state_widths", s.state_widths);
  s.action_width = cfg.get_int("action_width", s.action_width);
  s.reward_width = cfg.get_int("reward_width", s.reward_width);
  s.done_width = cfg.get_int("done_width", s.done_width);
  s.experience_width = cfg.get_int("experience_width", s.experience_width);
  s.hidden = cfg.get_int("hidden", s.hidden);
  s.trunk = cfg.get_int("trunk", s.trunk);
  s.z_dim = cfg.get_int("z_dim", s.z_dim);
  s.encoder_widths = widths_or(cfg, "encoder_widths", s.encoder_widths);
  s.decoder_hidden = cfg.get_int("decoder_hidden", s.decoder_hidden);
  s.decoder_widths = widths_or(cfg, "decoder_widths", s.decoder_widths);

  if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (!(c.lr > 0.0)) throw ConfigError("lr must be positive");
  if (c.batch == 0) throw ConfigError("batch must be positive");
  if (c.target_sync <= 0) throw ConfigError("target_sync must be positive");
  if (c.update_every <= 0) throw ConfigError("update_every must be positive");
  return c;
}

EpsilonSchedule parse_epsilon(const KeyValueConfig& cfg, const std::string& prefix,
                              std::int64_t default_decay) {
  EpsilonSchedule e;
  e.decay_steps = default_decay;
  e.start = cfg.get_double(prefix + "epsilon_start", e.start);
  e.end = cfg.get_double(prefix + "epsilon_end", e.end);
  e.decay_steps = cfg.get_int64(prefix + "epsilon_decay", e.decay_steps);
  if (!(e.start >= 0.0 && e.start <= 1.0 && e.end >= 0.0 && e.end <= 1.0)) {
    throw ConfigError(prefix + "epsilon values must lie in [0, 1]");
  }
  return e;
}

int epsilon_greedy(const nn::Vec& q, double epsilon, Rng& rng) {
  bool explore = epsilon >= 1.0;
  if (epsilon > 0.0 && epsilon < 1.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    explore = u(rng) < epsilon;
  }
  if (!explore) return nn::argmax(q);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(q.size()) - 1);
  return pick(rng);
}

void Decisions::add(int c, int next, int a, double r, bool term) {
  col.push_back(c);
  next_col.push_back(next);
  action.push_back(a);
  reward.push_back(r);
  terminal.push_back(term ? 1 : 0);
}

double ddqn_loss(const nn::Mat& q_online, const nn::Mat& q_target, const Decisions& d, double gamma,
                 nn::Mat& dq) {
  dq = nn::Mat::Zero(q_online.rows(), q_online.cols());
  if (d.size() == 0) return 0.0;
  const double scale = 1.0 / static_cast<double>(d.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const bool term = d.terminal[i] != 0 || d.next_col[i] < 0;
    double target = d.reward[i];
    if (!term) {
      target = nn::ddqn_target(q_online.col(d.next_col[i]), q_target.col(d.next_col[i]), d.reward[i],
                               false, gamma);
    }
    const double err = q_online(d.action[i], d.col[i]) - target;
    loss += err * err * scale;
    dq(d.action[i], d.col[i]) += 2.0 * err * scale;
  }
  return loss;
}

void MetaAgent::save(const std::filesystem::path& path) { nn::save_checkpoint(path, parameters()); }

void MetaAgent::load(const std::filesystem::path& path) {
  nn::load_checkpoint(path, parameters());
  sync_targets();
}

std::unique_ptr<MetaAgent> make_agent(const KeyValueConfig& cfg, const Environment& env, Rng& init_rng) {
  const std::string kind = cfg.get_string("agent", "dream");
  if (kind == "dream") return std::make_unique<DreamAgent>(env, parse_dream_config(cfg), init_rng);
  if (kind == "erl2") return std::make_unique<Erl2Agent>(env, parse_erl2_config(cfg), init_rng);
  throw ConfigError("unknown agent '" + kind + "' (expected dream|erl2)");
}

}  // namespace dreamlab::agents
