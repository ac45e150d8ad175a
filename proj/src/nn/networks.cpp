#include "dreamlab/nn/networks.hpp"

namespace dreamlab::nn {

void StepSequence::push(const Observation& o, int action_plus_one, double reward, int done) {
  obs.push_back(o);
  prev_action.push_back(action_plus_one);
  prev_reward.push_back(reward);
  prev_done.push_back(done);
}

void append_episode(StepSequence& seq, const Trajectory& traj) {
  seq.push(traj.observations.at(0), 0, 0.0, 0);
  for (std::size_t t = 0; t < traj.length(); ++t) {
    seq.push(traj.observations[t + 1], traj.actions[t] + 1, traj.rewards[t], traj.done[t]);
  }
}

StepSequence episode_steps(const Trajectory& traj) {
  StepSequence seq;
  append_episode(seq, traj);
  return seq;
}

SequenceBatch pack_sequences(const std::vector<const StepSequence*>& seqs, int features) {
  if (seqs.empty()) throw ValidationError("pack_sequences: empty batch");
  SequenceBatch out;
  out.batch = static_cast<int>(seqs.size());
  for (const auto* s : seqs) {
    if (s->size() == 0) throw ValidationError("pack_sequences: empty sequence");
    out.length = std::max(out.length, static_cast<int>(s->size()));
  }
  const int n = out.columns();
  out.obs = IndexMat::Zero(n, features);
  out.prev_action.assign(static_cast<std::size_t>(n), 0);
  out.prev_reward = Mat::Zero(1, n);
  out.prev_done.assign(static_cast<std::size_t>(n), 0);
  out.valid.assign(static_cast<std::size_t>(n), 0);
  for (int b = 0; b < out.batch; ++b) {
    const StepSequence& s = *seqs[static_cast<std::size_t>(b)];
    for (int t = 0; t < static_cast<int>(s.size()); ++t) {
      const int c = out.col(t, b);
      const auto& o = s.obs[static_cast<std::size_t>(t)];
      if (static_cast<int>(o.size()) != features) {
        throw ValidationError("pack_sequences: observation has " + std::to_string(o.size()) +
                              " features, expected " + std::to_string(features));
      }
      for (int f = 0; f < features; ++f) out.obs(c, f) = o[static_cast<std::size_t>(f)];
      out.prev_action[static_cast<std::size_t>(c)] = s.prev_action[static_cast<std::size_t>(t)];
      out.prev_reward(0, c) = s.prev_reward[static_cast<std::size_t>(t)];
      out.prev_done[static_cast<std::size_t>(c)] = s.prev_done[static_cast<std::size_t>(t)];
      out.valid[static_cast<std::size_t>(c)] = 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

HistoryEncoder::HistoryEncoder(const std::vector<int>& cardinalities, int action_count, int hidden,
                               const NetShape& shape, bool use_reward, bool use_done, Rng& rng,
                               const std::string& name)
    : state_(cardinalities, shape.feature_width, shape.state_widths, rng, name + ".state"),
      action_(action_count + 1, shape.action_width, rng, name + ".action"),
      use_reward_(use_reward),
      use_done_(use_done) {
  int width = state_.out() + shape.action_width;
  if (use_reward_) {
    reward_ = Linear(1, shape.reward_width, rng, name + ".reward");
    width += shape.reward_width;
  }
  if (use_done_) {
    done_ = Embedding(2, shape.done_width, rng, name + ".done");
    width += shape.done_width;
  }
  fuse_ = Linear(width, shape.experience_width, rng, name + ".fuse");
  cell_ = MguCell(shape.experience_width, hidden, rng, name + ".cell");
}

HistoryEncoder::Output HistoryEncoder::forward(const SequenceBatch& batch, HistoryCache* cache,
                                               const Mat* h0) const {
  const Eigen::Index n = batch.columns();
  Output out;
  out.state = state_.forward(batch.obs, cache != nullptr ? &cache->state : nullptr);

  const Mat act = action_.forward(batch.prev_action);
  Eigen::Index rows = out.state.rows() + act.rows();
  Mat rew, done;
  if (use_reward_) {
    rew = reward_.forward(batch.prev_reward);
    rows += rew.rows();
  }
  if (use_done_) {
    done = done_.forward(batch.prev_done);
    rows += done.rows();
  }
  Mat concat(rows, n);
  Eigen::Index r = 0;
  concat.middleRows(r, out.state.rows()) = out.state;
  r += out.state.rows();
  concat.middleRows(r, act.rows()) = act;
  r += act.rows();
  if (use_reward_) {
    concat.middleRows(r, rew.rows()) = rew;
    r += rew.rows();
  }
  if (use_done_) concat.middleRows(r, done.rows()) = done;

  Mat fused = fuse_.forward(concat);
  out.hidden = cell_.forward(fused, batch.length, batch.batch, cache != nullptr ? &cache->cell : nullptr, h0);
  if (cache != nullptr) {
    cache->concat = std::move(concat);
    cache->fused = std::move(fused);
  }
  return out;
}

void HistoryEncoder::backward(const SequenceBatch& batch, const HistoryCache& cache,
                              const Mat& d_state, const Mat& d_hidden) {
  const Mat d_fused = cell_.backward(cache.cell, batch.length, batch.batch, d_hidden);
  const Mat d_concat = fuse_.backward(cache.concat, d_fused);
  Eigen::Index r = 0;
  const Eigen::Index sd = state_.out();
  Mat ds = d_concat.middleRows(r, sd);
  if (d_state.size() != 0) ds += d_state;
  r += sd;
  action_.backward(batch.prev_action, d_concat.middleRows(r, action_.dim()));
  r += action_.dim();
  if (use_reward_) {
    reward_.backward(batch.prev_reward, d_concat.middleRows(r, reward_.out()));
    r += reward_.out();
  }
  if (use_done_) done_.backward(batch.prev_done, d_concat.middleRows(r, done_.dim()));
  state_.backward(batch.obs, cache.state, ds);
}

void HistoryEncoder::params(ParamRefs& out) {
  state_.params(out);
  action_.params(out);
  if (use_reward_) reward_.params(out);
  if (use_done_) done_.params(out);
  fuse_.params(out);
  cell_.params(out);
}

// ---------------------------------------------------------------------------

RecurrentQNet::RecurrentQNet(const std::vector<int>& cardinalities, int action_count, int z_dim,
                             const NetShape& shape, bool use_reward, bool use_done, Rng& rng,
                             const std::string& name)
    : history_(cardinalities, action_count, shape.hidden, shape, use_reward, use_done, rng,
               name + ".history"),
      z_dim_(z_dim) {
  trunk_ = Mlp(history_.state_dim() + history_.hidden() + z_dim, {shape.trunk}, true, rng,
               name + ".trunk");
  head_ = DuelingHead(shape.trunk, action_count, rng, name + ".head");
}

Mat RecurrentQNet::forward(const SequenceBatch& batch, const Mat* z, QCache* cache,
                           const Mat* h0) const {
  const Eigen::Index n = batch.columns();
  if (z_dim_ > 0 && (z == nullptr || z->rows() != z_dim_ || z->cols() != n)) {
    throw ValidationError("Q-network: z must be z_dim x columns");
  }
  const auto hist = history_.forward(batch, cache != nullptr ? &cache->history : nullptr, h0);
  Mat in(hist.state.rows() + hist.hidden.rows() + z_dim_, n);
  in.topRows(hist.state.rows()) = hist.state;
  in.middleRows(hist.state.rows(), hist.hidden.rows()) = hist.hidden;
  if (z_dim_ > 0) in.bottomRows(z_dim_) = *z;
  const Mat t = trunk_.forward(in, cache != nullptr ? &cache->trunk : nullptr);
  if (cache != nullptr) cache->hidden = hist.hidden;
  return head_.forward(t, cache != nullptr ? &cache->head : nullptr);
}

Mat RecurrentQNet::backward(const SequenceBatch& batch, const QCache& cache, const Mat& dq) {
  const Mat dt = head_.backward(cache.head, dq);
  const Mat din = trunk_.backward(cache.trunk, dt);
  const Eigen::Index sd = history_.state_dim();
  const Eigen::Index hd = history_.hidden();
  history_.backward(batch, cache.history, din.topRows(sd), din.middleRows(sd, hd));
  if (z_dim_ == 0) return Mat();
  return din.bottomRows(z_dim_);
}

void RecurrentQNet::params(ParamRefs& out) {
  history_.params(out);
  trunk_.params(out);
  head_.params(out);
}

void QStepper::reset() { h_ = Mat::Zero(net_->hidden(), 1); }

Vec QStepper::step(const Observation& obs, int prev_action_plus_one, double prev_reward,
                   int prev_done, const Vec* z) {
  SequenceBatch b;
  b.length = 1;
  b.batch = 1;
  b.obs.resize(1, static_cast<Eigen::Index>(obs.size()));
  for (std::size_t f = 0; f < obs.size(); ++f) b.obs(0, static_cast<Eigen::Index>(f)) = obs[f];
  b.prev_action = {prev_action_plus_one};
  b.prev_reward = Mat::Constant(1, 1, prev_reward);
  b.prev_done = {prev_done};
  b.valid = {1};
  QCache cache;
  Mat zm;
  if (z != nullptr) zm = *z;
  const Mat q = net_->forward(b, z != nullptr ? &zm : nullptr, &cache, &h_);
  h_ = cache.hidden;
  return q.col(0);
}

// ---------------------------------------------------------------------------

ProblemEncoder::ProblemEncoder(int problem_count, const NetShape& shape, Rng& rng,
                               const std::string& name)
    : table_(problem_count, shape.feature_width, rng, name + ".id") {
  std::vector<int> widths = shape.encoder_widths;
  widths.push_back(shape.z_dim);
  mlp_ = Mlp(shape.feature_width, widths, false, rng, name + ".mlp");
}

Mat ProblemEncoder::forward(std::span<const int> ids, EncoderCache* cache) const {
  Mat e = table_.forward(ids);
  if (cache == nullptr) return mlp_.forward(e, nullptr);
  Mat z = mlp_.forward(e, &cache->mlp);
  cache->ids.assign(ids.begin(), ids.end());
  cache->embedded = std::move(e);
  return z;
}

void ProblemEncoder::backward(const EncoderCache& cache, const Mat& dz) {
  table_.backward(cache.ids, mlp_.backward(cache.mlp, dz));
}

void ProblemEncoder::params(ParamRefs& out) {
  table_.params(out);
  mlp_.params(out);
}

// ---------------------------------------------------------------------------

TrajectoryDecoder::TrajectoryDecoder(const std::vector<int>& cardinalities, int action_count,
                                     const NetShape& shape, Rng& rng, const std::string& name)
    : history_(cardinalities, action_count, shape.decoder_hidden, shape, true, false, rng,
               name + ".history") {
  std::vector<int> widths = shape.decoder_widths;
  widths.push_back(shape.z_dim);
  mlp_ = Mlp(shape.decoder_hidden, widths, false, rng, name + ".mlp");
}

Mat TrajectoryDecoder::forward(const SequenceBatch& batch, DecoderCache* cache) const {
  const auto hist = history_.forward(batch, cache != nullptr ? &cache->history : nullptr);
  return mlp_.forward(hist.hidden, cache != nullptr ? &cache->mlp : nullptr);
}

void TrajectoryDecoder::backward(const SequenceBatch& batch, const DecoderCache& cache,
                                 const Mat& dz) {
  const Mat dh = mlp_.backward(cache.mlp, dz);
  history_.backward(batch, cache.history, Mat(), dh);
}

void TrajectoryDecoder::params(ParamRefs& out) {
  history_.params(out);
  mlp_.params(out);
}

}  // namespace dreamlab::nn
