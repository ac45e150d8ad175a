#pragma once

// The fixed architectures used by the agents: history encoder, recurrent
// dueling Q-network, problem-ID encoder f and trajectory decoder g.

#include <cstdint>
#include <vector>

#include "dreamlab/nn/layers.hpp"

namespace dreamlab::nn {

// Layer widths. Defaults follow the published architecture.
struct NetShape {
  int feature_width = 32;                 // per-dimension embedding width
  std::vector<int> state_widths{256, 64};  // MLP over concatenated embeddings
  int action_width = 16;
  int reward_width = 16;
  int done_width = 16;
  int experience_width = 64;  // linear fuse of one experience
  int hidden = 64;            // recurrent state of policy histories
  int trunk = 64;             // layer before the dueling heads
  int z_dim = 64;
  std::vector<int> encoder_widths{256};  // problem ID, before the z layer
  int decoder_hidden = 128;
  std::vector<int> decoder_widths{128};  // after the decoder cell, before z
};

// A time-major batch of experience sequences; column t * batch + b is step
// t of sequence b. Step t carries observation s_t together with the action,
// reward and termination flag of the transition that produced it (action 0
// and reward 0 at the start of a sequence). Short sequences are padded at
// the end with valid = 0.
struct SequenceBatch {
  int length = 0;
  int batch = 0;
  IndexMat obs;                   // columns() x features
  std::vector<int> prev_action;   // 0 = none, else action + 1
  Mat prev_reward;                // 1 x columns()
  std::vector<int> prev_done;     // 0 / 1
  std::vector<std::uint8_t> valid;

  int columns() const { return length * batch; }
  int col(int t, int b) const { return t * batch + b; }
};

// One sequence of a batch, before packing.
struct StepSequence {
  std::vector<Observation> obs;
  std::vector<int> prev_action;
  std::vector<double> prev_reward;
  std::vector<int> prev_done;

  std::size_t size() const { return obs.size(); }
  void push(const Observation& o, int action_plus_one, double reward, int done);
};

SequenceBatch pack_sequences(const std::vector<const StepSequence*>& seqs, int features);

// Steps of an episode: s_0 .. s_T with the transitions between them.
// append_episode continues an existing sequence, as in a multi-episode trial.
StepSequence episode_steps(const Trajectory& traj);
void append_episode(StepSequence& seq, const Trajectory& traj);

struct HistoryCache {
  FeatureCache state;
  Mat concat;
  Mat fused;
  MguCache cell;
  Mat state_out;
};

// Embeds every step (state, previous action, previous reward, termination
// flag) and runs the recurrent cell. Returns the state embeddings and the
// hidden states; the hidden state at step t sees steps <= t only.
class HistoryEncoder {
 public:
  HistoryEncoder() = default;
  HistoryEncoder(const std::vector<int>& cardinalities, int action_count, int hidden,
                 const NetShape& shape, bool use_reward, bool use_done, Rng& rng,
                 const std::string& name);

  int state_dim() const { return state_.out(); }
  int hidden() const { return cell_.hidden(); }
  int features() const { return state_.features(); }

  struct Output {
    Mat state;
    Mat hidden;
  };
  Output forward(const SequenceBatch& batch, HistoryCache* cache, const Mat* h0 = nullptr) const;
  void backward(const SequenceBatch& batch, const HistoryCache& cache, const Mat& d_state,
                const Mat& d_hidden);
  void params(ParamRefs& out);

 private:
  FeatureEmbedder state_;
  Embedding action_;
  Linear reward_;
  Embedding done_;
  Linear fuse_;
  MguCell cell_;
  bool use_reward_ = true;
  bool use_done_ = true;
};

struct QCache {
  HistoryCache history;
  MlpCache trunk;
  DuelingCache head;
  Mat hidden;
};

// Q(s_t, tau_{:t}, z, .) via [e(s_t); h_t; z] -> trunk -> dueling heads.
class RecurrentQNet {
 public:
  RecurrentQNet() = default;
  RecurrentQNet(const std::vector<int>& cardinalities, int action_count, int z_dim,
                const NetShape& shape, bool use_reward, bool use_done, Rng& rng,
                const std::string& name);

  int actions() const { return head_.actions(); }
  int z_dim() const { return z_dim_; }
  int hidden() const { return history_.hidden(); }

  // z: z_dim x columns, required when z_dim > 0. Returns actions x columns.
  Mat forward(const SequenceBatch& batch, const Mat* z, QCache* cache, const Mat* h0 = nullptr) const;
  // Returns dL/dz (empty when z_dim == 0).
  Mat backward(const SequenceBatch& batch, const QCache& cache, const Mat& dq);
  void params(ParamRefs& out);

 private:
  HistoryEncoder history_;
  Mlp trunk_;
  DuelingHead head_;
  int z_dim_ = 0;
};

// Incremental single-sequence evaluation for acting in an environment.
class QStepper {
 public:
  explicit QStepper(const RecurrentQNet& net) : net_(&net) { reset(); }
  void reset();
  // Feeds one step and returns Q-values for it.
  Vec step(const Observation& obs, int prev_action_plus_one, double prev_reward, int prev_done,
           const Vec* z = nullptr);

 private:
  const RecurrentQNet* net_;
  Mat h_;
};

struct EncoderCache {
  std::vector<int> ids;
  Mat embedded;
  MlpCache mlp;
};

// f(mu): problem ID -> embedding.
class ProblemEncoder {
 public:
  ProblemEncoder() = default;
  ProblemEncoder(int problem_count, const NetShape& shape, Rng& rng, const std::string& name);

  int z_dim() const { return mlp_.out(); }
  Mat forward(std::span<const int> ids, EncoderCache* cache) const;
  void backward(const EncoderCache& cache, const Mat& dz);
  void params(ParamRefs& out);

 private:
  Embedding table_;
  Mlp mlp_;
};

struct DecoderCache {
  HistoryCache history;
  MlpCache mlp;
};

// g(tau_{:t}) for every prefix of each sequence: one output column per step.
class TrajectoryDecoder {
 public:
  TrajectoryDecoder() = default;
  TrajectoryDecoder(const std::vector<int>& cardinalities, int action_count, const NetShape& shape,
                    Rng& rng, const std::string& name);

  int z_dim() const { return mlp_.out(); }
  Mat forward(const SequenceBatch& batch, DecoderCache* cache) const;
  void backward(const SequenceBatch& batch, const DecoderCache& cache, const Mat& dz);
  void params(ParamRefs& out);

 private:
  HistoryEncoder history_;
  Mlp mlp_;
};

}  // namespace dreamlab::nn
