#pragma once

// Fixed-architecture differentiable building blocks. Activations are stored
// column-wise (features x batch). Forward passes are const and leave what the
// backward pass needs in a caller-owned cache, so a module can be applied
// several times per update and a target network is just a copy.

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dreamlab/env_core.hpp"

namespace dreamlab::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using IndexMat = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

struct Param {
  std::string name;
  Mat value;
  Mat grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

using ParamRefs = std::vector<Param*>;

void zero_grads(const ParamRefs& params);
std::size_t parameter_count(const ParamRefs& params);

class Linear {
 public:
  Linear() = default;
  // Uniform fan-in init: U(-1/sqrt(in), 1/sqrt(in)) for weight and bias.
  Linear(int in, int out, Rng& rng, const std::string& name);

  int in() const { return static_cast<int>(weight.value.cols()); }
  int out() const { return static_cast<int>(weight.value.rows()); }

  Mat forward(const Mat& x) const;
  // Accumulates parameter gradients for input x and returns dL/dx.
  Mat backward(const Mat& x, const Mat& dy);
  void params(ParamRefs& out);

  Param weight;
  Param bias;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(int count, int dim, Rng& rng, const std::string& name);

  int count() const { return static_cast<int>(table.value.cols()); }
  int dim() const { return static_cast<int>(table.value.rows()); }

  Mat forward(std::span<const int> ids) const;
  void backward(std::span<const int> ids, const Mat& dy);
  void params(ParamRefs& out);

  Param table;  // dim x count
};

struct MlpCache {
  std::vector<Mat> inputs;   // input of each layer
  std::vector<Mat> outputs;  // post-activation output of each layer
};

// Affine layers with ReLU between them; the last layer is linear unless
// relu_last is set.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int in, const std::vector<int>& widths, bool relu_last, Rng& rng, const std::string& name);

  int in() const { return layers_.empty() ? 0 : layers_.front().in(); }
  int out() const { return layers_.empty() ? 0 : layers_.back().out(); }

  Mat forward(const Mat& x, MlpCache* cache) const;
  Mat backward(const MlpCache& cache, const Mat& dy);
  void params(ParamRefs& out);

 private:
  std::vector<Linear> layers_;
  bool relu_last_ = false;
};

// Per-dimension embeddings of an integer feature vector: a lookup table for
// each discrete dimension (cardinality > 0) and an affine map of the raw
// value for continuous ones (cardinality <= 0), concatenated and passed
// through an MLP with ReLU on every layer.
struct FeatureCache {
  Mat concat;
  MlpCache mlp;
};

class FeatureEmbedder {
 public:
  FeatureEmbedder() = default;
  FeatureEmbedder(std::vector<int> cardinalities, int width, const std::vector<int>& widths,
                  Rng& rng, const std::string& name);

  int features() const { return static_cast<int>(cardinalities_.size()); }
  int out() const { return mlp_.out(); }

  // features: N x F, one row per item.
  Mat forward(const IndexMat& features, FeatureCache* cache) const;
  void backward(const IndexMat& features, const FeatureCache& cache, const Mat& dy);
  void params(ParamRefs& out);

 private:
  std::vector<int> cardinalities_;
  int width_ = 0;
  std::vector<Embedding> tables_;
  std::vector<Linear> affine_;
  std::vector<int> slot_;  // index into tables_ or affine_
  Mlp mlp_;
};

struct MguCache {
  Mat x;
  Mat h_prev;
  Mat f;
  Mat g;
};

// Minimal gated unit over a time-major batch (column t * batch + b):
//   f  = sigmoid(Wf x + Uf h + bf)
//   g  = tanh(Wh x + Uh (f * h) + bh)
//   h' = (1 - f) * h + f * g
// Hidden state starts at zero unless h0 is given.
class MguCell {
 public:
  MguCell() = default;
  MguCell(int in, int hidden, Rng& rng, const std::string& name);

  int in() const { return static_cast<int>(wf_.value.cols()); }
  int hidden() const { return static_cast<int>(wf_.value.rows()); }

  Mat forward(const Mat& x, int length, int batch, MguCache* cache, const Mat* h0 = nullptr) const;
  // dh: upstream gradient on every output column. Returns dL/dx.
  Mat backward(const MguCache& cache, int length, int batch, const Mat& dh);
  void params(ParamRefs& out);

 private:
  Param wf_, uf_, bf_, wh_, uh_, bh_;
};

// Q(s, .) = V + A - mean(A).
struct DuelingCache {
  Mat x;
};

class DuelingHead {
 public:
  DuelingHead() = default;
  DuelingHead(int in, int actions, Rng& rng, const std::string& name);

  int actions() const { return advantage_.out(); }

  Mat forward(const Mat& x, DuelingCache* cache) const;
  Mat backward(const DuelingCache& cache, const Mat& dq);
  void params(ParamRefs& out);

  // Combines raw value (1 x N) and advantage (A x N) rows.
  static Mat combine(const Mat& value, const Mat& advantage);

 private:
  Linear value_;
  Linear advantage_;
};

Mat relu(const Mat& x);

}  // namespace dreamlab::nn
