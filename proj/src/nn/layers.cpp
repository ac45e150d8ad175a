#include "dreamlab/nn/layers.hpp"

#include <cmath>

namespace dreamlab::nn {

namespace {

Mat uniform(int rows, int cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Mat m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
  }
  return m;
}

Param make_param(const std::string& name, Mat value) {
  Param p;
  p.name = name;
  p.grad = Mat::Zero(value.rows(), value.cols());
  p.value = std::move(value);
  return p;
}

void require_rows(const Mat& x, Eigen::Index rows, const char* what) {
  if (x.rows() != rows) {
    throw ValidationError(std::string(what) + ": expected " + std::to_string(rows) +
                          " input rows, got " + std::to_string(x.rows()));
  }
}

Mat sigmoid(const Mat& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

}  // namespace

void zero_grads(const ParamRefs& params) {
  for (Param* p : params) p->zero_grad();
}

std::size_t parameter_count(const ParamRefs& params) {
  std::size_t n = 0;
  for (const Param* p : params) n += static_cast<std::size_t>(p->value.size());
  return n;
}

Mat relu(const Mat& x) { return x.cwiseMax(0.0); }

// ---------------------------------------------------------------------------

Linear::Linear(int in, int out, Rng& rng, const std::string& name) {
  if (in <= 0 || out <= 0) throw ConfigError(name + ": layer sizes must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight = make_param(name + ".weight", uniform(out, in, bound, rng));
  bias = make_param(name + ".bias", uniform(out, 1, bound, rng));
}

Mat Linear::forward(const Mat& x) const {
  require_rows(x, in(), weight.name.c_str());
  Mat y = weight.value * x;
  y.colwise() += bias.value.col(0);
  return y;
}

Mat Linear::backward(const Mat& x, const Mat& dy) {
  weight.grad.noalias() += dy * x.transpose();
  bias.grad.col(0) += dy.rowwise().sum();
  return weight.value.transpose() * dy;
}

void Linear::params(ParamRefs& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ---------------------------------------------------------------------------

Embedding::Embedding(int count, int dim, Rng& rng, const std::string& name) {
  if (count <= 0 || dim <= 0) throw ConfigError(name + ": embedding sizes must be positive");
  table = make_param(name + ".table", uniform(dim, count, 1.0, rng));
}

Mat Embedding::forward(std::span<const int> ids) const {
  Mat out(dim(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (id < 0 || id >= count()) {
      throw ValidationError(table.name + ": index " + std::to_string(id) + " outside [0, " +
                            std::to_string(count()) + ")");
    }
    out.col(static_cast<Eigen::Index>(i)) = table.value.col(id);
  }
  return out;
}

void Embedding::backward(std::span<const int> ids, const Mat& dy) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    table.grad.col(ids[i]) += dy.col(static_cast<Eigen::Index>(i));
  }
}

void Embedding::params(ParamRefs& out) { out.push_back(&table); }

// ---------------------------------------------------------------------------

Mlp::Mlp(int in, const std::vector<int>& widths, bool relu_last, Rng& rng, const std::string& name)
    : relu_last_(relu_last) {
  if (widths.empty()) throw ConfigError(name + ": MLP needs at least one layer");
  int prev = in;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    layers_.emplace_back(prev, widths[i], rng, name + "." + std::to_string(i));
    prev = widths[i];
  }
}

Mat Mlp::forward(const Mat& x, MlpCache* cache) const {
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->outputs.clear();
  }
  Mat h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Mat y = layers_[i].forward(h);
    if (i + 1 < layers_.size() || relu_last_) y = relu(y);
    if (cache != nullptr) {
      cache->inputs.push_back(std::move(h));
      cache->outputs.push_back(y);
    }
    h = std::move(y);
  }
  return h;
}

Mat Mlp::backward(const MlpCache& cache, const Mat& dy) {
  Mat d = dy;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    if (k + 1 < layers_.size() || relu_last_) {
      d = (cache.outputs[k].array() > 0.0).select(d, 0.0);
    }
    d = layers_[k].backward(cache.inputs[k], d);
  }
  return d;
}

void Mlp::params(ParamRefs& out) {
  for (auto& l : layers_) l.params(out);
}

// ---------------------------------------------------------------------------

FeatureEmbedder::FeatureEmbedder(std::vector<int> cardinalities, int width,
                                 const std::vector<int>& widths, Rng& rng, const std::string& name)
    : cardinalities_(std::move(cardinalities)), width_(width) {
  if (cardinalities_.empty()) throw ConfigError(name + ": no features to embed");
  for (std::size_t f = 0; f < cardinalities_.size(); ++f) {
    const std::string sub = name + ".f" + std::to_string(f);
    if (cardinalities_[f] > 0) {
      slot_.push_back(static_cast<int>(tables_.size()));
      tables_.emplace_back(cardinalities_[f], width, rng, sub);
    } else {
      slot_.push_back(static_cast<int>(affine_.size()));
      affine_.emplace_back(1, width, rng, sub);
    }
  }
  mlp_ = Mlp(width * features(), widths, true, rng, name + ".mlp");
}

Mat FeatureEmbedder::forward(const IndexMat& features, FeatureCache* cache) const {
  if (features.cols() != this->features()) {
    throw ValidationError("feature embedder: expected " + std::to_string(this->features()) +
                          " features, got " + std::to_string(features.cols()));
  }
  const Eigen::Index n = features.rows();
  Mat concat(static_cast<Eigen::Index>(width_) * features.cols(), n);
  for (int f = 0; f < this->features(); ++f) {
    const std::span<const int> col(features.col(f).data(), static_cast<std::size_t>(n));
    if (cardinalities_[static_cast<std::size_t>(f)] > 0) {
      concat.middleRows(f * width_, width_) = tables_[static_cast<std::size_t>(slot_[f])].forward(col);
    } else {
      const Mat raw = features.col(f).cast<double>().transpose();
      concat.middleRows(f * width_, width_) = affine_[static_cast<std::size_t>(slot_[f])].forward(raw);
    }
  }
  if (cache == nullptr) return mlp_.forward(concat, nullptr);
  Mat out = mlp_.forward(concat, &cache->mlp);
  cache->concat = std::move(concat);
  return out;
}

void FeatureEmbedder::backward(const IndexMat& features, const FeatureCache& cache, const Mat& dy) {
  const Mat dconcat = mlp_.backward(cache.mlp, dy);
  const Eigen::Index n = features.rows();
  for (int f = 0; f < this->features(); ++f) {
    const Mat d = dconcat.middleRows(f * width_, width_);
    if (cardinalities_[static_cast<std::size_t>(f)] > 0) {
      const std::span<const int> col(features.col(f).data(), static_cast<std::size_t>(n));
      tables_[static_cast<std::size_t>(slot_[f])].backward(col, d);
    } else {
      const Mat raw = features.col(f).cast<double>().transpose();
      affine_[static_cast<std::size_t>(slot_[f])].backward(raw, d);
    }
  }
}

void FeatureEmbedder::params(ParamRefs& out) {
  for (auto& t : tables_) t.params(out);
  for (auto& a : affine_) a.params(out);
  mlp_.params(out);
}

// ---------------------------------------------------------------------------

MguCell::MguCell(int in, int hidden, Rng& rng, const std::string& name) {
  if (in <= 0 || hidden <= 0) throw ConfigError(name + ": cell sizes must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  wf_ = make_param(name + ".wf", uniform(hidden, in, bound, rng));
  uf_ = make_param(name + ".uf", uniform(hidden, hidden, bound, rng));
  bf_ = make_param(name + ".bf", uniform(hidden, 1, bound, rng));
  wh_ = make_param(name + ".wh", uniform(hidden, in, bound, rng));
  uh_ = make_param(name + ".uh", uniform(hidden, hidden, bound, rng));
  bh_ = make_param(name + ".bh", uniform(hidden, 1, bound, rng));
}

Mat MguCell::forward(const Mat& x, int length, int batch, MguCache* cache, const Mat* h0) const {
  require_rows(x, in(), wf_.name.c_str());
  if (length <= 0 || batch <= 0 || x.cols() != static_cast<Eigen::Index>(length) * batch) {
    throw ValidationError("recurrent cell: input columns do not match length x batch");
  }
  const int n = hidden();
  if (h0 != nullptr && (h0->rows() != n || h0->cols() != batch)) {
    throw ValidationError("recurrent cell: initial state has the wrong shape");
  }
  Mat xf = wf_.value * x;
  xf.colwise() += bf_.value.col(0);
  Mat xh = wh_.value * x;
  xh.colwise() += bh_.value.col(0);

  Mat out(n, x.cols());
  Mat h = h0 != nullptr ? *h0 : Mat::Zero(n, batch);
  Mat hp, fs, gs;
  if (cache != nullptr) {
    hp.resize(n, x.cols());
    fs.resize(n, x.cols());
    gs.resize(n, x.cols());
  }
  for (int t = 0; t < length; ++t) {
    const Eigen::Index c = static_cast<Eigen::Index>(t) * batch;
    Mat f = sigmoid(xf.middleCols(c, batch) + uf_.value * h);
    Mat g = (xh.middleCols(c, batch) + uh_.value * f.cwiseProduct(h)).array().tanh().matrix();
    Mat next = h + f.cwiseProduct(g - h);
    if (cache != nullptr) {
      hp.middleCols(c, batch) = h;
      fs.middleCols(c, batch) = f;
      gs.middleCols(c, batch) = g;
    }
    out.middleCols(c, batch) = next;
    h = std::move(next);
  }
  if (cache != nullptr) {
    cache->x = x;
    cache->h_prev = std::move(hp);
    cache->f = std::move(fs);
    cache->g = std::move(gs);
  }
  return out;
}

Mat MguCell::backward(const MguCache& cache, int length, int batch, const Mat& dh) {
  const int n = hidden();
  Mat da_f(n, dh.cols());
  Mat da_h(n, dh.cols());
  Mat carry = Mat::Zero(n, batch);
  for (int t = length - 1; t >= 0; --t) {
    const Eigen::Index c = static_cast<Eigen::Index>(t) * batch;
    const auto h = cache.h_prev.middleCols(c, batch);
    const auto f = cache.f.middleCols(c, batch);
    const auto g = cache.g.middleCols(c, batch);
    const Mat d = dh.middleCols(c, batch) + carry;

    const Mat dah = (d.cwiseProduct(f).array() * (1.0 - g.array().square())).matrix();
    const Mat dr = uh_.value.transpose() * dah;
    const Mat df = d.cwiseProduct(g - h) + dr.cwiseProduct(h);
    const Mat daf = (df.array() * f.array() * (1.0 - f.array())).matrix();
    carry = d.cwiseProduct((1.0 - f.array()).matrix()) + dr.cwiseProduct(f) + uf_.value.transpose() * daf;
    da_f.middleCols(c, batch) = daf;
    da_h.middleCols(c, batch) = dah;
  }
  const Mat r = cache.f.cwiseProduct(cache.h_prev);
  wf_.grad.noalias() += da_f * cache.x.transpose();
  uf_.grad.noalias() += da_f * cache.h_prev.transpose();
  bf_.grad.col(0) += da_f.rowwise().sum();
  wh_.grad.noalias() += da_h * cache.x.transpose();
  uh_.grad.noalias() += da_h * r.transpose();
  bh_.grad.col(0) += da_h.rowwise().sum();
  return wf_.value.transpose() * da_f + wh_.value.transpose() * da_h;
}

void MguCell::params(ParamRefs& out) {
  for (Param* p : {&wf_, &uf_, &bf_, &wh_, &uh_, &bh_}) out.push_back(p);
}

// ---------------------------------------------------------------------------

DuelingHead::DuelingHead(int in, int actions, Rng& rng, const std::string& name)
    : value_(in, 1, rng, name + ".value"), advantage_(in, actions, rng, name + ".advantage") {}

Mat DuelingHead::combine(const Mat& value, const Mat& advantage) {
  // (n A_i - sum A) / n rather than A_i - mean(A): a constant shift cancels
  // inside the numerator before any division rounds.
  const double n = static_cast<double>(advantage.rows());
  const Eigen::RowVectorXd sum = advantage.colwise().sum();
  Mat centered = ((n * advantage).rowwise() - sum) / n;
  centered.rowwise() += value.row(0);
  return centered;
}

Mat DuelingHead::forward(const Mat& x, DuelingCache* cache) const {
  if (cache != nullptr) cache->x = x;
  return combine(value_.forward(x), advantage_.forward(x));
}

Mat DuelingHead::backward(const DuelingCache& cache, const Mat& dq) {
  const Mat dv = dq.colwise().sum();
  const Mat da = dq.rowwise() - dq.colwise().mean();
  return value_.backward(cache.x, dv) + advantage_.backward(cache.x, da);
}

void DuelingHead::params(ParamRefs& out) {
  value_.params(out);
  advantage_.params(out);
}

}  // namespace dreamlab::nn
