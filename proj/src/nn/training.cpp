#include "dreamlab/nn/training.hpp"

#include <cmath>
#include <cstdio>

namespace dreamlab::nn {

Adam::Adam(AdamOptions options) : options_(options) {
  if (!(options_.lr > 0.0)) throw ConfigError("learning rate must be positive");
}

void Adam::set_lr(double lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  options_.lr = lr;
}

double gradient_norm(const ParamRefs& params) {
  double sq = 0.0;
  for (const Param* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

double clip_gradients(const ParamRefs& params, double max_norm) {
  const double norm = gradient_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (Param* p : params) p->grad *= scale;
  }
  return norm;
}

double Adam::step(const ParamRefs& params) {
  if (m_.empty()) {
    for (const Param* p : params) {
      m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size()) throw ValidationError("Adam: parameter list changed between steps");

  for (const Param* p : params) {
    if (!p->grad.allFinite()) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "non-finite gradient in %s (step %lld, |value| = %g)",
                    p->name.c_str(), static_cast<long long>(t_), p->value.norm());
      throw TrainingError(buf);
    }
  }
  const double norm =
      options_.clip_norm > 0.0 ? clip_gradients(params, options_.clip_norm) : gradient_norm(params);

  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    const auto g = p.grad.array();
    m_[i].array() = b1 * m_[i].array() + (1.0 - b1) * g;
    v_[i].array() = b2 * v_[i].array() + (1.0 - b2) * g.square();
    p.value.array() -=
        options_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + options_.epsilon);
  }
  return norm;
}

int argmax(const Eigen::Ref<const Vec>& values) {
  int best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values(i) > values(best)) best = static_cast<int>(i);
  }
  return best;
}

double ddqn_target(const Eigen::Ref<const Vec>& online_next, const Eigen::Ref<const Vec>& target_next,
                   double reward, bool done, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in [0, 1]");
  if (done) return reward;
  if (online_next.size() != target_next.size() || online_next.size() == 0) {
    throw ValidationError("ddqn_target: Q vectors must be nonempty and of equal size");
  }
  return reward + gamma * target_next(argmax(online_next));
}

GradCheckResult gradcheck(const ParamRefs& params, const std::function<double()>& loss,
                          const std::function<void()>& backward, Rng& rng, int probes, double h,
                          double floor) {
  zero_grads(params);
  backward();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const Param* p : params) {
    offsets.push_back(total);
    total += static_cast<std::size_t>(p->value.size());
  }
  if (total == 0) throw ValidationError("gradcheck: no parameters");

  GradCheckResult result;
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  for (int k = 0; k < probes; ++k) {
    const std::size_t flat = pick(rng);
    std::size_t which = params.size() - 1;
    while (offsets[which] > flat) --which;
    Param& p = *params[which];
    const Eigen::Index idx = static_cast<Eigen::Index>(flat - offsets[which]);
    double& x = p.value.data()[idx];
    const double saved = x;
    x = saved + h;
    const double up = loss();
    x = saved - h;
    const double down = loss();
    x = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = p.grad.data()[idx];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    const double err = std::abs(analytic - numeric) / denom;
    if (err > result.max_relative_error || result.worst.empty()) {
      result.max_relative_error = std::max(result.max_relative_error, err);
      if (err >= result.max_relative_error) result.worst = p.name + "[" + std::to_string(idx) + "]";
    }
    ++result.probes;
  }
  return result;
}

}  // namespace dreamlab::nn
