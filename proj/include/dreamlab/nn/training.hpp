#pragma once

// Optimizer, double-Q targets and finite-difference gradient verification.

#include <functional>
#include <string>

#include "dreamlab/nn/layers.hpp"

namespace dreamlab::nn {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 10.0;  // <= 0 disables clipping
};

// Adam over a fixed parameter list. Moment buffers follow list order, so
// every step must pass the same list.
class Adam {
 public:
  explicit Adam(AdamOptions options = {});

  // Clips the gradients in place to clip_norm, then updates. Returns the
  // norm before clipping. Throws TrainingError naming the first
  // offending tensor when a gradient is not finite.
  double step(const ParamRefs& params);

  const AdamOptions& options() const { return options_; }
  void set_lr(double lr);
  std::int64_t steps() const { return t_; }

 private:
  AdamOptions options_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  std::int64_t t_ = 0;
};

double gradient_norm(const ParamRefs& params);
// Rescales the gradients in place so their global norm is at most max_norm.
// Returns the norm before clipping.
double clip_gradients(const ParamRefs& params, double max_norm);

// Index of the largest entry; ties go to the lowest index.
int argmax(const Eigen::Ref<const Vec>& values);

// r + (1 - done) * gamma * Q_target(s', argmax_a Q_online(s', a)).
double ddqn_target(const Eigen::Ref<const Vec>& online_next, const Eigen::Ref<const Vec>& target_next,
                   double reward, bool done, double gamma);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst;  // "name[index]" of the worst probe
  int probes = 0;
};

// Compares analytic gradients against central differences on random
// parameter entries. `loss` must be a pure function of the parameter
// values; `backward` must leave dloss/dparam in the grad buffers (they are
// zeroed first). Relative error is |a - n| / max(|a|, |n|, floor); the
// floor keeps entries whose true gradient is ~0 from dividing round-off by
// round-off.
GradCheckResult gradcheck(const ParamRefs& params, const std::function<double()>& loss,
                          const std::function<void()>& backward, Rng& rng, int probes = 100,
                          double h = 1e-5, double floor = 1e-6);

}  // namespace dreamlab::nn
