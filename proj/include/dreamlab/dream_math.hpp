#pragma once

// Encoder/decoder math shared by every learner: embedding noise, the
// information bottleneck penalty, both forms of the exploration reward, the
// decoder regression loss and exact mutual information for small tables.

#include <Eigen/Dense>
#include <span>
#include <variant>
#include <vector>

#include "dreamlab/env_core.hpp"

namespace dreamlab::dream {

using Vec = Eigen::VectorXd;

// F(z | mu) = N(f(mu), rho^2 I). rho = 0 returns the mean unchanged.
Vec sample_embedding(const Vec& mean, double rho, Rng& rng);

// Problem encoder backed by a d x |M| table of means.
struct TableEncoder {
  Eigen::MatrixXd means;
  double rho = 0.31622776601683794;  // sqrt(0.1)

  Vec mean(ProblemId mu) const;
};

Vec encode_problem(const TableEncoder& encoder, ProblemId mu, Rng& rng);

// lambda * min(||f||^2, K).
double bottleneck_penalty(const Vec& f_mu, double K, double lambda);
// 2 lambda f while ||f||^2 <= K, exactly zero above the clamp.
Vec bottleneck_gradient(const Vec& f_mu, double K, double lambda);

// ||f - g_prev||^2 - ||f - g_next||^2 - c.
double exploration_reward_gaussian(const Vec& f_mu, const Vec& g_prev, const Vec& g_next, double c);

// Per-step rewards for a trajectory whose prefix embeddings g(tau_:0..T) are
// given; returns T values.
std::vector<double> exploration_rewards(const Vec& f_mu, std::span<const Vec> prefix_embeddings, double c);

// Spherical Gaussian N(mean, sigma^2 I).
struct GaussianDensity {
  Vec mean;
  double sigma = 1.0;
};

// Probability table over a finite embedding alphabet.
struct DiscreteDensity {
  std::vector<double> probs;
};

// A distribution known only through samples; it has no closed-form density.
struct SampledDensity {
  std::vector<Vec> samples;
};

using Density = std::variant<GaussianDensity, DiscreteDensity, SampledDensity>;

// E_{z ~ F(.|mu)}[log q(z | tau_next) - log q(z | tau_prev)] - c. Gaussian
// encoder with Gaussian q, or discrete encoder with discrete q; anything else
// raises UnsupportedInstance.
double exploration_reward_infogain(const Density& encoder_dist, const Density& q_prev,
                                   const Density& q_next, double c);

// E_{z ~ F}[log q(z)] in closed form (same support rules as above).
double expected_log_density(const Density& encoder_dist, const Density& q);

// sum_t ||f - g_t||^2 over all prefixes.
double decoder_loss(const Vec& f_mu, std::span<const Vec> prefix_embeddings);
// d/dg_t = 2 (g_t - f).
std::vector<Vec> decoder_loss_gradient(const Vec& f_mu, std::span<const Vec> prefix_embeddings);

// I(z; mu) in nats for joint(z, mu) (rows z, columns mu). The table must be
// non-negative and sum to 1 within 1e-12.
double exact_mutual_information(const Eigen::MatrixXd& joint);

// Shannon entropy in nats of a probability vector.
double entropy(std::span<const double> probs);

// Exhaustive solve of the decoupled objectives on a tiny bandit, with a
// discrete embedding alphabet Z = {0..|M|-1}:
//   1. over deterministic encoders mu -> z and task policies z -> sequence,
//      maximize expected return, then minimize I(z; mu);
//   2. over exploration sequences and decoder tables q(z | tau) with entries
//      on the simplex grid {0, 1/k, ..., 1} (k = grid), maximize
//      E_mu[log q(e(mu) | tau)];
//   3. run every tied optimum at meta-test: explore, decode z by argmax q,
//      exploit with the task policy.
struct DecoupledOptimum {
  double expected_optimal_return = 0.0;  // E_mu[V*(mu)] for the family
  double stage1_return = 0.0;
  double stage1_information = 0.0;
  std::int64_t stage1_optima = 0;
  double stage2_objective = 0.0;
  std::vector<std::int64_t> optimal_exploration;  // every argmax sequence
  std::vector<double> worst_meta_test_return;     // per mu, over all tied optima
};

DecoupledOptimum solve_decoupled_bandit(int action_count, int horizon, int grid = 3);

}  // namespace dreamlab::dream
