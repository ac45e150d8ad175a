#include "dreamlab/dream_math.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "dreamlab/tabular_lab.hpp"

namespace dreamlab::dream {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_same_size(const Vec& a, const Vec& b, const char* what) {
  if (a.size() != b.size()) throw ValidationError(std::string(what) + ": embedding dimensions differ");
}

}  // namespace

Vec sample_embedding(const Vec& mean, double rho, Rng& rng) {
  if (rho < 0.0) throw ConfigError("rho must be >= 0");
  Vec z = mean;
  if (rho == 0.0) return z;
  std::normal_distribution<double> eta(0.0, 1.0);
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] += rho * eta(rng);
  return z;
}

Vec TableEncoder::mean(ProblemId mu) const {
  if (mu.index < 0 || mu.index >= means.cols()) throw ValidationError("problem id outside encoder table");
  return means.col(mu.index);
}

Vec encode_problem(const TableEncoder& encoder, ProblemId mu, Rng& rng) {
  return sample_embedding(encoder.mean(mu), encoder.rho, rng);
}

double bottleneck_penalty(const Vec& f_mu, double K, double lambda) {
  if (K < 0.0 || lambda < 0.0) throw ConfigError("bottleneck needs K >= 0 and lambda >= 0");
  return lambda * std::min(f_mu.squaredNorm(), K);
}

Vec bottleneck_gradient(const Vec& f_mu, double K, double lambda) {
  if (K < 0.0 || lambda < 0.0) throw ConfigError("bottleneck needs K >= 0 and lambda >= 0");
  if (f_mu.squaredNorm() > K) return Vec::Zero(f_mu.size());
  return 2.0 * lambda * f_mu;
}

double exploration_reward_gaussian(const Vec& f_mu, const Vec& g_prev, const Vec& g_next, double c) {
  require_same_size(f_mu, g_prev, "exploration reward");
  require_same_size(f_mu, g_next, "exploration reward");
  return (f_mu - g_prev).squaredNorm() - (f_mu - g_next).squaredNorm() - c;
}

std::vector<double> exploration_rewards(const Vec& f_mu, std::span<const Vec> prefix_embeddings, double c) {
  if (prefix_embeddings.empty()) throw ValidationError("need at least the empty-prefix embedding");
  std::vector<double> out;
  out.reserve(prefix_embeddings.size() - 1);
  for (std::size_t t = 0; t + 1 < prefix_embeddings.size(); ++t) {
    out.push_back(exploration_reward_gaussian(f_mu, prefix_embeddings[t], prefix_embeddings[t + 1], c));
  }
  return out;
}

double expected_log_density(const Density& encoder_dist, const Density& q) {
  if (const auto* f = std::get_if<GaussianDensity>(&encoder_dist)) {
    const auto* g = std::get_if<GaussianDensity>(&q);
    if (g == nullptr) throw UnsupportedInstance("Gaussian encoder needs a Gaussian decoder density");
    require_same_size(f->mean, g->mean, "expected log density");
    if (g->sigma <= 0.0) throw UnsupportedInstance("decoder density must have sigma > 0");
    const double d = static_cast<double>(f->mean.size());
    const double var = g->sigma * g->sigma;
    // E||z - g||^2 = ||f - g||^2 + d rho^2 under z ~ N(f, rho^2 I).
    const double spread = (f->mean - g->mean).squaredNorm() + d * f->sigma * f->sigma;
    return -0.5 * d * std::log(2.0 * std::numbers::pi * var) - spread / (2.0 * var);
  }
  if (const auto* f = std::get_if<DiscreteDensity>(&encoder_dist)) {
    const auto* g = std::get_if<DiscreteDensity>(&q);
    if (g == nullptr) throw UnsupportedInstance("discrete encoder needs a discrete decoder table");
    if (f->probs.size() != g->probs.size()) throw ValidationError("alphabet sizes differ");
    double total = 0.0;
    for (std::size_t z = 0; z < f->probs.size(); ++z) {
      if (f->probs[z] == 0.0) continue;
      if (g->probs[z] == 0.0) return kNegInf;
      total += f->probs[z] * std::log(g->probs[z]);
    }
    return total;
  }
  throw UnsupportedInstance("density has no closed form");
}

double exploration_reward_infogain(const Density& encoder_dist, const Density& q_prev,
                                   const Density& q_next, double c) {
  const double next = expected_log_density(encoder_dist, q_next);
  const double prev = expected_log_density(encoder_dist, q_prev);
  if (next == prev) return -c;  // also covers identical infinities
  return next - prev - c;
}

double decoder_loss(const Vec& f_mu, std::span<const Vec> prefix_embeddings) {
  if (prefix_embeddings.empty()) throw ValidationError("decoder loss needs at least one prefix");
  double total = 0.0;
  for (const auto& g : prefix_embeddings) {
    require_same_size(f_mu, g, "decoder loss");
    total += (f_mu - g).squaredNorm();
  }
  return total;
}

std::vector<Vec> decoder_loss_gradient(const Vec& f_mu, std::span<const Vec> prefix_embeddings) {
  std::vector<Vec> out;
  out.reserve(prefix_embeddings.size());
  for (const auto& g : prefix_embeddings) {
    require_same_size(f_mu, g, "decoder loss");
    out.push_back(2.0 * (g - f_mu));
  }
  return out;
}

double exact_mutual_information(const Eigen::MatrixXd& joint) {
  if (joint.size() == 0) throw ValidationError("empty joint table");
  if ((joint.array() < 0.0).any() || !joint.allFinite()) throw ValidationError("joint table has negative or non-finite entries");
  if (std::abs(joint.sum() - 1.0) > 1e-12) throw ValidationError("joint table is not normalized");
  const Eigen::VectorXd pz = joint.rowwise().sum();
  const Eigen::RowVectorXd pmu = joint.colwise().sum();
  double mi = 0.0;
  for (Eigen::Index z = 0; z < joint.rows(); ++z) {
    for (Eigen::Index m = 0; m < joint.cols(); ++m) {
      const double p = joint(z, m);
      if (p > 0.0) mi += p * std::log(p / (pz[z] * pmu[m]));
    }
  }
  return std::max(mi, 0.0);
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

// ---------------------------------------------------------------------------

namespace {

// All tuples in {0..base-1}^length, in lexicographic order of the digits.
std::vector<std::vector<int>> all_tuples(int base, int length) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<std::size_t>(length), 0);
  while (true) {
    out.push_back(cur);
    int i = 0;
    while (i < length && ++cur[static_cast<std::size_t>(i)] == base) cur[static_cast<std::size_t>(i++)] = 0;
    if (i == length) break;
  }
  return out;
}

// Points of the simplex grid {x in (1/k)N^m : sum x = 1}.
std::vector<std::vector<double>> simplex_grid(int k, int m) {
  std::vector<std::vector<double>> out;
  std::vector<int> parts(static_cast<std::size_t>(m), 0);
  auto rec = [&](auto&& self, int i, int left) -> void {
    if (i == m - 1) {
      parts[static_cast<std::size_t>(i)] = left;
      std::vector<double> p;
      for (int v : parts) p.push_back(static_cast<double>(v) / k);
      out.push_back(p);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      parts[static_cast<std::size_t>(i)] = v;
      self(self, i + 1, left - v);
    }
  };
  rec(rec, 0, k);
  return out;
}

}  // namespace

DecoupledOptimum solve_decoupled_bandit(int action_count, int horizon, int grid) {
  const auto fam = tabular::make_bandit_family(action_count, horizon);
  if (fam.problem_count > 4) throw UnsupportedInstance("exhaustive decoupled solve supports |M| <= 4");
  if (grid < 1) throw ConfigError("simplex grid needs k >= 1");
  const int m = static_cast<int>(fam.problem_count);
  const int s = static_cast<int>(fam.sequence_count);
  constexpr double tol = 1e-12;

  DecoupledOptimum out;

  // Full-information optimum: best sequence per problem.
  for (int mu = 0; mu < m; ++mu) {
    double best = 0.0;
    for (int a = 0; a < s; ++a) best = std::max(best, a == fam.a_mu(mu) ? 1.0 : 0.0);
    out.expected_optimal_return += best / m;
  }

  // Stage 1: encoders and task policies.
  const auto encoders = all_tuples(m, m);
  const auto policies = all_tuples(s, m);
  struct Stage1 {
    std::vector<int> encoder;
    std::vector<int> policy;
  };
  std::vector<Stage1> optima;
  double best_return = -1.0;
  double best_info = std::numeric_limits<double>::infinity();
  for (const auto& e : encoders) {
    Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(m, m);
    for (int mu = 0; mu < m; ++mu) joint(e[static_cast<std::size_t>(mu)], mu) = 1.0 / m;
    const double info = exact_mutual_information(joint);
    for (const auto& pi : policies) {
      double ret = 0.0;
      for (int mu = 0; mu < m; ++mu) {
        ret += (pi[static_cast<std::size_t>(e[static_cast<std::size_t>(mu)])] == fam.a_mu(mu) ? 1.0 : 0.0) / m;
      }
      const bool better = ret > best_return + tol || (std::abs(ret - best_return) <= tol && info < best_info - tol);
      const bool tie = std::abs(ret - best_return) <= tol && std::abs(info - best_info) <= tol;
      if (better) {
        best_return = ret;
        best_info = info;
        optima.clear();
      }
      if (better || tie) optima.push_back({e, pi});
    }
  }
  out.stage1_return = best_return;
  out.stage1_information = best_info;
  out.stage1_optima = static_cast<std::int64_t>(optima.size());

  // Stage 2 and 3 per stage-1 optimum.
  const auto tables = simplex_grid(grid, m);
  out.stage2_objective = kNegInf;
  out.worst_meta_test_return.assign(static_cast<std::size_t>(m), 1.0);
  std::vector<bool> seq_is_optimal(static_cast<std::size_t>(s), false);

  for (const auto& opt : optima) {
    // Exploration trajectories: a_star yields one tau per problem, any other
    // sequence a single shared tau.
    struct Candidate {
      int sequence;
      std::vector<int> table_of_mu;  // decoder table index used for each mu
    };
    std::vector<Candidate> best;
    double best_obj = kNegInf;
    for (int a = 0; a < s; ++a) {
      const bool reveals = a == fam.a_star;
      const int n_tau = reveals ? m : 1;
      for (const auto& choice : all_tuples(static_cast<int>(tables.size()), n_tau)) {
        double obj = 0.0;
        for (int mu = 0; mu < m && obj > kNegInf; ++mu) {
          const auto& q = tables[static_cast<std::size_t>(choice[static_cast<std::size_t>(reveals ? mu : 0)])];
          const double p = q[static_cast<std::size_t>(opt.encoder[static_cast<std::size_t>(mu)])];
          obj = p == 0.0 ? kNegInf : obj + std::log(p) / m;
        }
        if (obj > best_obj + tol) {
          best_obj = obj;
          best.clear();
        }
        if (obj >= best_obj - tol && obj > kNegInf) {
          std::vector<int> per_mu(static_cast<std::size_t>(m));
          for (int mu = 0; mu < m; ++mu) per_mu[static_cast<std::size_t>(mu)] = choice[static_cast<std::size_t>(reveals ? mu : 0)];
          best.push_back({a, per_mu});
        }
      }
    }
    out.stage2_objective = std::max(out.stage2_objective, best_obj);

    for (const auto& cand : best) {
      seq_is_optimal[static_cast<std::size_t>(cand.sequence)] = true;
      for (int mu = 0; mu < m; ++mu) {
        const auto& q = tables[static_cast<std::size_t>(cand.table_of_mu[static_cast<std::size_t>(mu)])];
        const double top = *std::max_element(q.begin(), q.end());
        double worst = 1.0;
        for (int z = 0; z < m; ++z) {
          if (q[static_cast<std::size_t>(z)] != top) continue;
          const int exploit = opt.policy[static_cast<std::size_t>(z)];
          worst = std::min(worst, exploit == fam.a_mu(mu) ? 1.0 : 0.0);
        }
        auto& slot = out.worst_meta_test_return[static_cast<std::size_t>(mu)];
        slot = std::min(slot, worst);
      }
    }
  }
  for (int a = 0; a < s; ++a) {
    if (seq_is_optimal[static_cast<std::size_t>(a)]) out.optimal_exploration.push_back(a);
  }
  return out;
}

}  // namespace dreamlab::dream
