#include "dreamlab/tabular_lab.hpp"

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace dreamlab::tabular {

namespace {

constexpr std::int64_t kMaxSequences = std::int64_t{1} << 40;

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

bool take_greedy(Rng& rng, double epsilon) {
  if (epsilon >= 1.0) return false;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) >= epsilon;
}

std::int64_t sample_problem_index(const BanditFamily& family, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, static_cast<std::size_t>(family.problem_count) - 1);
  return static_cast<std::int64_t>(pick(rng));
}

}  // namespace

std::vector<int> BanditFamily::decode(std::int64_t sequence) const {
  std::vector<int> digits(static_cast<std::size_t>(horizon));
  for (int t = 0; t < horizon; ++t) {
    digits[static_cast<std::size_t>(t)] = static_cast<int>(sequence % action_count);
    sequence /= action_count;
  }
  return digits;
}

std::int64_t BanditFamily::encode(std::span<const int> actions) const {
  if (static_cast<int>(actions.size()) != horizon) throw ValidationError("sequence length != horizon");
  std::int64_t index = 0;
  std::int64_t place = 1;
  for (int a : actions) {
    if (a < 0 || a >= action_count) throw ValidationError("action out of range");
    index += a * place;
    place *= action_count;
  }
  return index;
}

BanditFamily make_bandit_family(int action_count, int horizon) {
  if (action_count < 2) throw ConfigError("bandit family needs at least 2 actions");
  if (horizon < 1) throw ConfigError("bandit family needs horizon >= 1");
  std::int64_t n = 1;
  for (int t = 0; t < horizon; ++t) {
    if (n > kMaxSequences / action_count) throw ConfigError("A^H overflows the supported range");
    n *= action_count;
  }
  BanditFamily family;
  family.action_count = action_count;
  family.horizon = horizon;
  family.sequence_count = n;
  family.problem_count = n;
  family.a_star = n - 1;
  return family;
}

ExplorationOutcome explore(const BanditFamily& family, std::int64_t sequence, std::int64_t mu) {
  ExplorationOutcome out;
  out.sequence = sequence;
  if (sequence == family.a_star) out.revealed = mu;
  return out;
}

std::int64_t sample_sequence(const BanditFamily& family, Rng& rng) {
  std::uniform_int_distribution<int> digit(0, family.action_count - 1);
  std::int64_t index = 0;
  std::int64_t place = 1;
  for (int t = 0; t < family.horizon; ++t) {
    index += digit(rng) * place;
    place *= family.action_count;
  }
  return index;
}

BanditEnvironment::BanditEnvironment(BanditFamily family) : bandit_(family) {
  if (bandit_.problem_count > 1'000'000) throw ConfigError("bandit environment too large");
  meta_.name = "bandit";
  meta_.problem_count = static_cast<int>(bandit_.problem_count);
  meta_.horizon = bandit_.horizon;
  meta_.action_count = bandit_.action_count;
  meta_.train.resize(static_cast<std::size_t>(meta_.problem_count));
  std::iota(meta_.train.begin(), meta_.train.end(), 0);
  meta_.feature_cardinalities.push_back(bandit_.horizon + 1);
  for (int t = 0; t < bandit_.horizon; ++t) meta_.feature_cardinalities.push_back(bandit_.action_count + 1);
  meta_.feature_cardinalities.push_back(meta_.problem_count + 1);
  meta_.validate();
}

EnvState BanditEnvironment::initial_state(ProblemId) const {
  return EnvState(static_cast<std::size_t>(bandit_.horizon) + 2, 0);
}

StepResult BanditEnvironment::step(const EnvState& state, int action, ProblemId mu, GoalId,
                                   EpisodeMode mode) const {
  StepResult out{state, 0.0, false};
  const int t = state[0];
  if (t >= bandit_.horizon) {
    out.done = true;
    return out;
  }
  out.state[static_cast<std::size_t>(t) + 1] = action + 1;
  out.state[0] = t + 1;
  if (t + 1 == bandit_.horizon) {
    out.done = true;
    std::vector<int> actions(static_cast<std::size_t>(bandit_.horizon));
    for (int i = 0; i < bandit_.horizon; ++i) actions[static_cast<std::size_t>(i)] = out.state[static_cast<std::size_t>(i) + 1] - 1;
    const std::int64_t seq = bandit_.encode(actions);
    if (mode == EpisodeMode::explore && seq == bandit_.a_star) out.state.back() = mu.index + 1;
    if (mode == EpisodeMode::exploit && seq == bandit_.a_mu(mu.index)) out.reward = 1.0;
  }
  return out;
}

Observation BanditEnvironment::observe(const EnvState& state, ProblemId, GoalId) const {
  return state;
}

// ---------------------------------------------------------------------------
// DREAM

TabularDreamState::TabularDreamState(const BanditFamily& family, bool record_events)
    : family_(family),
      stats_(static_cast<std::size_t>(family.sequence_count)),
      record_events_(record_events) {}

void TabularDreamState::observe(std::int64_t mu, std::int64_t sequence) {
  ++trials_;
  if (record_events_) events_.push_back({mu, sequence, -1, 0.0});
  if (sequence == family_.a_star) {
    ++star_counts_[mu];
    ++star_total_;
    return;
  }
  auto& s = stats_[static_cast<std::size_t>(sequence)];
  auto& c = s.by_mu[mu];
  s.sum_c_log_c += xlogx(static_cast<double>(c + 1)) - xlogx(static_cast<double>(c));
  ++c;
  ++s.total;
  if (c == 1 && s.by_mu.size() == 2) ++resolved_;
}

std::int64_t TabularDreamState::count(std::int64_t mu, const ExplorationOutcome& tau) const {
  if (tau.revealed) {
    if (*tau.revealed != mu) return 0;
    auto it = star_counts_.find(mu);
    return it == star_counts_.end() ? 0 : it->second;
  }
  if (tau.sequence == family_.a_star) return 0;
  const auto& s = stats_[static_cast<std::size_t>(tau.sequence)];
  auto it = s.by_mu.find(mu);
  return it == s.by_mu.end() ? 0 : it->second;
}

std::int64_t TabularDreamState::count(const ExplorationOutcome& tau) const {
  if (tau.revealed) {
    auto it = star_counts_.find(*tau.revealed);
    return it == star_counts_.end() ? 0 : it->second;
  }
  if (tau.sequence == family_.a_star) return 0;
  return stats_[static_cast<std::size_t>(tau.sequence)].total;
}

double TabularDreamState::decoder(std::int64_t mu, const ExplorationOutcome& tau) const {
  const auto total = count(tau);
  if (total == 0) return 0.0;
  return static_cast<double>(count(mu, tau)) / static_cast<double>(total);
}

double TabularDreamState::q_exp(std::int64_t sequence) const {
  // a_star always reveals mu, so every target is log 1.
  if (sequence == family_.a_star) return 0.0;
  const auto& s = stats_[static_cast<std::size_t>(sequence)];
  if (s.total == 0) return 0.0;
  const double n = static_cast<double>(s.total);
  // (1/n) sum_mu c log(c / n); targets are only formed from observed pairs.
  return (s.sum_c_log_c - xlogx(n)) / n;
}

std::int64_t TabularDreamState::greedy_sequence() const {
  std::int64_t best = 0;
  double best_value = q_exp(0);
  for (std::int64_t a = 1; a < family_.sequence_count; ++a) {
    const double v = q_exp(a);
    if (v > best_value) {
      best_value = v;
      best = a;
    }
  }
  return best;
}

void dream_tabular_trial(TabularDreamState& state, Rng& rng, double epsilon) {
  const auto& family = state.family();
  const std::int64_t mu = sample_problem_index(family, rng);
  const std::int64_t a =
      take_greedy(rng, epsilon) ? state.greedy_sequence() : sample_sequence(family, rng);
  state.observe(mu, a);
}

bool certificate_dream(const TabularDreamState& state) {
  return state.star_observed() && state.resolved_sequences() == state.family().sequence_count - 1;
}

// ---------------------------------------------------------------------------
// RL^2

TabularRL2State::TabularRL2State(const BanditFamily& family, bool record_events)
    : family_(family),
      explore_counts_(static_cast<std::size_t>(family.sequence_count), 0),
      solved_(static_cast<std::size_t>(family.problem_count), 0),
      record_events_(record_events) {}

std::int64_t TabularRL2State::key(const ExplorationOutcome& tau) const {
  const std::int64_t revealed = tau.revealed ? *tau.revealed + 1 : 0;
  return tau.sequence * (family_.problem_count + 1) + revealed;
}

const TabularRL2State::Row* TabularRL2State::row(const ExplorationOutcome& tau) const {
  auto it = task_.find(key(tau));
  return it == task_.end() ? nullptr : &it->second;
}

bool TabularRL2State::explored(std::int64_t sequence) const {
  return explore_counts_[static_cast<std::size_t>(sequence)] > 0;
}

void TabularRL2State::observe(std::int64_t mu, std::int64_t explore_sequence,
                              std::int64_t exploit_sequence) {
  ++trials_;
  const double ret = exploit_sequence == family_.a_mu(mu) ? 1.0 : 0.0;
  if (record_events_) events_.push_back({mu, explore_sequence, exploit_sequence, ret});
  const ExplorationOutcome tau = explore(family_, explore_sequence, mu);
  auto& cell = task_[key(tau)][exploit_sequence];
  cell.sum += ret;
  ++cell.count;
  ++explore_counts_[static_cast<std::size_t>(explore_sequence)];
  if (explore_sequence == family_.a_star) {
    ++star_counts_[mu];
    ++star_total_;
    if (exploit_sequence == family_.a_mu(mu) && solved_[static_cast<std::size_t>(mu)] == 0) {
      solved_[static_cast<std::size_t>(mu)] = 1;
      ++solved_count_;
    }
  }
}

double TabularRL2State::q_task(const ExplorationOutcome& tau, std::int64_t exploit_sequence) const {
  const Row* r = row(tau);
  if (r == nullptr) return 0.0;
  auto it = r->find(exploit_sequence);
  if (it == r->end()) return 0.0;
  return it->second.sum / static_cast<double>(it->second.count);
}

double TabularRL2State::v_task(const ExplorationOutcome& tau) const {
  const Row* r = row(tau);
  double best = 0.0;  // unobserved exploitation sequences keep their initial 0
  if (r == nullptr) return best;
  for (const auto& [seq, cell] : *r) {
    best = std::max(best, cell.sum / static_cast<double>(cell.count));
  }
  return best;
}

std::int64_t TabularRL2State::greedy_exploit(const ExplorationOutcome& tau) const {
  std::int64_t best = 0;
  double best_value = q_task(tau, 0);
  for (std::int64_t a = 1; a < family_.sequence_count; ++a) {
    const double v = q_task(tau, a);
    if (v > best_value) {
      best_value = v;
      best = a;
    }
  }
  return best;
}

double TabularRL2State::q_exp(std::int64_t sequence) const {
  if (!explored(sequence)) return 0.0;
  if (sequence != family_.a_star) return v_task(explore(family_, sequence, 0));
  double total = 0.0;
  for (const auto& [mu, n] : star_counts_) {
    total += static_cast<double>(n) * v_task(explore(family_, family_.a_star, mu));
  }
  return total / static_cast<double>(star_total_);
}

std::int64_t TabularRL2State::greedy_sequence() const {
  std::int64_t best = 0;
  double best_value = q_exp(0);
  for (std::int64_t a = 1; a < family_.sequence_count; ++a) {
    const double v = q_exp(a);
    if (v > best_value) {
      best_value = v;
      best = a;
    }
  }
  return best;
}

void rl2_tabular_trial(TabularRL2State& state, Rng& rng, double epsilon) {
  const auto& family = state.family();
  const std::int64_t mu = sample_problem_index(family, rng);
  const std::int64_t a =
      take_greedy(rng, epsilon) ? state.greedy_sequence() : sample_sequence(family, rng);
  const ExplorationOutcome tau = explore(family, a, mu);
  const std::int64_t b =
      take_greedy(rng, epsilon) ? state.greedy_exploit(tau) : sample_sequence(family, rng);
  state.observe(mu, a, b);
}

bool certificate_rl2(const TabularRL2State& state) {
  return state.solved_problems() == state.family().problem_count;
}

// ---------------------------------------------------------------------------
// Sample complexity

const char* to_string(AgentKind kind) { return kind == AgentKind::dream ? "dream" : "rl2"; }

AgentKind parse_agent_kind(const std::string& text) {
  if (text == "dream") return AgentKind::dream;
  if (text == "rl2") return AgentKind::rl2;
  throw ConfigError("unknown tabular agent '" + text + "' (expected dream|rl2)");
}

namespace {

template <class State, class TrialFn, class CertFn>
SeedOutcome run_until_certified(State state, TrialFn trial, CertFn certified, Rng& rng,
                                std::int64_t cap, double epsilon) {
  SeedOutcome out;
  while (out.trials < cap) {
    trial(state, rng, epsilon);
    ++out.trials;
    if (certified(state)) return out;
  }
  out.censored = true;
  return out;
}

}  // namespace

SeedOutcome sample_complexity_seed(AgentKind agent, const BanditFamily& family, std::uint64_t seed,
                                   const SampleComplexityOptions& options) {
  if (options.trial_cap < 1) throw ConfigError("trial cap must be positive");
  std::seed_seq seq{options.base_seed, seed};
  Rng rng(seq);
  SeedOutcome out;
  if (agent == AgentKind::dream) {
    out = run_until_certified(TabularDreamState(family), dream_tabular_trial, certificate_dream, rng,
                              options.trial_cap, options.epsilon);
  } else {
    out = run_until_certified(TabularRL2State(family), rl2_tabular_trial, certificate_rl2, rng,
                              options.trial_cap, options.epsilon);
  }
  out.seed = seed;
  return out;
}

SampleComplexity measure_sample_complexity(AgentKind agent, int action_count, int horizon,
                                           int n_seeds, const SampleComplexityOptions& options) {
  if (n_seeds < 1) throw ConfigError("measure_sample_complexity needs n_seeds >= 1");
  if (options.trial_cap < 1) throw ConfigError("trial cap must be positive");
  const BanditFamily family = make_bandit_family(action_count, horizon);

  SampleComplexity result;
  result.agent = agent;
  result.action_count = action_count;
  result.horizon = horizon;
  result.seeds.reserve(static_cast<std::size_t>(n_seeds));

  for (int s = 0; s < n_seeds; ++s) {
    const SeedOutcome out = sample_complexity_seed(agent, family, static_cast<std::uint64_t>(s), options);
    result.censored += out.censored ? 1 : 0;
    result.seeds.push_back(out);
  }

  std::vector<double> values;
  values.reserve(result.seeds.size());
  for (const auto& s : result.seeds) values.push_back(static_cast<double>(s.trials));
  const double n = static_cast<double>(values.size());
  result.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - result.mean) * (v - result.mean);
  result.standard_error = values.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  result.median = values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  return result;
}

// ---------------------------------------------------------------------------
// Coupon collector

double coupon_collector_expectation(std::span<const double> probs) {
  if (probs.empty()) return 0.0;
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("coupon probabilities must be >= 0");
    total += p;
  }
  if (total > 1.0 + 1e-12) throw ValidationError("coupon probabilities sum above 1");
  for (double p : probs) {
    if (p == 0.0) return std::numeric_limits<double>::infinity();
  }

  // Group equal probabilities: the sum over subsets only depends on how many
  // coupons of each value are chosen.
  std::map<double, int> groups;
  for (double p : probs) ++groups[p];
  std::vector<double> value;
  std::vector<int> multiplicity;
  double term_count = 1.0;
  for (const auto& [p, k] : groups) {
    value.push_back(p);
    multiplicity.push_back(k);
    term_count *= k + 1;
  }
  if (term_count > 5e7) throw UnsupportedInstance("too many distinct coupon groups for exact inclusion-exclusion");

  auto log_choose = [](int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  };

  std::vector<int> chosen(value.size(), 0);
  double expectation = 0.0;
  double magnitude = 0.0;
  while (true) {
    std::size_t g = 0;
    while (g < chosen.size() && chosen[g] == multiplicity[g]) {
      chosen[g] = 0;
      ++g;
    }
    if (g == chosen.size()) break;
    ++chosen[g];

    int size = 0;
    double rate = 0.0;
    double log_ways = 0.0;
    for (std::size_t j = 0; j < chosen.size(); ++j) {
      size += chosen[j];
      rate += chosen[j] * value[j];
      log_ways += log_choose(multiplicity[j], chosen[j]);
    }
    const double sign = size % 2 == 1 ? 1.0 : -1.0;
    const double term = std::exp(log_ways) / rate;
    expectation += sign * term;
    magnitude += term;
  }
  if (magnitude < 1e6 * expectation) return expectation;

  // Alternating sum lost too many digits: use the Poissonized integral
  // E = int_0^inf 1 - prod_i (1 - exp(-p_i s)) ds instead.
  auto survival = [&](double s) {
    double log_all = 0.0;
    for (std::size_t j = 0; j < value.size(); ++j) {
      log_all += multiplicity[j] * std::log1p(-std::exp(-value[j] * s));
    }
    return -std::expm1(log_all);
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate(survival, 0.0, std::numeric_limits<double>::infinity(), 1e-12);
}

double certificate_expectation(AgentKind agent, int action_count, int horizon) {
  const BanditFamily family = make_bandit_family(action_count, horizon);
  const double n = static_cast<double>(family.sequence_count);
  const double m = static_cast<double>(family.problem_count);

  if (agent == AgentKind::rl2) {
    // Coupon (a_star, mu, a_mu): probability 1/|M| * 1/A^H * 1/A^H each.
    if (family.problem_count > 50'000'000) throw UnsupportedInstance("too many problems");
    std::vector<double> probs(static_cast<std::size_t>(family.problem_count), 1.0 / (m * n * n));
    return coupon_collector_expectation(probs);
  }

  // Poissonized trials at unit rate: every (sequence, mu) cell is an
  // independent Poisson stream with rate r = 1/(N M), so each row's condition
  // is independent and E[T] = int_0^inf (1 - P(all conditions by s)) ds.
  const double r = 1.0 / (n * m);
  auto survival = [&](double s) {
    const double star_miss = std::exp(-s / n);              // a_star row unseen
    const double none = std::exp(-s / n);                    // row a: no sample
    const double one = m * -std::expm1(-r * s) * std::exp(-(m - 1.0) * r * s);
    const double row_fail = std::min(1.0, none + one);       // < 2 distinct mu
    const double log_all = std::log1p(-star_miss) + (n - 1.0) * std::log1p(-row_fail);
    return -std::expm1(log_all);
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  double error = 0.0;
  const double value = integrator.integrate(survival, 0.0, std::numeric_limits<double>::infinity(),
                                            1e-12, &error);
  return value;
}

}  // namespace dreamlab::tabular
