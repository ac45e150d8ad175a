#pragma once

// Exact tabular setting: the horizon-H bandit family, tabular DREAM and RL^2
// learners under epsilon-greedy exploration, their optimality certificates and
// the coupon-collector expectations that bound their sample complexity.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dreamlab/env_core.hpp"

namespace dreamlab::tabular {

// Action sequences are indexed by sum_t a_t * A^t. a_mu(mu) is therefore the
// sequence with index mu, and the revealing sequence a_star is the all-(A-1)
// sequence, i.e. index A^H - 1.
struct BanditFamily {
  int action_count = 2;
  int horizon = 1;
  std::int64_t sequence_count = 2;  // A^H
  std::int64_t problem_count = 2;   // |M| = A^H
  std::int64_t a_star = 1;

  std::vector<int> decode(std::int64_t sequence) const;
  std::int64_t encode(std::span<const int> actions) const;
  std::int64_t a_mu(std::int64_t mu) const { return mu; }
};

BanditFamily make_bandit_family(int action_count, int horizon);

// Exploration trajectory tau^exp_a: (a, mu) when a == a_star, else (a, 0).
struct ExplorationOutcome {
  std::int64_t sequence = 0;
  std::optional<std::int64_t> revealed;

  bool operator==(const ExplorationOutcome&) const = default;
};

ExplorationOutcome explore(const BanditFamily& family, std::int64_t sequence, std::int64_t mu);

// Draws an action sequence one digit at a time (a_0 first), matching how a
// per-step uniform policy consumes the generator.
std::int64_t sample_sequence(const BanditFamily& family, Rng& rng);

// The bandit family as a step-wise Environment, for agents and oracles that
// work on the generic protocol. State: [t, slot_0..slot_{H-1}, revealed] with
// slot = action + 1 (0 while unfilled) and revealed = mu + 1 once the
// exploration episode has played a_star. Only exploitation pays reward: 1 when
// the full sequence equals a_mu. Every problem is in the train split; the test
// split is empty, so evaluation falls back to train.
class BanditEnvironment final : public Environment {
 public:
  explicit BanditEnvironment(BanditFamily family);

  const ProblemFamily& family() const override { return meta_; }
  const BanditFamily& bandit() const { return bandit_; }
  std::vector<GoalId> goals_for(ProblemId) const override { return {}; }
  EnvState initial_state(ProblemId mu) const override;
  StepResult step(const EnvState& state, int action, ProblemId mu, GoalId goal,
                  EpisodeMode mode) const override;
  Observation observe(const EnvState& state, ProblemId mu, GoalId goal) const override;

 private:
  BanditFamily bandit_;
  ProblemFamily meta_;
};

struct TrialEvent {
  std::int64_t mu = 0;
  std::int64_t explore_sequence = 0;
  std::int64_t exploit_sequence = -1;  // -1 for DREAM (exploration only)
  double exploit_return = 0.0;
};

class TabularDreamState {
 public:
  explicit TabularDreamState(const BanditFamily& family, bool record_events = false);

  void observe(std::int64_t mu, std::int64_t sequence);

  std::int64_t count(std::int64_t mu, const ExplorationOutcome& tau) const;
  std::int64_t count(const ExplorationOutcome& tau) const;
  // Empirical decoder q(mu | tau); 0 when tau was never observed.
  double decoder(std::int64_t mu, const ExplorationOutcome& tau) const;

  // Mean over all observed samples of sequence a of log q_hat(mu_i | tau_i),
  // evaluated with the current counts; 0 for unobserved sequences.
  double q_exp(std::int64_t sequence) const;
  // Lowest index wins ties.
  std::int64_t greedy_sequence() const;

  std::int64_t trials() const { return trials_; }
  const std::vector<TrialEvent>& events() const { return events_; }
  const BanditFamily& family() const { return family_; }

  // Number of non-star sequences seen with >= 2 distinct problems.
  std::int64_t resolved_sequences() const { return resolved_; }
  bool star_observed() const { return star_total_ > 0; }

 private:
  struct SequenceStats {
    std::unordered_map<std::int64_t, std::int64_t> by_mu;
    std::int64_t total = 0;
    double sum_c_log_c = 0.0;
  };

  BanditFamily family_;
  std::vector<SequenceStats> stats_;  // indexed by sequence (non-star rows)
  std::unordered_map<std::int64_t, std::int64_t> star_counts_;
  std::int64_t star_total_ = 0;
  std::int64_t resolved_ = 0;
  std::int64_t trials_ = 0;
  bool record_events_ = false;
  std::vector<TrialEvent> events_;
};

class TabularRL2State {
 public:
  explicit TabularRL2State(const BanditFamily& family, bool record_events = false);

  void observe(std::int64_t mu, std::int64_t explore_sequence, std::int64_t exploit_sequence);

  // Sample-mean exploitation value; 0 for unobserved pairs.
  double q_task(const ExplorationOutcome& tau, std::int64_t exploit_sequence) const;
  double v_task(const ExplorationOutcome& tau) const;
  std::int64_t greedy_exploit(const ExplorationOutcome& tau) const;

  // a != a_star: V_task((a, 0)); a_star: mean of V_task over observed
  // (a_star, mu) trajectories, re-evaluated with current tables.
  double q_exp(std::int64_t sequence) const;
  std::int64_t greedy_sequence() const;

  std::int64_t trials() const { return trials_; }
  const std::vector<TrialEvent>& events() const { return events_; }
  const BanditFamily& family() const { return family_; }
  std::int64_t solved_problems() const { return solved_count_; }
  bool explored(std::int64_t sequence) const;

 private:
  struct Cell {
    double sum = 0.0;
    std::int64_t count = 0;
  };
  using Row = std::unordered_map<std::int64_t, Cell>;

  std::int64_t key(const ExplorationOutcome& tau) const;
  const Row* row(const ExplorationOutcome& tau) const;

  BanditFamily family_;
  std::unordered_map<std::int64_t, Row> task_;
  std::vector<std::int64_t> explore_counts_;
  std::unordered_map<std::int64_t, std::int64_t> star_counts_;
  std::int64_t star_total_ = 0;
  std::vector<std::uint8_t> solved_;
  std::int64_t solved_count_ = 0;
  std::int64_t trials_ = 0;
  bool record_events_ = false;
  std::vector<TrialEvent> events_;
};

// One tabular trial. epsilon = 1 is uniform exploration; smaller values act
// greedily with probability 1 - epsilon.
void dream_tabular_trial(TabularDreamState& state, Rng& rng, double epsilon = 1.0);
void rl2_tabular_trial(TabularRL2State& state, Rng& rng, double epsilon = 1.0);

bool certificate_dream(const TabularDreamState& state);
bool certificate_rl2(const TabularRL2State& state);

enum class AgentKind { dream, rl2 };
const char* to_string(AgentKind kind);
AgentKind parse_agent_kind(const std::string& text);

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::int64_t trials = 0;  // T, or the cap when censored
  bool censored = false;
};

struct SampleComplexity {
  AgentKind agent = AgentKind::dream;
  int action_count = 0;
  int horizon = 0;
  std::vector<SeedOutcome> seeds;
  double mean = 0.0;
  double median = 0.0;
  double standard_error = 0.0;
  std::int64_t censored = 0;
};

struct SampleComplexityOptions {
  std::int64_t trial_cap = 10'000'000;
  double epsilon = 1.0;
  std::uint64_t base_seed = 0;
};

// One seed's generator is seeded from (base_seed, seed).
SeedOutcome sample_complexity_seed(AgentKind agent, const BanditFamily& family, std::uint64_t seed,
                                   const SampleComplexityOptions& options = {});

// T is the index of the first trial after which the agent's certificate
// holds. Per-seed generators are seeded from (base_seed, seed index).
SampleComplexity measure_sample_complexity(AgentKind agent, int action_count, int horizon,
                                           int n_seeds, const SampleComplexityOptions& options = {});

// Expected trials to collect every coupon when each trial yields at most one
// coupon, coupon i with probability probs[i]. Exact inclusion-exclusion,
// grouped by equal probabilities, with a quadrature fallback when the
// alternating sum would cancel catastrophically. +inf when any probability is zero.
double coupon_collector_expectation(std::span<const double> probs);

// Exact E[T] under uniform exploration. RL^2 reduces to a plain coupon
// collector; DREAM's certificate needs two distinct problems per
// uninformative sequence, solved by Poissonization and quadrature.
double certificate_expectation(AgentKind agent, int action_count, int horizon);

}  // namespace dreamlab::tabular
