#pragma once

// Experiment driver: config resolution, seeded runs, periodic meta-test
// evaluation and CSV metrics.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "dreamlab/agents/agent.hpp"
#include "dreamlab/config.hpp"
#include "dreamlab/env_core.hpp"

namespace dreamlab::harness {

inline constexpr const char* kMetricsHeader = "step,mean_return,std_return,seed";
inline constexpr const char* kTabularHeader = "agent,A,H,seed,T,censored";

enum class Mode { neural, tabular };

struct ExperimentConfig {
  KeyValueConfig values;  // merged; agent and environment keys live here too
  Mode mode = Mode::neural;
  std::vector<std::uint64_t> seeds{0};
  std::int64_t budget = 1'000'000;  // environment steps per seed
  std::int64_t eval_every = 2000;   // training trials
  int eval_trials = 100;
  int workers = 1;
  std::string out;  // empty: stdout
  bool verbose = false;
};

// "0,1,2" or a half-open range "0:500".
std::vector<std::uint64_t> parse_seeds(const std::string& text);

// Keys in `overrides` beat keys in `file`, which beat the defaults.
ExperimentConfig resolve_config(const KeyValueConfig& file, const KeyValueConfig& overrides);

struct Evaluation {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over trials
};

using TrialFn = std::function<TrialRecord(ProblemId, Rng&)>;

// n_trials trials on problems drawn uniformly from the test split (train
// when the family holds nothing out); each trial scores its mean
// exploitation return.
Evaluation evaluate(const Environment& env, const TrialFn& trial, int n_trials, Rng& rng);
Evaluation evaluate(agents::MetaAgent& agent, int n_trials, Rng& rng);

struct MetricsRow {
  std::int64_t step = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const MetricsRow&) const = default;
};

struct TabularRow {
  std::string agent;
  int A = 0;
  int H = 0;
  std::uint64_t seed = 0;
  std::int64_t T = 0;
  bool censored = false;

  bool operator==(const TabularRow&) const = default;
};

std::string format_row(const MetricsRow& row);
std::string format_row(const TabularRow& row);

struct ParsedCsv {
  std::vector<MetricsRow> metrics;
  std::vector<TabularRow> tabular;
  std::vector<std::string> failures;  // marker lines, without the leading '#'
};
// Accepts either schema; throws ValidationError on a malformed line.
ParsedCsv parse_csv(std::istream& in);

struct RunSummary {
  std::size_t rows = 0;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

// One seed of neural training with its evaluation rows.
std::vector<MetricsRow> run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

// Writes the header and every seed group in seed order, flushing after each
// group. A failing seed leaves its finished rows plus a marker line
// "#FAILED seed=<s>: <message>" and the run moves on.
RunSummary run_experiment(const ExperimentConfig& cfg, std::ostream& out);
// As above, into cfg.out (stdout when empty).
RunSummary run_experiment(const ExperimentConfig& cfg);

}  // namespace dreamlab::harness
