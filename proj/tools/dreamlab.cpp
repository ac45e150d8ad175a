// dreamlab: run experiments and print oracle values.
//
//   dreamlab run --config configs/bus-reduced.cfg --agent dream --seeds 0,1,2 --out bus.csv
//   dreamlab oracles --config configs/bus-reduced.cfg

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "dreamlab/gridworlds.hpp"
#include "dreamlab/harness.hpp"
#include "dreamlab/oracles.hpp"

using namespace dreamlab;

namespace {

struct CommonFlags {
  std::string config;
  std::string env;
  std::vector<std::string> set;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key = value config file");
  cmd->add_option("--env", f.env, "environment family (sets 'family')");
  cmd->add_option("--set", f.set, "extra key=value overrides")->take_all();
}

KeyValueConfig load_file(const CommonFlags& f) {
  return f.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(f.config);
}

KeyValueConfig common_overrides(const CommonFlags& f) {
  KeyValueConfig o;
  if (!f.env.empty()) o.set("family", f.env);
  for (const auto& kv : f.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + kv + "'");
    o.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return o;
}

std::string split_name(const ProblemFamily& fam) { return fam.test.empty() ? "train" : "test"; }

int print_oracles(const KeyValueConfig& values) {
  const auto env = grid::make_environment(values);
  const auto& fam = env->family();
  const auto& ids = oracles::evaluation_problems(fam);
  const Split split = fam.test.empty() ? Split::train : Split::test;

  std::printf("family %s, %d problems, evaluated on the %s split (%zu)\n", fam.name.c_str(), fam.problem_count,
              split_name(fam).c_str(), ids.size());
  std::printf("optimal          %.6f\n", oracles::expected_optimal_returns(*env, split));
  try {
    std::printf("no exploration   %.6f\n", oracles::no_exploration_returns(*env, ids));
  } catch (const UnsupportedInstance& e) {
    std::printf("no exploration   unsupported (%s)\n", e.what());
  }
  try {
    std::printf("pearl-ub         %.6f\n", oracles::pearl_ub(*env, ids));
  } catch (const UnsupportedInstance& e) {
    std::printf("pearl-ub         unsupported (%s)\n", e.what());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meta-RL exploration experiments"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  std::string agent, seeds, out;
  long long budget = 0, eval_every = 0;
  int eval_trials = 0, workers = 0;
  bool verbose = false;
  auto* run = app.add_subcommand("run", "train and evaluate, writing CSV metrics");
  add_common(run, run_flags);
  run->add_option("--agent", agent, "dream | erl2");
  run->add_option("--seeds", seeds, "seed list '0,1,2' or range '0:500'");
  run->add_option("--budget", budget, "environment steps per seed");
  run->add_option("--eval-every", eval_every, "training trials between evaluations");
  run->add_option("--eval-trials", eval_trials, "meta-test trials per evaluation");
  run->add_option("--workers", workers, "seeds trained concurrently");
  run->add_option("--out", out, "CSV path (stdout when omitted)");
  run->add_flag("--verbose", verbose, "progress on stderr");

  CommonFlags oracle_flags;
  auto* orc = app.add_subcommand("oracles", "print exact reference returns for an environment");
  add_common(orc, oracle_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      KeyValueConfig o = common_overrides(run_flags);
      if (!agent.empty()) o.set("agent", agent);
      if (!seeds.empty()) o.set("seeds", seeds);
      if (budget > 0) o.set("budget", std::to_string(budget));
      if (eval_every > 0) o.set("eval_every", std::to_string(eval_every));
      if (eval_trials > 0) o.set("eval_trials", std::to_string(eval_trials));
      if (workers > 0) o.set("workers", std::to_string(workers));
      if (!out.empty()) o.set("out", out);
      if (verbose) o.set("verbose", "true");
      const auto cfg = harness::resolve_config(load_file(run_flags), o);
      const auto summary = harness::run_experiment(cfg);
      for (const auto& f : summary.failures) std::cerr << f << "\n";
      return summary.ok() ? 0 : 1;
    }
    KeyValueConfig values = load_file(oracle_flags);
    values.merge(common_overrides(oracle_flags));
    return print_oracles(values);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
