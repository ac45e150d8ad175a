#include "dreamlab/harness.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <semaphore>
#include <sstream>

#include "dreamlab/gridworlds.hpp"
#include "dreamlab/oracles.hpp"
#include "dreamlab/tabular_lab.hpp"

namespace dreamlab::harness {

namespace {

std::uint64_t parse_u64(const std::string& text) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) throw ConfigError("bad seed '" + text + "'");
  return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, sep)) {
    const auto b = tok.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(tok.substr(b, tok.find_last_not_of(" \t") - b + 1));
  }
  return out;
}

// Independent streams per (seed, purpose).
Rng stream(std::uint64_t seed, std::uint64_t purpose) {
  std::seed_seq seq{seed, purpose};
  return Rng(seq);
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct SeedResult {
  std::vector<std::string> lines;
  std::string error;
};

SeedResult neural_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedResult res;
  try {
    for (const auto& row : run_seed(cfg, seed)) res.lines.push_back(format_row(row));
  } catch (const std::exception& e) {
    res.error = e.what();
  }
  return res;
}

struct TabularJob {
  tabular::AgentKind agent;
  int A;
  int H;
  std::uint64_t seed;
};

SeedResult tabular_seed(const ExperimentConfig& cfg, const std::vector<TabularJob>& jobs) {
  SeedResult res;
  tabular::SampleComplexityOptions opts;
  opts.trial_cap = cfg.values.get_int64("trial_cap", opts.trial_cap);
  opts.epsilon = cfg.values.get_double("tabular_epsilon", opts.epsilon);
  opts.base_seed = static_cast<std::uint64_t>(cfg.values.get_int64("base_seed", 0));
  try {
    for (const auto& job : jobs) {
      const auto family = tabular::make_bandit_family(job.A, job.H);
      const auto out = tabular::sample_complexity_seed(job.agent, family, job.seed, opts);
      res.lines.push_back(format_row(TabularRow{tabular::to_string(job.agent), job.A, job.H, job.seed,
                                                out.trials, out.censored}));
    }
  } catch (const std::exception& e) {
    res.error = e.what();
  }
  return res;
}

// Runs tasks with at most `workers` in flight and hands results to `sink`
// in submission order.
template <class Task, class Sink>
void ordered_run(std::size_t count, int workers, Task task, Sink sink) {
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) sink(i, task(i));
    return;
  }
  std::counting_semaphore<> slots(workers);
  std::vector<std::future<SeedResult>> futures;
  futures.reserve(count);
  std::size_t next_sink = 0;
  for (std::size_t i = 0; i < count; ++i) {
    slots.acquire();
    futures.push_back(std::async(std::launch::async, [&, i] {
      SeedResult r = task(i);
      slots.release();
      return r;
    }));
    while (next_sink < futures.size() &&
           futures[next_sink].wait_for(std::chrono::seconds(0)) == std::future_status::ready) {
      sink(next_sink, futures[next_sink].get());
      ++next_sink;
    }
  }
  for (; next_sink < count; ++next_sink) sink(next_sink, futures[next_sink].get());
}

}  // namespace

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    const auto lo = parse_u64(text.substr(0, colon));
    const auto hi = parse_u64(text.substr(colon + 1));
    if (hi <= lo) throw ConfigError("empty seed range '" + text + "'");
    for (auto s = lo; s < hi; ++s) out.push_back(s);
    return out;
  }
  for (const auto& tok : split(text, ',')) out.push_back(parse_u64(tok));
  if (out.empty()) throw ConfigError("no seeds given");
  return out;
}

ExperimentConfig resolve_config(const KeyValueConfig& file, const KeyValueConfig& overrides) {
  ExperimentConfig cfg;
  cfg.values = file;
  cfg.values.merge(overrides);
  const auto& v = cfg.values;

  const std::string mode = v.get_string("mode", "neural");
  if (mode == "neural") {
    cfg.mode = Mode::neural;
  } else if (mode == "tabular") {
    cfg.mode = Mode::tabular;
  } else {
    throw ConfigError("unknown mode '" + mode + "' (expected neural|tabular)");
  }
  if (v.has("seeds")) cfg.seeds = parse_seeds(v.get_string("seeds"));
  cfg.budget = v.get_int64("budget", cfg.budget);
  cfg.eval_every = v.get_int64("eval_every", cfg.eval_every);
  cfg.eval_trials = v.get_int("eval_trials", cfg.eval_trials);
  cfg.workers = v.get_int("workers", cfg.workers);
  cfg.out = v.get_string("out", cfg.out);
  cfg.verbose = v.get_bool("verbose", cfg.verbose);

  if (cfg.budget <= 0) throw ConfigError("budget must be positive");
  if (cfg.eval_every <= 0) throw ConfigError("eval_every must be positive");
  if (cfg.eval_trials < 1) throw ConfigError("eval_trials must be at least 1");
  if (cfg.workers < 1) throw ConfigError("workers must be at least 1");
  if (cfg.mode == Mode::neural) {
    if (!v.has("family")) throw ConfigError("missing required key 'family'");
    // Build once so a bad environment or agent key fails here, not per seed.
    const auto env = grid::make_environment(v);
    Rng scratch(0);
    agents::make_agent(v, *env, scratch);
  }
  return cfg;
}

Evaluation evaluate(const Environment& env, const TrialFn& trial, int n_trials, Rng& rng) {
  if (n_trials < 1) throw ConfigError("evaluate needs n_trials >= 1");
  const auto& ids = oracles::evaluation_problems(env.family());
  if (ids.empty()) throw ConfigError(env.family().name + ": no problems to evaluate on");
  std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(n_trials));
  for (int i = 0; i < n_trials; ++i) {
    const ProblemId mu{ids[pick(rng)]};
    scores.push_back(trial(mu, rng).mean_return());
  }
  Evaluation e;
  for (double s : scores) e.mean += s;
  e.mean /= static_cast<double>(scores.size());
  double ss = 0.0;
  for (double s : scores) ss += (s - e.mean) * (s - e.mean);
  e.std = std::sqrt(ss / static_cast<double>(scores.size()));
  return e;
}

Evaluation evaluate(agents::MetaAgent& agent, int n_trials, Rng& rng) {
  const int episodes = agent.environment().family().exploitation_episodes;
  return evaluate(
      agent.environment(), [&](ProblemId mu, Rng& r) { return agent.test_trial(mu, r, episodes); }, n_trials,
      rng);
}

std::string format_row(const MetricsRow& row) {
  return std::to_string(row.step) + "," + fixed(row.mean_return) + "," + fixed(row.std_return) + "," +
         std::to_string(row.seed);
}

std::string format_row(const TabularRow& row) {
  return row.agent + "," + std::to_string(row.A) + "," + std::to_string(row.H) + "," + std::to_string(row.seed) +
         "," + std::to_string(row.T) + "," + (row.censored ? "1" : "0");
}

ParsedCsv parse_csv(std::istream& in) {
  ParsedCsv out;
  std::string line;
  int schema = 0;  // 1 metrics, 2 tabular
  std::size_t line_no = 0;
  auto bad = [&](const std::string& why) {
    return ValidationError("csv line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      out.failures.push_back(line.substr(1));
      continue;
    }
    if (schema == 0) {
      if (line == kMetricsHeader) {
        schema = 1;
      } else if (line == kTabularHeader) {
        schema = 2;
      } else {
        throw bad("unknown header '" + line + "'");
      }
      continue;
    }
    const auto f = split(line, ',');
    try {
      if (schema == 1) {
        if (f.size() != 4) throw bad("expected 4 fields");
        out.metrics.push_back({std::stoll(f[0]), std::stod(f[1]), std::stod(f[2]), parse_u64(f[3])});
      } else {
        if (f.size() != 6) throw bad("expected 6 fields");
        if (f[5] != "0" && f[5] != "1") throw bad("censored must be 0 or 1");
        out.tabular.push_back({f[0], std::stoi(f[1]), std::stoi(f[2]), parse_u64(f[3]), std::stoll(f[4]), f[5] == "1"});
      }
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception& e) {
      throw bad(e.what());
    }
  }
  if (schema == 0) throw ValidationError("csv: missing header");
  return out;
}

std::vector<MetricsRow> run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto env = grid::make_environment(cfg.values);
  Rng init = stream(seed, 0), train = stream(seed, 1), eval = stream(seed, 2);
  auto agent = agents::make_agent(cfg.values, *env, init);
  std::vector<MetricsRow> rows;
  auto record = [&] {
    const Evaluation e = evaluate(*agent, cfg.eval_trials, eval);
    rows.push_back({agent->env_steps(), e.mean, e.std, seed});
    if (cfg.verbose) {
      std::clog << "seed " << seed << " step " << agent->env_steps() << " trials " << agent->trials()
                << " return " << fixed(e.mean) << "\n";
    }
  };
  while (agent->env_steps() < cfg.budget) {
    agent->train_trial(train);
    if (agent->trials() % cfg.eval_every == 0) record();
  }
  if (rows.empty() || rows.back().step != agent->env_steps()) record();
  return rows;
}

RunSummary run_experiment(const ExperimentConfig& cfg, std::ostream& out) {
  RunSummary summary;
  std::vector<std::string> group_names;
  std::function<SeedResult(std::size_t)> task;

  if (cfg.mode == Mode::neural) {
    out << kMetricsHeader << "\n";
    for (auto s : cfg.seeds) group_names.push_back(std::to_string(s));
    task = [&](std::size_t i) { return neural_seed(cfg, cfg.seeds[i]); };
  } else {
    out << kTabularHeader << "\n";
    std::vector<tabular::AgentKind> kinds;
    for (const auto& name : split(cfg.values.get_string("tabular_agents", "dream,rl2"), ',')) {
      kinds.push_back(tabular::parse_agent_kind(name));
    }
    const auto As = cfg.values.has("action_counts") ? cfg.values.get_ints("action_counts") : std::vector<int>{4, 6, 8, 10};
    const auto Hs = cfg.values.has("horizons") ? cfg.values.get_ints("horizons") : std::vector<int>{1};
    // One group per seed, covering every (agent, A, H).
    for (auto s : cfg.seeds) group_names.push_back(std::to_string(s));
    task = [&, kinds, As, Hs](std::size_t i) {
      std::vector<TabularJob> jobs;
      for (auto k : kinds)
        for (int A : As)
          for (int H : Hs) jobs.push_back({k, A, H, cfg.seeds[i]});
      return tabular_seed(cfg, jobs);
    };
  }
  out.flush();

  ordered_run(cfg.seeds.size(), cfg.workers, task, [&](std::size_t i, SeedResult r) {
    for (const auto& line : r.lines) out << line << "\n";
    summary.rows += r.lines.size();
    if (!r.error.empty()) {
      const std::string marker = "FAILED seed=" + group_names[i] + ": " + r.error;
      out << "#" << marker << "\n";
      summary.failures.push_back(marker);
    }
    out.flush();
  });
  return summary;
}

RunSummary run_experiment(const ExperimentConfig& cfg) {
  if (cfg.out.empty()) return run_experiment(cfg, std::cout);
  std::ofstream file(cfg.out, std::ios::binary);
  if (!file) throw ConfigError("cannot open output file " + cfg.out);
  return run_experiment(cfg, file);
}

}  // namespace dreamlab::harness
