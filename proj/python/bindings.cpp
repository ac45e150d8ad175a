#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <sstream>

#include "dreamlab/agents/agent.hpp"
#include "dreamlab/dream_math.hpp"
#include "dreamlab/gridworlds.hpp"
#include "dreamlab/harness.hpp"
#include "dreamlab/oracles.hpp"
#include "dreamlab/tabular_lab.hpp"

namespace py = pybind11;
using namespace dreamlab;

namespace {

KeyValueConfig to_config(const std::map<std::string, py::object>& values) {
  KeyValueConfig cfg;
  for (const auto& [k, v] : values) cfg.set(k, py::str(v));
  return cfg;
}

// Environment plus the config it came from, so Python owns one object.
struct PyEnvironment {
  std::unique_ptr<Environment> env;

  const ProblemFamily& family() const { return env->family(); }
};

// Agent together with the environment it trains on.
struct PyAgent {
  std::shared_ptr<PyEnvironment> env;
  std::unique_ptr<agents::MetaAgent> agent;
  Rng rng;
};

py::dict trial_dict(const TrialRecord& r) {
  py::dict d;
  d["problem"] = r.problem.index;
  d["exploration_actions"] = r.exploration.actions;
  d["exploration_return"] = r.exploration_return;
  d["returns"] = r.returns;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Meta-RL exploration: environments, oracles, tabular lab and learners";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);
  py::register_exception<UnsupportedInstance>(m, "UnsupportedInstance", PyExc_RuntimeError);
  py::register_exception<InformationLeak>(m, "InformationLeak", PyExc_RuntimeError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  // Tabular lab.
  m.def("coupon_collector_expectation",
        [](const std::vector<double>& p) { return tabular::coupon_collector_expectation(p); }, py::arg("probs"));
  m.def(
      "certificate_expectation",
      [](const std::string& agent, int A, int H) {
        return tabular::certificate_expectation(tabular::parse_agent_kind(agent), A, H);
      },
      py::arg("agent"), py::arg("A"), py::arg("H"));
  m.def(
      "measure_sample_complexity",
      [](const std::string& agent, int A, int H, int n_seeds, std::int64_t trial_cap, double epsilon,
         std::uint64_t base_seed) {
        tabular::SampleComplexityOptions o;
        o.trial_cap = trial_cap;
        o.epsilon = epsilon;
        o.base_seed = base_seed;
        const auto r = tabular::measure_sample_complexity(tabular::parse_agent_kind(agent), A, H, n_seeds, o);
        py::dict d;
        std::vector<std::int64_t> T;
        std::vector<bool> censored;
        for (const auto& s : r.seeds) {
          T.push_back(s.trials);
          censored.push_back(s.censored);
        }
        d["T"] = T;
        d["censored"] = censored;
        d["mean"] = r.mean;
        d["median"] = r.median;
        d["standard_error"] = r.standard_error;
        return d;
      },
      py::arg("agent"), py::arg("A"), py::arg("H"), py::arg("n_seeds"), py::arg("trial_cap") = 10'000'000,
      py::arg("epsilon") = 1.0, py::arg("base_seed") = 0);

  // Encoder/decoder math.
  m.def(
      "exploration_rewards",
      [](const Eigen::VectorXd& f, const std::vector<Eigen::VectorXd>& g, double c) {
        return dream::exploration_rewards(f, g, c);
      },
      py::arg("f"), py::arg("prefix_embeddings"), py::arg("c"));
  m.def("exact_mutual_information", &dream::exact_mutual_information, py::arg("joint"));
  m.def(
      "solve_decoupled_bandit",
      [](int A, int H) {
        const auto s = dream::solve_decoupled_bandit(A, H);
        py::dict d;
        d["expected_optimal_return"] = s.expected_optimal_return;
        d["optimal_exploration"] = s.optimal_exploration;
        d["worst_meta_test_return"] = s.worst_meta_test_return;
        return d;
      },
      py::arg("A"), py::arg("H"));

  // Environments.
  py::class_<ProblemFamily>(m, "ProblemFamily")
      .def_readonly("name", &ProblemFamily::name)
      .def_readonly("problem_count", &ProblemFamily::problem_count)
      .def_readonly("horizon", &ProblemFamily::horizon)
      .def_readonly("action_count", &ProblemFamily::action_count)
      .def_readonly("train", &ProblemFamily::train)
      .def_readonly("test", &ProblemFamily::test)
      .def_readonly("feature_cardinalities", &ProblemFamily::feature_cardinalities);

  py::class_<PyEnvironment, std::shared_ptr<PyEnvironment>>(m, "Environment")
      .def(py::init([](const std::map<std::string, py::object>& cfg) {
             auto e = std::make_shared<PyEnvironment>();
             e->env = grid::make_environment(to_config(cfg));
             return e;
           }),
           py::arg("config"))
      .def_property_readonly("family", &PyEnvironment::family, py::return_value_policy::reference_internal)
      .def("goals", [](const PyEnvironment& e, int mu) { return e.env->goals_for(ProblemId{mu}); })
      .def("initial_state", [](const PyEnvironment& e, int mu) { return e.env->initial_state(ProblemId{mu}); })
      .def(
          "step",
          [](const PyEnvironment& e, const EnvState& s, int action, int mu, int goal, bool explore) {
            const auto r = e.env->step(s, action, ProblemId{mu}, goal,
                                       explore ? EpisodeMode::explore : EpisodeMode::exploit);
            return py::make_tuple(r.state, r.reward, r.done);
          },
          py::arg("state"), py::arg("action"), py::arg("mu"), py::arg("goal") = kNoGoal,
          py::arg("explore") = false)
      .def("observe", [](const PyEnvironment& e, const EnvState& s, int mu, int goal) {
        return e.env->observe(s, ProblemId{mu}, goal);
      });

  // Oracles.
  m.def(
      "oracle_returns",
      [](const PyEnvironment& e) {
        const auto& fam = e.family();
        const auto& ids = oracles::evaluation_problems(fam);
        py::dict d;
        d["optimal"] = oracles::expected_optimal_returns(*e.env, fam.test.empty() ? Split::train : Split::test);
        d["no_exploration"] = oracles::no_exploration_returns(*e.env, ids);
        d["pearl_ub"] = oracles::pearl_ub(*e.env, ids);
        return d;
      },
      py::arg("env"));

  // Learners.
  py::class_<PyAgent>(m, "Agent")
      .def(py::init([](std::shared_ptr<PyEnvironment> env, const std::map<std::string, py::object>& cfg,
                       std::uint64_t seed) {
             auto a = std::make_unique<PyAgent>();
             a->env = std::move(env);
             a->rng.seed(seed);
             Rng init(seed ^ 0x9e3779b97f4a7c15ULL);
             a->agent = agents::make_agent(to_config(cfg), *a->env->env, init);
             return a;
           }),
           py::arg("env"), py::arg("config"), py::arg("seed") = 0)
      .def_property_readonly("name", [](const PyAgent& a) { return a.agent->name(); })
      .def_property_readonly("env_steps", [](const PyAgent& a) { return a.agent->env_steps(); })
      .def_property_readonly("trials", [](const PyAgent& a) { return a.agent->trials(); })
      .def("train_trial", [](PyAgent& a) { return trial_dict(a.agent->train_trial(a.rng)); })
      .def("test_trial", [](PyAgent& a, int mu) { return trial_dict(a.agent->test_trial(ProblemId{mu}, a.rng)); })
      .def("evaluate",
           [](PyAgent& a, int n) {
             const auto e = harness::evaluate(*a.agent, n, a.rng);
             return py::make_tuple(e.mean, e.std);
           })
      .def("save", [](PyAgent& a, const std::string& path) { a.agent->save(path); })
      .def("load", [](PyAgent& a, const std::string& path) { a.agent->load(path); });

  // Harness.
  m.def(
      "run_experiment",
      [](const std::map<std::string, py::object>& cfg) {
        const auto resolved = harness::resolve_config(to_config(cfg), {});
        std::ostringstream out;
        harness::RunSummary summary;
        {
          py::gil_scoped_release release;
          summary = harness::run_experiment(resolved, out);
        }
        return py::make_tuple(out.str(), summary.failures);
      },
      py::arg("config"),
      "Runs an experiment and returns (csv_text, failure_markers).");
}
