#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cleanup/analysis.hpp"
#include "cleanup/episode_log.hpp"
#include "cleanup/json_io.hpp"
#include "cleanup/metrics.hpp"
#include "cleanup/orchestrator.hpp"
#include "cleanup/pipeline.hpp"
#include "cleanup/scripted.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace cleanup;
using json = nlohmann::json;

namespace {

// Dicts cross the boundary as JSON text.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

env::EnvParams params_from(const py::object& o, const std::string& profile) {
  env::EnvParams p = profile == "human" ? env::EnvParams::human_defaults()
                                        : env::EnvParams::agent_defaults();
  if (profile != "human" && profile != "agent") throw ConfigError("unknown profile " + profile);
  if (!o.is_none()) {
    json j = p;
    j.merge_patch(from_py(o));
    p = j.get<env::EnvParams>();
  }
  p.validate();
  return p;
}

py::object optional(const std::optional<double>& v) {
  return v ? py::object(py::float_(*v)) : py::object(py::none());
}

py::dict metrics_dict(const metrics::EpisodeMetrics& m) {
  return py::dict("run"_a = m.run, "group_id"_a = m.group_id, "episode_index"_a = m.episode_index,
                  "condition"_a = to_string(m.condition), "task_order"_a = m.task_order,
                  "collective_return"_a = m.collective_return,
                  "contribution_level"_a = m.contribution_level,
                  "territoriality"_a = optional(m.territoriality),
                  "turn_taking"_a = optional(m.turn_taking),
                  "consistency"_a = optional(m.consistency), "contributions"_a = m.contributions,
                  "returns"_a = m.returns, "apples"_a = m.apples, "intrinsic"_a = m.intrinsic);
}

py::dict test_dict(const analysis::TestResult& r) {
  return py::dict("statistic"_a = r.statistic, "df"_a = r.df, "p"_a = r.p);
}

analysis::Sided parse_sided(const std::string& s) {
  if (s == "two-sided") return analysis::Sided::kTwoSided;
  if (s == "greater") return analysis::Sided::kGreater;
  if (s == "less") return analysis::Sided::kLess;
  throw ConfigError("sided must be two-sided, greater or less");
}

// A live environment that can also record its episode.
class PyEnv {
 public:
  PyEnv(const py::object& params, const std::string& profile, std::uint64_t seed,
        const std::string& condition)
      : params_(params_from(params, profile)), condition_(condition_from_string(condition)) {
    reset(seed);
  }

  void reset(std::uint64_t seed) {
    state_ = env::reset(params_, seed);
    log_ = env::EpisodeLog::begin(state_, params_, seed, condition_);
  }

  py::dict step(const std::vector<int>& actions) {
    require(static_cast<int>(actions.size()) == params_.num_players,
            "step: one action per player");
    std::vector<env::Action> joint;
    for (int a : actions) {
      require(a >= 0 && a < env::kNumActions, "step: action out of range");
      joint.push_back(static_cast<env::Action>(a));
    }
    const env::StepEvents ev = env::step(state_, joint, params_);
    log_.append(state_, joint, ev);
    return py::dict("cleaned"_a = ev.cleaned, "apples_eaten"_a = ev.apples_eaten,
                    "reward"_a = ev.reward, "tickets"_a = ev.tickets);
  }

  py::array_t<std::uint8_t> observation(int player, int window, bool rotate) const {
    require(player >= 0 && player < params_.num_players, "observation: no such player");
    const env::ViewGrid v = env::render_observation(state_, params_, player, condition_, window, rotate);
    py::array_t<std::uint8_t> out({v.size, v.size});
    std::copy(v.cells.begin(), v.cells.end(), out.mutable_data());
    return out;
  }

  bool done() const { return state_.step >= params_.episode_length; }
  int steps() const { return state_.step; }
  std::vector<double> scores() const { return state_.score; }
  double pollution() const { return state_.pollution_fraction(params_.map); }
  int apples() const { return state_.apple_count; }
  py::object params() const { return to_py(params_); }
  const env::EpisodeLog& log() const { return log_; }
  int num_players() const { return params_.num_players; }

 private:
  env::EnvParams params_;
  Condition condition_;
  env::EnvState state_;
  env::EpisodeLog log_;
};

}  // namespace

PYBIND11_MODULE(_cleanup, m) {
  m.doc() = "Clean Up public-goods game, reputation agents and cooperation analysis";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  m.def("action_names", [] {
    std::vector<std::string> names;
    for (int a = 0; a < env::kNumActions; ++a) {
      names.emplace_back(env::action_name(static_cast<env::Action>(a)));
    }
    return names;
  });
  m.def("default_params", [](const std::string& profile) { return to_py(params_from(py::none(), profile)); },
        "profile"_a = "agent");
  m.def("apple_regrowth_probability",
        [](double f, const std::string& profile) {
          return env::apple_regrowth_probability(f, params_from(py::none(), profile));
        },
        "polluted_fraction"_a, "profile"_a = "agent");
  m.def("pollution_accrual_probability",
        [](double f, const std::string& profile) {
          return env::pollution_accrual_probability(f, params_from(py::none(), profile));
        },
        "polluted_fraction"_a, "profile"_a = "agent");

  py::class_<env::EpisodeLog>(m, "EpisodeLog")
      .def_static("load", &env::EpisodeLog::load, "path"_a)
      .def("save", &env::EpisodeLog::save, "path"_a)
      .def_property_readonly("num_players", &env::EpisodeLog::num_players)
      .def_property_readonly("complete", &env::EpisodeLog::complete)
      .def_property_readonly("condition", [](const env::EpisodeLog& l) { return to_string(l.header.condition); })
      .def_property_readonly("seed", [](const env::EpisodeLog& l) { return l.header.seed; })
      .def("__len__", [](const env::EpisodeLog& l) { return l.steps.size(); })
      .def("actions", [](const env::EpisodeLog& l) {
        std::vector<std::vector<int>> out;
        for (const auto& r : l.steps) out.push_back(r.action);
        return out;
      })
      .def("replay", [](const env::EpisodeLog& l) {
        const env::ReplayResult r = env::replay(l);
        return py::dict("identical"_a = r.identical, "first_mismatch"_a = r.first_mismatch,
                        "final_scores"_a = r.final_scores);
      });

  py::class_<PyEnv>(m, "Env")
      .def(py::init<const py::object&, const std::string&, std::uint64_t, const std::string&>(),
           "params"_a = py::none(), "profile"_a = "agent", "seed"_a = 0,
           "condition"_a = "identifiable")
      .def("reset", &PyEnv::reset, "seed"_a)
      .def("step", &PyEnv::step, "actions"_a)
      .def("observation", &PyEnv::observation, "player"_a, "window"_a = 15, "rotate"_a = true)
      .def_property_readonly("done", &PyEnv::done)
      .def_property_readonly("steps", &PyEnv::steps)
      .def_property_readonly("scores", &PyEnv::scores)
      .def_property_readonly("pollution", &PyEnv::pollution)
      .def_property_readonly("apples", &PyEnv::apples)
      .def_property_readonly("num_players", &PyEnv::num_players)
      .def_property_readonly("params", &PyEnv::params)
      .def_property_readonly("log", &PyEnv::log, py::return_value_policy::copy);

  m.def("summarize", [](const env::EpisodeLog& l) { return metrics_dict(metrics::summarize(l)); },
        "log"_a);
  m.def("turn_taking_score",
        [](const std::vector<int>& turns) { return optional(metrics::turn_taking_score(turns)); },
        "turns"_a);
  m.def("gini", [](const std::vector<double>& c) { return optional(metrics::gini(c)); }, "values"_a);
  m.def("scripted_mixtures",
        [](int episodes, std::uint64_t seed, const py::object& params) {
          return scripted::scripted_mixtures(params_from(params, "agent"), episodes, seed);
        },
        "episodes"_a, "seed"_a = 0, "params"_a = py::none());

  m.def("welch_t_test",
        [](const std::vector<double>& a, const std::vector<double>& b, const std::string& sided) {
          return test_dict(analysis::welch_t_test(a, b, parse_sided(sided)));
        },
        "a"_a, "b"_a, "sided"_a = "two-sided");
  m.def("fisher_combine", [](const std::vector<double>& p) { return test_dict(analysis::fisher_combine(p)); },
        "p_values"_a);
  m.def("jenks_breaks", [](const std::vector<double>& v) {
    const analysis::JenksBreak b = analysis::jenks_breaks(v);
    return py::dict("upper_min"_a = b.upper_min, "within_ss"_a = b.within_ss);
  }, "values"_a);

  m.def("config_hash", [](const py::object& cfg) {
    return from_py(cfg).get<orch::ExperimentConfig>().hash();
  }, "config"_a);
  m.def("train",
        [](const py::object& cfg, const std::string& out_dir, std::uint64_t max_episodes) {
          const orch::ExperimentConfig c = from_py(cfg).get<orch::ExperimentConfig>();
          orch::TrainingOptions o;
          o.out_dir = out_dir;
          o.max_episodes = max_episodes;
          orch::TrainingStats stats;
          std::uint64_t hash = 0;
          {
            py::gil_scoped_release release;
            hash = orch::run_training(c, o, &stats).params_hash();
          }
          return py::dict("episodes"_a = stats.episodes, "params_hash"_a = hash,
                          "times_sampled"_a = stats.times_sampled);
        },
        "config"_a, "out_dir"_a = "", "max_episodes"_a = 0);
  m.def("evaluate",
        [](const std::string& checkpoint, const std::string& out_dir) {
          py::gil_scoped_release release;
          return orch::run_evaluation(orch::PopulationCheckpoint::load(checkpoint), out_dir).logs;
        },
        "checkpoint"_a, "out_dir"_a = "");

  m.def("collect", [](const std::string& dir) {
    py::list rows;
    for (const auto& r : pipeline::collect(dir)) rows.append(metrics_dict(r));
    return rows;
  }, "directory"_a);
  m.def("analyze",
        [](const std::string& dir, const std::string& out_dir, int bootstrap_n) {
          const auto rows = pipeline::collect(dir);
          pipeline::AnalysisOptions o;
          o.bootstrap_n = bootstrap_n;
          py::gil_scoped_release release;
          pipeline::write_report(pipeline::analyze(rows, o), rows, out_dir);
        },
        "directory"_a, "out_dir"_a, "bootstrap_n"_a = 10000);
}
