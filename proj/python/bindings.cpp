// SPDX-License-Identifier: Apache-2.0
//
// Python bindings. Structured results cross the boundary as JSON text; the
// package wrapper turns them into dicts.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "robopilot/bench.hpp"
#include "robopilot/replay.hpp"

namespace py = pybind11;
using namespace robopilot;

namespace {

AgentConfig make_agent(int budget, const std::string& mode, bool closed_loop) {
  AgentConfig agent;
  agent.budget = budget;
  const auto m = parse_mode_override(mode);
  if (!m) {
    throw std::invalid_argument("mode must be auto, fast or slow");
  }
  agent.mode_override = *m;
  agent.closed_loop = closed_loop;
  agent.validate();
  return agent;
}

std::string spawn(int n_pairs, std::uint64_t seed) {
  WorldConfig world;
  return scene_to_json(spawn_scene(world, n_pairs, seed)).dump();
}

std::string list_tasks() {
  Json out = Json::array();
  for (const auto& def : build_catalog()) {
    out.push_back({{"id", def.id},
                   {"group", to_string(def.group)},
                   {"labeled_difficulty", def.labeled_difficulty},
                   {"feasibility", to_string(def.feasibility_label)}});
  }
  return out.dump();
}

std::string solve(const std::string& instruction, const std::string& scene_json, const std::string& backend, const std::string& mode,
                  int budget, bool closed_loop, double drop_probability) {
  const SceneState scene = scene_from_json(parse_json(scene_json));
  WorldConfig world;
  world.seed = scene.seed;
  world.failure.drop_probability = drop_probability;
  world.validate();
  if (const auto bad = check_invariants(scene, world)) {
    throw std::invalid_argument("malformed scene: " + *bad);
  }
  const AgentConfig agent = make_agent(budget, mode, closed_loop);
  const auto reasoner = make_backend(BackendSpec::parse(backend));
  SolveResult result;
  {
    py::gil_scoped_release release;
    result = solve_instruction(instruction, scene, world, agent, *reasoner);
  }
  Json j = trial_to_json(result.record);
  j["recognized"] = result.recognized;
  return j.dump();
}

py::tuple run_suite_json(const std::string& config_json) {
  const SuiteConfig config = SuiteConfig::from_json(parse_json(config_json));
  const BackendSpec spec = config.backend;
  (void)make_backend(spec);
  SuiteReport report;
  {
    py::gil_scoped_release release;
    report = run_suite(config, [spec] { return make_backend(spec); });
  }
  std::string trials;
  for (const auto& t : report.trials) {
    trials += trial_to_json(t).dump();
    trials += '\n';
  }
  return py::make_tuple(summary_csv(report.tasks), trials, group_report(report.tasks));
}

std::string replay(const std::string& trial_json) {
  const auto r = replay_trial(parse_json(trial_json));
  Json j;
  j["match"] = r.match;
  j["divergent_step"] = r.divergent_step ? Json(*r.divergent_step) : Json(nullptr);
  j["message"] = r.message;
  j["steps_replayed"] = r.steps_replayed;
  return j.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dual-thinking manipulation agent core";

  py::register_exception<SerializationError>(m, "SerializationError", PyExc_ValueError);
  py::register_exception<BackendInitError>(m, "BackendInitError", PyExc_RuntimeError);
  py::register_exception<WorldError>(m, "WorldError", PyExc_ValueError);

  m.def("spawn_scene", &spawn, py::arg("n_pairs"), py::arg("seed"), "Seeded scene snapshot as JSON text");
  m.def("list_tasks", &list_tasks, "Task catalog as JSON text");
  m.def("solve", &solve, py::arg("instruction"), py::arg("scene_json"), py::arg("backend") = "oracle", py::arg("mode") = "auto",
        py::arg("budget") = 20, py::arg("closed_loop") = true, py::arg("drop_probability") = 0.0,
        "Runs one trial and returns the trial record as JSON text");
  m.def("run_suite", &run_suite_json, py::arg("config_json"), "Returns (summary_csv, trials_jsonl, group_report)");
  m.def("replay", &replay, py::arg("trial_json"), "Re-simulates a trial record");
  m.attr("SUMMARY_HEADER") = std::string(kSummaryHeader);
}
