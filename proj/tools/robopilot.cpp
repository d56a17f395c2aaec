// SPDX-License-Identifier: Apache-2.0
//
// robopilot: bench-run, bench-report, solve and replay.
//
// Exit codes: 0 ok, 2 configuration or input error, 3 backend
// initialization failure, 4 replay divergence.
#include <CLI11.hpp>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <sstream>

#include "robopilot/bench.hpp"
#include "robopilot/replay.hpp"

using namespace robopilot;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitBackend = 3;
constexpr int kExitDiverged = 4;

struct ExitError {
  int code;
  std::string message;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ExitError{kExitConfig, fmt::format("cannot read {}", path)};
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Backend construction fails early (exit 3) instead of inside the suite.
BackendFactory checked_factory(const BackendSpec& spec) {
  try {
    (void)make_backend(spec);
  } catch (const BackendInitError& e) {
    throw ExitError{kExitBackend, fmt::format("backend initialization failed: {}", e.what())};
  }
  return [spec] { return make_backend(spec); };
}

struct CommonOptions {
  std::string backend = "oracle";
  std::string model = "gpt-4o";
  int budget = 20;
  std::string mode = "auto";
  bool open_loop = false;
  double drop_probability = 0.0;
  double noise = 0.0;
  std::string prompts;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--backend", o.backend, "oracle, http or fault:<loop_forever|invalid_call|wrong_object|silent>");
  cmd->add_option("--model", o.model, "Model name for the http backend");
  cmd->add_option("--budget", o.budget, "Reasoner invocations per trial");
  cmd->add_option("--mode", o.mode, "auto, fast or slow")->check(CLI::IsMember({"auto", "fast", "slow"}));
  cmd->add_flag("--open-loop", o.open_loop, "Disable feedback and replanning (ablation)");
  cmd->add_option("--drop-probability", o.drop_probability, "Grasp drop probability")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--observation-noise", o.noise, "Observation noise sigma (m)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--prompts", o.prompts, "Directory with prompt templates");
}

int bench_run(CLI::App* cmd, const CommonOptions& o, const std::string& suite, std::uint64_t seed, int parallel, const std::string& out_dir,
              const std::string& config_path, int scenarios, int goals, const std::vector<std::string>& tasks) {
  SuiteConfig config;
  try {
    if (!config_path.empty()) {
      config = SuiteConfig::from_json(parse_json(read_file(config_path)));
    }
    const auto given = [&](const char* flag) { return cmd->count(flag) > 0; };
    if (given("--suite") || config_path.empty()) {
      config.suite = *parse_suite(suite);
    }
    if (given("--seed") || config_path.empty()) {
      config.master_seed = seed;
    }
    if (given("--backend") || config_path.empty()) {
      config.backend = BackendSpec::parse(o.backend);
    }
    if (given("--model")) {
      config.backend.model = o.model;
    }
    if (given("--budget")) {
      config.agent.budget = o.budget;
    }
    if (given("--mode")) {
      config.agent.mode_override = *parse_mode_override(o.mode);
    }
    if (given("--open-loop")) {
      config.agent.closed_loop = !o.open_loop;
    }
    if (given("--drop-probability")) {
      config.drop_probability = o.drop_probability;
    }
    if (given("--observation-noise")) {
      config.agent.observation_noise = o.noise;
    }
    if (given("--prompts")) {
      config.prompts_dir = o.prompts;
    }
    if (given("--parallel")) {
      config.parallel = parallel;
    }
    if (given("--scenarios")) {
      config.scenarios = scenarios;
    }
    if (given("--goals")) {
      config.goals_per_scenario = goals;
    }
    if (given("--task")) {
      config.tasks = tasks;
    }
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw ExitError{kExitConfig, e.what()};
  } catch (const SerializationError& e) {
    throw ExitError{kExitConfig, fmt::format("{}: {}", config_path, e.what())};
  }

  const auto factory = checked_factory(config.backend);
  SuiteReport report;
  try {
    report = run_suite(config, factory);
  } catch (const std::runtime_error& e) {
    throw ExitError{kExitConfig, e.what()};
  }
  try {
    write_suite_outputs(report, out_dir);
  } catch (const std::exception& e) {
    throw ExitError{kExitConfig, e.what()};
  }
  std::cout << summary_csv(report.tasks) << '\n' << group_report(report.tasks);
  for (const auto& s : report.skipped) {
    std::cerr << fmt::format("skipped {} (scenario {}, goal {}): {}\n", s.task_id, s.scenario_seed, s.goal_index, s.reason);
  }
  std::cerr << fmt::format("{} trials in {:.2f} s; wrote {}/trials.jsonl and {}/summary.csv\n", report.trials.size(), report.wall_time_s,
                           out_dir, out_dir);
  return 0;
}

int bench_report(const std::string& path) {
  std::vector<TaskSummary> tasks;
  try {
    tasks = parse_summary_csv(read_file(path));
  } catch (const std::runtime_error& e) {
    throw ExitError{kExitConfig, e.what()};
  }
  std::cout << group_report(tasks);
  return 0;
}

void print_trace(const TrialRecord& r) {
  std::cout << fmt::format("instruction: {}\n", r.instruction);
  std::cout << fmt::format("task: {} ({})\n", r.task_id.empty() ? "unrecognized" : r.task_id, to_string(r.group));
  std::cout << fmt::format("mode: {} (difficulty {:.2f}{})\n", to_string(r.mode.mode), r.mode.predicted_difficulty,
                           r.mode.overridden ? ", set by --mode" : "");
  const auto& rationales = r.memory.rationales();
  std::size_t next_rationale = 0;
  const auto flush_rationales = [&](std::size_t upto) {
    while (next_rationale < rationales.size() && rationales[next_rationale].before_step <= upto) {
      std::cout << fmt::format("-- rationale (invocation {}) --\n{}\n", rationales[next_rationale].invocation_index,
                               rationales[next_rationale].text);
      ++next_rationale;
    }
  };
  for (const auto& step : r.memory.steps()) {
    flush_rationales(static_cast<std::size_t>(step.index));
    const std::string call = step.call ? serialize_call(*step.call) : fmt::format("<unparseable: {}>", step.parse_error.value_or(""));
    std::cout << fmt::format("[{}] inv {}{}: {}\n", step.index, step.invocation_index, step.superseded ? " (superseded)" : "", call);
    if (step.feedback) {
      std::cout << "    " << step.feedback->content << '\n';
    }
  }
  flush_rationales(r.memory.steps().size());
  std::cout << fmt::format("invocations: {}  input tokens: {}  steps completed: {}\n", r.invocation_count, r.total_input_tokens,
                           r.steps_completed);
  std::cout << fmt::format("predicted status: {}\n", to_string(r.predicted_status));
  for (const auto& w : r.warnings) {
    std::cout << "warning: " << w << '\n';
  }
  if (r.diagnostic) {
    std::cout << "diagnostic: " << *r.diagnostic << '\n';
  }
}

int solve(const CommonOptions& o, const std::string& instruction, const std::string& scene_path, int pairs, std::uint64_t seed,
          bool json_out) {
  WorldConfig world;
  world.failure.drop_probability = o.drop_probability;
  SceneState scene;
  try {
    if (!scene_path.empty()) {
      scene = scene_from_json(parse_json(read_file(scene_path)));
      if (const auto bad = check_invariants(scene, world)) {
        throw SerializationError(*bad);
      }
    } else {
      scene = spawn_scene(world, pairs, seed);
    }
  } catch (const SerializationError& e) {
    throw ExitError{kExitConfig, fmt::format("malformed scene: {}", e.what())};
  } catch (const WorldError& e) {
    throw ExitError{kExitConfig, e.what()};
  }
  world.seed = scene.seed;

  AgentConfig agent;
  BackendSpec spec;
  try {
    agent.budget = o.budget;
    agent.mode_override = *parse_mode_override(o.mode);
    agent.closed_loop = !o.open_loop;
    agent.observation_noise = o.noise;
    agent.validate();
    spec = BackendSpec::parse(o.backend);
    spec.model = o.model;
  } catch (const std::invalid_argument& e) {
    throw ExitError{kExitConfig, e.what()};
  }
  std::unique_ptr<Reasoner> backend;
  try {
    backend = make_backend(spec);
  } catch (const BackendInitError& e) {
    throw ExitError{kExitBackend, fmt::format("backend initialization failed: {}", e.what())};
  }
  PromptSet prompts = PromptSet::builtin();
  if (!o.prompts.empty()) {
    try {
      prompts = PromptSet::load(o.prompts);
    } catch (const std::runtime_error& e) {
      throw ExitError{kExitConfig, e.what()};
    }
  }

  const auto [record, recognized] = solve_instruction(instruction, scene, world, agent, *backend, prompts);
  if (json_out) {
    std::cout << trial_to_json(record).dump() << '\n';
    return 0;
  }
  print_trace(record);
  std::cout << fmt::format("verdict: {}\n", !recognized ? "unknown (instruction not in the task catalog)" : record.evaluation_pass ? "pass" : "fail");
  return 0;
}

int replay(const std::string& path, int line_no) {
  const auto text = read_file(path);
  std::istringstream in(text);
  std::string line;
  int n = 0;
  int replayed = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || (line_no > 0 && n != line_no)) {
      continue;
    }
    ReplayResult result;
    try {
      result = replay_trial(parse_json(line));
    } catch (const SerializationError& e) {
      throw ExitError{kExitConfig, fmt::format("line {}: {}", n, e.what())};
    } catch (const nlohmann::json::exception& e) {
      throw ExitError{kExitConfig, fmt::format("line {}: {}", n, e.what())};
    }
    if (!result.match) {
      std::cout << fmt::format("line {}: divergence at {}\n", n, result.message);
      return kExitDiverged;
    }
    ++replayed;
  }
  if (replayed == 0) {
    throw ExitError{kExitConfig, fmt::format("{}: no trial records", path)};
  }
  std::cout << fmt::format("{} trial(s) replayed; all match\n", replayed);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-thinking closed-loop manipulation agent and benchmark"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  std::string suite = "all";
  std::uint64_t seed = 42;
  int parallel = 1;
  std::string out_dir = "bench_out";
  std::string config_path;
  int scenarios = 10;
  int goals = 5;
  std::vector<std::string> tasks;
  auto* run = app.add_subcommand("bench-run", "Run a benchmark suite");
  run->add_option("--suite", suite, "canonical, robustness or all")->check(CLI::IsMember({"canonical", "robustness", "all"}));
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--parallel", parallel, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--config", config_path, "Suite config JSON");
  run->add_option("--scenarios", scenarios, "Scenarios per task")->check(CLI::PositiveNumber);
  run->add_option("--goals", goals, "Goal seeds per scenario")->check(CLI::PositiveNumber);
  run->add_option("--task", tasks, "Restrict to task id (repeatable)");
  add_common(run, run_opts);

  std::string summary_path;
  auto* report = app.add_subcommand("bench-report", "Print the per-group table of a summary.csv");
  report->add_option("summary", summary_path, "Path to summary.csv (or its directory)")->required();

  CommonOptions solve_opts;
  std::string instruction;
  std::string scene_path;
  int pairs = 3;
  std::uint64_t solve_seed = 0;
  bool json_out = false;
  auto* solve_cmd = app.add_subcommand("solve", "Run one trial on an instruction");
  solve_cmd->add_option("--instruction", instruction, "Instruction text")->required();
  auto* scene_opt = solve_cmd->add_option("--scene", scene_path, "Scene snapshot JSON");
  solve_cmd->add_option("--pairs", pairs, "Block-bowl pairs for a spawned scene")->check(CLI::Range(2, 4))->excludes(scene_opt);
  solve_cmd->add_option("--seed", solve_seed, "Seed for a spawned scene")->excludes(scene_opt);
  solve_cmd->add_flag("--json", json_out, "Print the trial record as JSON");
  add_common(solve_cmd, solve_opts);

  std::string trial_path;
  int line_no = 0;
  auto* replay_cmd = app.add_subcommand("replay", "Re-simulate recorded trials and compare");
  replay_cmd->add_option("--trial", trial_path, "trials.jsonl file (or a single record)")->required();
  replay_cmd->add_option("--line", line_no, "Only replay this 1-based line")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) {
      return bench_run(run, run_opts, suite, seed, parallel, out_dir, config_path, scenarios, goals, tasks);
    }
    if (*report) {
      std::string path = summary_path;
      if (std::filesystem::is_directory(path)) {
        path = (std::filesystem::path(path) / "summary.csv").string();
      }
      return bench_report(path);
    }
    if (*solve_cmd) {
      return solve(solve_opts, instruction, scene_path, pairs, solve_seed, json_out);
    }
    if (*replay_cmd) {
      return replay(trial_path, line_no);
    }
  } catch (const ExitError& e) {
    std::cerr << "error: " << e.message << '\n';
    return e.code;
  }
  return kExitConfig;
}
