// SPDX-License-Identifier: Apache-2.0
#include "robopilot/bench.hpp"

#include <atomic>
#include <chrono>
#include <fmt/format.h>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace robopilot {

namespace {

constexpr std::uint64_t kScenarioStream = 0x5ce7a410ULL;
constexpr int kGoalAttempts = 8;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Job {
  const TaskDef* task;
  Scenario scenario;
  int goal_index;
};

struct JobResult {
  std::optional<TrialRecord> record;
  std::optional<SkippedTrial> skipped;
};

JobResult run_job(const Job& job, const SuiteConfig& config, const PromptSet& prompts, Reasoner& backend) {
  JobResult out;
  WorldConfig world = config.world;
  world.seed = job.scenario.seed;
  if (job.task->failure_override) {
    world.failure = *job.task->failure_override;
    if (config.drop_probability) {
      world.failure.drop_probability = *config.drop_probability;
    }
  }
  try {
    const SceneState scene = spawn_scene(world, job.scenario.n_pairs, job.scenario.seed);
    std::optional<TaskInstance> instance;
    std::string last_error;
    // A goal that cannot be posed on this scene is redrawn with a derived seed.
    for (int attempt = 0; attempt < kGoalAttempts && !instance; ++attempt) {
      const auto seed = derive_goal_seed(job.scenario.seed, job.task->id, job.goal_index + attempt * 1000);
      try {
        instance = instantiate_task(*job.task, scene, seed);
      } catch (const ScenarioIncompatible& e) {
        last_error = e.what();
      }
    }
    if (!instance) {
      out.skipped = SkippedTrial{job.task->id, job.scenario.seed, job.goal_index, last_error};
      return out;
    }
    Agent agent(backend, config.agent, prompts);
    out.record = agent.run_trial(*instance, scene, world);
  } catch (const std::exception& e) {
    out.skipped = SkippedTrial{job.task->id, job.scenario.seed, job.goal_index, e.what()};
  }
  return out;
}

template <typename T>
double mean(const std::vector<T>& v) {
  if (v.empty()) {
    return 0.0;
  }
  double s = 0.0;
  for (const auto& x : v) {
    s += x;
  }
  return s / static_cast<double>(v.size());
}

}  // namespace

std::string_view to_string(Suite suite) {
  switch (suite) {
    case Suite::Canonical:
      return "canonical";
    case Suite::Robustness:
      return "robustness";
    case Suite::All:
      return "all";
  }
  return "all";
}

std::optional<Suite> parse_suite(std::string_view text) {
  for (const auto s : {Suite::Canonical, Suite::Robustness, Suite::All}) {
    if (to_string(s) == text) {
      return s;
    }
  }
  return std::nullopt;
}

std::vector<Scenario> generate_scenarios(std::uint64_t master_seed, int count) {
  if (count < 1) {
    throw std::invalid_argument("scenario count must be at least 1");
  }
  SceneRng rng(SceneRng::derive(master_seed, kScenarioStream));
  std::vector<Scenario> out;
  for (int i = 0; i < count; ++i) {
    Scenario s;
    s.index = i;
    s.n_pairs = 2 + static_cast<int>(rng.below(3));
    s.seed = SceneRng::derive(master_seed, static_cast<std::uint64_t>(i) + 1);
    out.push_back(s);
  }
  return out;
}

std::uint64_t derive_goal_seed(std::uint64_t scenario_seed, std::string_view task_id, int goal_index) {
  return SceneRng::derive(SceneRng::derive(scenario_seed, fnv1a(task_id)), static_cast<std::uint64_t>(goal_index));
}

std::vector<const TaskDef*> suite_tasks(Suite suite) {
  std::vector<const TaskDef*> out;
  for (const auto& def : build_catalog()) {
    const bool canonical = is_canonical(def.group);
    if (suite == Suite::All || (suite == Suite::Canonical) == canonical) {
      out.push_back(&def);
    }
  }
  return out;
}

SuiteConfig SuiteConfig::from_json(const Json& j) {
  if (!j.is_object()) {
    throw std::invalid_argument("suite config must be a JSON object");
  }
  static const std::vector<std::string> top_keys = {"suite", "master_seed", "backend", "budget", "overrides"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(top_keys.begin(), top_keys.end(), key) == top_keys.end()) {
      throw std::invalid_argument(fmt::format("unknown suite config key '{}'", key));
    }
  }
  SuiteConfig c;
  try {
    if (j.contains("suite")) {
      const auto s = parse_suite(j["suite"].get<std::string>());
      if (!s) {
        throw std::invalid_argument("suite must be canonical, robustness or all");
      }
      c.suite = *s;
    }
    if (j.contains("master_seed")) {
      c.master_seed = j["master_seed"].get<std::uint64_t>();
    }
    if (j.contains("backend")) {
      c.backend = BackendSpec::parse(j["backend"].get<std::string>());
    }
    if (j.contains("budget")) {
      c.agent.budget = j["budget"].get<int>();
    }
    if (j.contains("overrides")) {
      const auto& o = j["overrides"];
      if (!o.is_object()) {
        throw std::invalid_argument("overrides must be an object");
      }
      for (const auto& [key, value] : o.items()) {
        if (key == "mode") {
          const auto m = parse_mode_override(value.get<std::string>());
          if (!m) {
            throw std::invalid_argument("overrides.mode must be auto, fast or slow");
          }
          c.agent.mode_override = *m;
        } else if (key == "open_loop") {
          c.agent.closed_loop = !value.get<bool>();
        } else if (key == "drop_probability") {
          c.drop_probability = value.get<double>();
        } else if (key == "monitor_threshold") {
          c.agent.monitor_threshold = value.get<double>();
        } else if (key == "slow_threshold") {
          c.agent.slow_threshold = value.get<double>();
        } else if (key == "observation_noise") {
          c.agent.observation_noise = value.get<double>();
        } else if (key == "scenarios") {
          c.scenarios = value.get<int>();
        } else if (key == "goals_per_scenario") {
          c.goals_per_scenario = value.get<int>();
        } else if (key == "parallel") {
          c.parallel = value.get<int>();
        } else if (key == "model") {
          c.backend.model = value.get<std::string>();
        } else if (key == "tasks") {
          c.tasks = value.get<std::vector<std::string>>();
        } else if (key == "prompts") {
          c.prompts_dir = value.get<std::string>();
        } else {
          throw std::invalid_argument(fmt::format("unknown override '{}'", key));
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(fmt::format("bad suite config: {}", e.what()));
  }
  c.validate();
  return c;
}

Json SuiteConfig::to_json() const {
  Json j;
  j["suite"] = robopilot::to_string(suite);
  j["master_seed"] = master_seed;
  j["backend"] = backend.str();
  j["budget"] = agent.budget;
  Json o;
  o["mode"] = robopilot::to_string(agent.mode_override);
  o["open_loop"] = !agent.closed_loop;
  if (drop_probability) {
    o["drop_probability"] = *drop_probability;
  }
  o["monitor_threshold"] = agent.monitor_threshold;
  o["slow_threshold"] = agent.slow_threshold;
  o["observation_noise"] = agent.observation_noise;
  o["scenarios"] = scenarios;
  o["goals_per_scenario"] = goals_per_scenario;
  o["parallel"] = parallel;
  o["model"] = backend.model;
  if (!tasks.empty()) {
    o["tasks"] = tasks;
  }
  if (prompts_dir) {
    o["prompts"] = prompts_dir->string();
  }
  j["overrides"] = std::move(o);
  return j;
}

void SuiteConfig::validate() const {
  agent.validate();
  world.validate();
  if (scenarios < 1 || goals_per_scenario < 1) {
    throw std::invalid_argument("scenarios and goals_per_scenario must be at least 1");
  }
  if (parallel < 1) {
    throw std::invalid_argument("parallel must be at least 1");
  }
  if (drop_probability && (*drop_probability < 0.0 || *drop_probability > 1.0)) {
    throw std::invalid_argument("drop_probability must be in [0, 1]");
  }
  for (const auto& id : tasks) {
    if (find_task(id) == nullptr) {
      throw std::invalid_argument(fmt::format("unknown task '{}'", id));
    }
  }
}

SuiteReport run_suite(const SuiteConfig& config, const BackendFactory& factory) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto scenarios = generate_scenarios(config.master_seed, config.scenarios);
  const PromptSet prompts = config.prompts_dir ? PromptSet::load(*config.prompts_dir) : PromptSet::builtin();

  std::vector<Job> jobs;
  for (const auto* task : suite_tasks(config.suite)) {
    if (!config.tasks.empty() && std::find(config.tasks.begin(), config.tasks.end(), task->id) == config.tasks.end()) {
      continue;
    }
    for (const auto& s : scenarios) {
      for (int g = 0; g < config.goals_per_scenario; ++g) {
        jobs.push_back(Job{task, s, g});
      }
    }
  }

  std::vector<JobResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&](Reasoner& backend) {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      results[i] = run_job(jobs[i], config, prompts, backend);
    }
  };
  const int workers = std::max(1, std::min<int>(config.parallel, static_cast<int>(jobs.size())));
  std::vector<std::unique_ptr<Reasoner>> backends;
  for (int w = 0; w < workers; ++w) {
    backends.push_back(factory());
  }
  if (workers == 1) {
    worker(*backends.front());
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) {
      threads.emplace_back(worker, std::ref(*backends[static_cast<std::size_t>(w)]));
    }
    for (auto& t : threads) {
      t.join();
    }
  }

  SuiteReport report;
  for (auto& r : results) {
    if (r.record) {
      report.trials.push_back(std::move(*r.record));
    } else if (r.skipped) {
      report.skipped.push_back(std::move(*r.skipped));
    }
  }
  report.tasks = summarize_tasks(report.trials);
  report.groups = summarize_groups(report.tasks);
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<TaskSummary> summarize_tasks(const std::vector<TrialRecord>& trials) {
  std::vector<TaskSummary> out;
  std::map<std::string, std::size_t> index;
  std::map<std::string, std::vector<double>> step_times;
  std::map<std::string, std::vector<double>> tokens;
  std::map<std::string, int> slow;
  for (const auto& r : trials) {
    auto [it, inserted] = index.emplace(r.task_id, out.size());
    if (inserted) {
      TaskSummary s;
      s.task_id = r.task_id;
      s.group = r.group;
      out.push_back(s);
    }
    auto& s = out[it->second];
    ++s.trials;
    s.passes += r.evaluation_pass ? 1 : 0;
    if (r.steps_completed > 0) {
      step_times[r.task_id].push_back(r.time_per_step_s);
    }
    tokens[r.task_id].push_back(r.avg_input_tokens());
    slow[r.task_id] += r.mode.mode == ThinkingMode::Slow ? 1 : 0;
  }
  for (auto& s : out) {
    s.success_rate = 100.0 * s.passes / s.trials;
    s.avg_time_per_step_s = mean(step_times[s.task_id]);
    s.avg_input_tokens = mean(tokens[s.task_id]);
    s.slow_mode_fraction = static_cast<double>(slow[s.task_id]) / s.trials;
  }
  return out;
}

std::vector<GroupSummary> summarize_groups(const std::vector<TaskSummary>& tasks) {
  std::vector<GroupSummary> out;
  for (const auto g : kAllGroups) {
    GroupSummary gs;
    gs.group = g;
    double tokens = 0.0;
    double slow = 0.0;
    for (const auto& t : tasks) {
      if (t.group != g) {
        continue;
      }
      ++gs.tasks;
      gs.trials += t.trials;
      gs.passes += t.passes;
      tokens += t.avg_input_tokens * t.trials;
      slow += t.slow_mode_fraction * t.trials;
    }
    if (gs.trials > 0) {
      gs.success_rate = 100.0 * gs.passes / gs.trials;
      gs.avg_input_tokens = tokens / gs.trials;
      gs.slow_mode_fraction = slow / gs.trials;
    }
    out.push_back(gs);
  }
  return out;
}

std::string summary_csv(const std::vector<TaskSummary>& tasks) {
  std::string out(kSummaryHeader);
  out += '\n';
  for (const auto& t : tasks) {
    out += fmt::format("{},{},{},{:.1f},{:.4f},{:.1f},{:.3f}\n", t.task_id, to_string(t.group), t.trials, t.success_rate,
                       t.avg_time_per_step_s, t.avg_input_tokens, t.slow_mode_fraction);
  }
  return out;
}

std::vector<TaskSummary> parse_summary_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kSummaryHeader) {
    throw std::runtime_error("summary.csv: unexpected header");
  }
  std::vector<TaskSummary> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cells.push_back(cell);
    }
    if (cells.size() != 7) {
      throw std::runtime_error(fmt::format("summary.csv line {}: expected 7 columns", lineno));
    }
    TaskSummary t;
    t.task_id = cells[0];
    const auto g = parse_task_group(cells[1]);
    if (!g) {
      throw std::runtime_error(fmt::format("summary.csv line {}: unknown group '{}'", lineno, cells[1]));
    }
    t.group = *g;
    try {
      t.trials = std::stoi(cells[2]);
      t.success_rate = std::stod(cells[3]);
      t.avg_time_per_step_s = std::stod(cells[4]);
      t.avg_input_tokens = std::stod(cells[5]);
      t.slow_mode_fraction = std::stod(cells[6]);
    } catch (const std::exception&) {
      throw std::runtime_error(fmt::format("summary.csv line {}: bad number", lineno));
    }
    t.passes = static_cast<int>(std::lround(t.success_rate * t.trials / 100.0));
    out.push_back(t);
  }
  return out;
}

std::string group_report(const std::vector<TaskSummary>& tasks) {
  const auto groups = summarize_groups(tasks);
  std::string out = fmt::format("{:<6}{:<26}{:>6}{:>8}{:>13}{:>12}{:>9}\n", "Group", "Name", "Tasks", "Trials", "Success(%)",
                                "AvgTokens", "Slow(%)");
  int trials = 0;
  double tokens = 0.0;
  double slow = 0.0;
  double rate_sum = 0.0;
  int groups_present = 0;
  for (const auto& g : groups) {
    if (g.trials == 0) {
      out += fmt::format("{:<6}{:<26}{:>6}{:>8}{:>13}{:>12}{:>9}\n", to_string(g.group), group_display_name(g.group), 0, 0, "-", "-", "-");
      continue;
    }
    out += fmt::format("{:<6}{:<26}{:>6}{:>8}{:>13.1f}{:>12.1f}{:>9.1f}\n", to_string(g.group), group_display_name(g.group), g.tasks,
                       g.trials, g.success_rate, g.avg_input_tokens, 100.0 * g.slow_mode_fraction);
    trials += g.trials;
    tokens += g.avg_input_tokens;
    slow += g.slow_mode_fraction;
    rate_sum += g.success_rate;
    ++groups_present;
  }
  if (groups_present > 0) {
    out += fmt::format("{:<6}{:<26}{:>6}{:>8}{:>13.1f}{:>12.1f}{:>9.1f}\n", "Avg", "(mean over groups)", tasks.size(), trials,
                       rate_sum / groups_present, tokens / groups_present, 100.0 * slow / groups_present);
  }
  return out;
}

void write_suite_outputs(const SuiteReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "trials.jsonl", std::ios::binary);
    if (!out) {
      throw std::runtime_error(fmt::format("cannot write {}", (dir / "trials.jsonl").string()));
    }
    for (const auto& r : report.trials) {
      out << trial_to_json(r).dump() << '\n';
    }
  }
  std::ofstream out(dir / "summary.csv", std::ios::binary);
  if (!out) {
    throw std::runtime_error(fmt::format("cannot write {}", (dir / "summary.csv").string()));
  }
  out << summary_csv(report.tasks);
}

SolveResult solve_instruction(const std::string& instruction, const SceneState& scene, const WorldConfig& world, const AgentConfig& agent,
                              Reasoner& backend, const PromptSet& prompts) {
  TaskInstance task;
  task.instruction = instruction;
  task.n_pairs = static_cast<int>(scene.objects.size() / 2);
  const auto interp = interpret_instruction(instruction, observe(scene));
  if (interp) {
    const TaskDef* def = find_task(interp->task_id);
    task.task_id = def->id;
    task.group = def->group;
    task.goal = interp->goal;
    task.reference_moves = interp->moves;
    task.feasibility_label = interp->feasible ? Feasibility::Feasible : Feasibility::Infeasible;
    task.labeled_difficulty = def->labeled_difficulty;
    task.scaled_difficulty = scale_difficulty(def->labeled_difficulty, task.n_pairs);
  }
  task.failure = world.failure;
  Agent runner(backend, agent, prompts);
  SolveResult result{runner.run_trial(task, scene, world), interp.has_value()};
  if (!result.recognized) {
    result.record.evaluation_pass = false;
  }
  return result;
}

}  // namespace robopilot
