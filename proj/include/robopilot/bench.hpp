// SPDX-License-Identifier: Apache-2.0
//
// Suite runner: seeded scenarios, 10 scenarios x 5 goal seeds per task,
// per-task and per-group aggregation, and the trials.jsonl / summary.csv
// outputs.
#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "robopilot/agent.hpp"
#include "robopilot/serialization.hpp"

namespace robopilot {

enum class Suite { Canonical, Robustness, All };

std::string_view to_string(Suite suite);
std::optional<Suite> parse_suite(std::string_view text);

struct Scenario {
  int index = 0;
  int n_pairs = 3;
  std::uint64_t seed = 0;
};

/// n_pairs uniform in {2, 3, 4}; seeds derived from (master_seed, index).
std::vector<Scenario> generate_scenarios(std::uint64_t master_seed, int count = 10);

std::uint64_t derive_goal_seed(std::uint64_t scenario_seed, std::string_view task_id, int goal_index);

std::vector<const TaskDef*> suite_tasks(Suite suite);

struct SuiteConfig {
  Suite suite = Suite::All;
  std::uint64_t master_seed = 42;
  BackendSpec backend;
  AgentConfig agent;
  WorldConfig world;
  int scenarios = 10;
  int goals_per_scenario = 5;
  int parallel = 1;
  /// Replaces the ER drop probability when set.
  std::optional<double> drop_probability;
  /// Restricts the run to these task ids (empty = whole suite).
  std::vector<std::string> tasks;
  /// Prompt template directory; the built-in templates when unset.
  std::optional<std::filesystem::path> prompts_dir;

  /// {suite, master_seed, backend, budget, overrides: {...}}. Throws
  /// std::invalid_argument on bad values.
  static SuiteConfig from_json(const Json& j);
  Json to_json() const;
  void validate() const;
};

struct TaskSummary {
  std::string task_id;
  TaskGroup group = TaskGroup::SM;
  int trials = 0;
  int passes = 0;
  double success_rate = 0.0;
  double avg_time_per_step_s = 0.0;
  double avg_input_tokens = 0.0;
  double slow_mode_fraction = 0.0;
};

struct GroupSummary {
  TaskGroup group = TaskGroup::SM;
  int tasks = 0;
  int trials = 0;
  int passes = 0;
  double success_rate = 0.0;
  double avg_input_tokens = 0.0;
  double slow_mode_fraction = 0.0;
};

struct SkippedTrial {
  std::string task_id;
  std::uint64_t scenario_seed = 0;
  int goal_index = 0;
  std::string reason;
};

struct SuiteReport {
  std::vector<TrialRecord> trials;
  std::vector<TaskSummary> tasks;
  std::vector<GroupSummary> groups;
  std::vector<SkippedTrial> skipped;
  double wall_time_s = 0.0;
};

using BackendFactory = std::function<std::unique_ptr<Reasoner>()>;

/// Runs every (task, scenario, goal) trial. Partial failures are recorded,
/// never thrown. Results are ordered by (task, scenario, goal) regardless of
/// parallelism.
SuiteReport run_suite(const SuiteConfig& config, const BackendFactory& factory);

std::vector<TaskSummary> summarize_tasks(const std::vector<TrialRecord>& trials);
std::vector<GroupSummary> summarize_groups(const std::vector<TaskSummary>& tasks);

inline constexpr std::string_view kSummaryHeader =
    "task_id,group,trials,success_rate,avg_time_per_step_s,avg_input_tokens,slow_mode_fraction";

std::string summary_csv(const std::vector<TaskSummary>& tasks);
/// Throws std::runtime_error on a malformed file.
std::vector<TaskSummary> parse_summary_csv(const std::string& text);

/// Table of the 10 groups plus the average row.
std::string group_report(const std::vector<TaskSummary>& tasks);

struct SolveResult {
  TrialRecord record;
  /// False when the instruction matched no catalog task; the record then
  /// carries no goal and its evaluation is meaningless.
  bool recognized = false;
};

/// One trial on free instruction text. The instruction is matched against
/// the task catalog to obtain the goal it is judged by.
SolveResult solve_instruction(const std::string& instruction, const SceneState& scene, const WorldConfig& world, const AgentConfig& agent,
                              Reasoner& backend, const PromptSet& prompts = PromptSet::builtin());

/// Writes trials.jsonl and summary.csv into `dir` (created if missing).
void write_suite_outputs(const SuiteReport& report, const std::filesystem::path& dir);

}  // namespace robopilot
