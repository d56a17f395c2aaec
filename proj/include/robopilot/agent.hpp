// SPDX-License-Identifier: Apache-2.0
//
// Dual-thinking agent: a mode selector picks fast (one call per invocation)
// or slow (rationale first, then calls) thinking once per trial, and the
// chosen loop runs against the simulator under a hard invocation budget.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "robopilot/monitor.hpp"
#include "robopilot/prompts.hpp"
#include "robopilot/reasoner.hpp"
#include "robopilot/tasks.hpp"

namespace robopilot {

enum class ModeOverride { Auto, Fast, Slow };

std::string_view to_string(ModeOverride mode);
std::optional<ModeOverride> parse_mode_override(std::string_view text);

struct AgentConfig {
  int budget = 20;
  double monitor_threshold = 0.02;
  double slow_threshold = 3.0;
  ModeOverride mode_override = ModeOverride::Auto;
  /// Off for the open-loop ablation: no feedback is reported and nothing is
  /// replanned.
  bool closed_loop = true;
  double observation_noise = 0.0;

  /// Throws std::invalid_argument.
  void validate() const;
};

struct ModeDecision {
  ThinkingMode mode = ThinkingMode::Slow;
  double predicted_difficulty = 3.0;
  std::string signals;
  /// Set when the mode came from configuration instead of the selector.
  bool overridden = false;
};

struct InvocationRecord {
  int index = 0;
  RequestKind kind = RequestKind::Action;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  double latency_s = 0.0;
};

struct TrialRecord {
  std::string task_id;
  TaskGroup group = TaskGroup::SM;
  std::string instruction;
  std::uint64_t scenario_seed = 0;
  std::uint64_t goal_seed = 0;
  int n_pairs = 0;
  Feasibility feasibility_label = Feasibility::Feasible;
  GoalSpec goal;
  WorldConfig world;
  AgentConfig agent;
  std::string backend;

  SceneState initial_scene;
  SceneState final_scene;

  ModeDecision mode;
  PlanActionMemory memory;
  std::vector<InvocationRecord> invocations;

  int invocation_count = 0;
  std::int64_t total_input_tokens = 0;
  int steps_completed = 0;
  double wall_time_s = 0.0;
  double time_per_step_s = 0.0;

  FinishStatus predicted_status = FinishStatus::Failure;
  std::string finish_message;
  bool evaluation_pass = false;
  std::map<ObjectId, double> goal_distances;
  int redundant_actions = 0;
  std::vector<std::string> warnings;
  std::optional<std::string> diagnostic;

  /// Mean input tokens per invocation (0 when nothing was invoked).
  double avg_input_tokens() const;
};

/// Deviated or rejected steps (and failed executions) that were followed by
/// at least one more reasoner invocation.
int answered_recovery_events(const TrialRecord& record);

class Agent {
public:
  Agent(Reasoner& backend, AgentConfig config = {}, PromptSet prompts = PromptSet::builtin());

  /// One selector invocation, logged into `record`. Unparseable replies
  /// default to slow at difficulty 3.0 with a warning.
  ModeDecision select_mode(const std::string& instruction, const Observation& observation, TrialRecord& record);

  /// Runs the fast or slow loop directly (no selector invocation).
  TrialRecord run_fast(const TaskInstance& task, const SceneState& scene, const WorldConfig& world);
  TrialRecord run_slow(const TaskInstance& task, const SceneState& scene, const WorldConfig& world);

  /// Full trial: mode selection unless overridden, the chosen loop, then
  /// evaluation. Never throws; internal errors become failed trials.
  TrialRecord run_trial(const TaskInstance& task, const SceneState& scene, const WorldConfig& world);

  const AgentConfig& config() const { return config_; }

private:
  struct Trial;
  TrialRecord run(const TaskInstance& task, const SceneState& scene, const WorldConfig& world, std::optional<ThinkingMode> forced);
  void fast_loop(Trial& trial);
  void slow_loop(Trial& trial);

  Reasoner& backend_;
  AgentConfig config_;
  PromptSet prompts_;
};

}  // namespace robopilot
