// SPDX-License-Identifier: Apache-2.0
//
// Benchmark task catalog: 21 tasks in 10 groups, each able to sample its
// parameters for a scene, render an instruction, parse that instruction back
// and resolve it against an observation into an ordered list of moves.
#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "robopilot/primitives.hpp"
#include "robopilot/rationale.hpp"
#include "robopilot/world.hpp"

namespace robopilot {

enum class TaskGroup { SM, SA, SS, PM, SR, CR, SP, FR, LR, ER };

inline constexpr std::array<TaskGroup, 10> kAllGroups = {TaskGroup::SM, TaskGroup::SA, TaskGroup::SS, TaskGroup::PM, TaskGroup::SR,
                                                          TaskGroup::CR, TaskGroup::SP, TaskGroup::FR, TaskGroup::LR, TaskGroup::ER};

std::string_view to_string(TaskGroup group);
/// Long display name, e.g. "Simple Manipulation".
std::string_view group_display_name(TaskGroup group);
std::optional<TaskGroup> parse_task_group(std::string_view text);
/// SM, SA, SS, PM and SR form the canonical suite; the rest the robustness suite.
bool is_canonical(TaskGroup group);

inline constexpr double kSuccessDelta = 0.02;

struct GoalSpec {
  std::map<ObjectId, Vec3> targets;

  friend bool operator==(const GoalSpec&, const GoalSpec&) = default;
};

/// Task parameters that appear in the instruction text.
struct TaskParams {
  std::vector<std::string> colors;
  std::vector<std::array<double, 2>> points;
  int k = 0;
  int variant = 0;

  friend bool operator==(const TaskParams&, const TaskParams&) = default;
};

/// One object move. With `base` set it is a pick_place_on, otherwise a
/// pick_place_at to `position`.
struct Move {
  ObjectId object;
  std::optional<ObjectId> base;
  Vec3 position;

  friend bool operator==(const Move&, const Move&) = default;
};

struct Interpretation {
  std::string task_id;
  bool feasible = true;
  std::string infeasible_reason;
  std::vector<Move> moves;
  GoalSpec goal;
  /// Worked numbers behind the plan (distances, midpoints, conditions).
  std::string calculation;
};

struct TaskDef {
  std::string id;
  TaskGroup group = TaskGroup::SM;
  double labeled_difficulty = 1.0;
  Feasibility feasibility_label = Feasibility::Feasible;
  std::optional<FailureProfile> failure_override;
  std::string summary;

  /// Draws parameters for a scene; nullopt when the scene cannot host the task.
  std::function<std::optional<TaskParams>(const Observation&, SceneRng&)> sample;
  std::function<std::string(const TaskParams&)> render;
  /// Recovers parameters from instruction text; nullopt if it does not match.
  std::function<std::optional<TaskParams>(const std::string&)> parse;
  /// Resolves parameters against a scene into moves (and the goal).
  std::function<Interpretation(const TaskParams&, const Observation&)> resolve;
};

const std::vector<TaskDef>& build_catalog();
const TaskDef* find_task(std::string_view id);

/// base + 0.5 * (n_pairs - 3), clamped to [1, 5].
double scale_difficulty(double base, int n_pairs);

struct TaskInstance {
  std::string task_id;
  TaskGroup group = TaskGroup::SM;
  std::string instruction;
  TaskParams params;
  GoalSpec goal;
  std::vector<Move> reference_moves;
  Feasibility feasibility_label = Feasibility::Feasible;
  FailureProfile failure;
  double labeled_difficulty = 1.0;
  double scaled_difficulty = 1.0;
  int n_pairs = 0;
  std::uint64_t goal_seed = 0;
};

class ScenarioIncompatible : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Throws ScenarioIncompatible("scenario incompatible: ...").
TaskInstance instantiate_task(const TaskDef& def, const SceneState& scene, std::uint64_t goal_seed);

/// Matches the instruction against every catalog task and resolves it
/// against the observation.
std::optional<Interpretation> interpret_instruction(const std::string& instruction, const Observation& observation);

/// Orders moves so that every move onto a moved base comes after the base's
/// own move (stable otherwise).
std::vector<Move> order_bottom_up(const std::vector<Move>& moves);

/// Goal poses implied by executing `moves` from `observation`.
GoalSpec goal_from_moves(const std::vector<Move>& moves, const Observation& observation);

struct EvaluationResult {
  bool pass = true;
  std::map<ObjectId, double> distances;
};

class EvaluationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Pass iff every constrained object is within delta of its goal (inclusive).
EvaluationResult evaluate(const SceneState& final_scene, const GoalSpec& goal, double delta = kSuccessDelta);

struct FeasibilityVerdict {
  bool pass = false;
  int redundant_actions = 0;
};

FeasibilityVerdict evaluate_feasibility(FinishStatus predicted, Feasibility label, int movement_calls = 0);

std::string_view to_string(Feasibility feasibility);

}  // namespace robopilot
