// SPDX-License-Identifier: Apache-2.0
//
// JSON forms of scenes, calls, trace steps and trial records. Key order is
// fixed so output bytes are stable.
#pragma once

#include <json.hpp>
#include <stdexcept>
#include <string>

#include "robopilot/agent.hpp"

namespace robopilot {

using Json = nlohmann::ordered_json;

class SerializationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

Json to_json(const Vec3& v);
Vec3 vec3_from_json(const Json& j);

/// {"objects": [{id, kind, color, pose, supported_by}], "held", "seed",
/// "rng_counter", "step_counter"}. The last two are optional on input.
Json scene_to_json(const SceneState& scene);
SceneState scene_from_json(const Json& j);

Json call_to_json(const PrimitiveCall& call);
PrimitiveCall call_from_json(const Json& j);

Json outcome_to_json(const CallOutcome& outcome);

/// {index, intent, call, outcome, feedback, superseded} plus bookkeeping.
Json step_to_json(const PlanStep& step);

/// One JSON line per plan step.
std::string trace_jsonl(const PlanActionMemory& memory);

Json world_config_to_json(const WorldConfig& config);
WorldConfig world_config_from_json(const Json& j);

Json agent_config_to_json(const AgentConfig& config);

Json goal_to_json(const GoalSpec& goal);

Json trial_to_json(const TrialRecord& record);

/// Throws SerializationError with a readable message.
Json parse_json(const std::string& text);

}  // namespace robopilot
