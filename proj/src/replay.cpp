// SPDX-License-Identifier: Apache-2.0
#include "robopilot/replay.hpp"

#include <fmt/format.h>

namespace robopilot {

namespace {

constexpr double kPoseTolerance = 1e-9;

bool same_pose(const Json& recorded, const std::optional<Vec3>& actual) {
  if (recorded.is_null() || !actual) {
    return recorded.is_null() && !actual;
  }
  return distance(vec3_from_json(recorded), *actual) <= kPoseTolerance;
}

ReplayResult diverged(int index, std::string message) {
  ReplayResult r;
  r.match = false;
  r.divergent_step = index;
  r.message = fmt::format("step {}: {}", index, message);
  return r;
}

}  // namespace

ReplayResult replay_trial(const Json& trial) {
  if (!trial.is_object() || !trial.contains("initial_scene") || !trial.contains("trace") || !trial.contains("final_scene")) {
    throw SerializationError("record lacks initial_scene, trace or final_scene");
  }
  SceneState scene = scene_from_json(trial["initial_scene"]);
  const WorldConfig world = trial.contains("world_config") ? world_config_from_json(trial["world_config"]) : WorldConfig{};
  double noise = 0.0;
  if (trial.contains("agent_config") && trial["agent_config"].contains("observation_noise")) {
    noise = trial["agent_config"]["observation_noise"].get<double>();
  }

  ReplayResult result;
  for (const auto& step : trial["trace"]) {
    const int index = step.value("index", 0);
    if (!step.contains("call") || step["call"].is_null()) {
      continue;  // unparseable reply, nothing was executed
    }
    PrimitiveCall call;
    try {
      call = call_from_json(step["call"]);
    } catch (const SerializationError& e) {
      return diverged(index, fmt::format("recorded call does not parse: {}", e.what()));
    }
    const auto verdict = validate_call(call, scene, world);
    const bool executed = step.contains("outcome") && !step["outcome"].is_null();
    if (!executed) {
      if (verdict.valid) {
        return diverged(index, "call was rejected in the record but validates on replay");
      }
      continue;
    }
    if (!verdict.valid) {
      return diverged(index, fmt::format("call is rejected on replay: {}", verdict.reason));
    }
    const auto outcome = execute_call(call, scene, world, noise);
    const auto& rec = step["outcome"];
    if (rec.value("ok", true) != outcome.execution.ok) {
      return diverged(index, "execution success differs");
    }
    if (!same_pose(rec.value("achieved", Json(nullptr)), outcome.execution.achieved)) {
      return diverged(index, "achieved pose differs");
    }
    if (rec.value("dropped", false) != outcome.execution.dropped) {
      return diverged(index, "drop event differs");
    }
    ++result.steps_replayed;
  }

  const Json replayed = scene_to_json(scene);
  const Json& recorded = trial["final_scene"];
  const auto& objs = recorded.at("objects");
  if (objs.size() != replayed["objects"].size()) {
    result.match = false;
    result.message = "final scene object count differs";
    return result;
  }
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const auto& a = objs[i];
    const auto& b = replayed["objects"][i];
    if (a.at("id") != b["id"] || a.at("supported_by") != b["supported_by"] ||
        distance(vec3_from_json(a.at("pose")), vec3_from_json(b["pose"])) > kPoseTolerance) {
      result.match = false;
      result.message = fmt::format("final scene differs at {}", b["id"].get<std::string>());
      return result;
    }
  }
  if (recorded.value("held", Json(nullptr)) != replayed["held"]) {
    result.match = false;
    result.message = "final held object differs";
    return result;
  }
  result.message = fmt::format("replayed {} executed steps; final scene matches", result.steps_replayed);
  return result;
}

}  // namespace robopilot
