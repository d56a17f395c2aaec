// SPDX-License-Identifier: Apache-2.0
#include "robopilot/serialization.hpp"

#include <fmt/format.h>

namespace robopilot {

namespace {

const Json& require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw SerializationError(fmt::format("missing field '{}'", key));
  }
  return j.at(key);
}

template <typename T>
T get_as(const Json& j, const char* key) {
  try {
    return require(j, key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw SerializationError(fmt::format("bad field '{}': {}", key, e.what()));
  }
}

Json feedback_to_json(const HistoryMessage& m) {
  Json j;
  j["role"] = to_string(m.role);
  j["content"] = m.content;
  j["invocation_index"] = m.invocation_index;
  j["recovery"] = m.recovery;
  return j;
}

}  // namespace

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SerializationError(fmt::format("invalid JSON: {}", e.what()));
  }
}

Json to_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number()) {
    throw SerializationError("pose must be an array of three numbers");
  }
  return Vec3{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json scene_to_json(const SceneState& scene) {
  Json j;
  j["objects"] = Json::array();
  for (const auto& o : scene.objects) {
    Json oj;
    oj["id"] = o.id.str();
    oj["kind"] = to_string(o.kind);
    oj["color"] = o.color;
    oj["pose"] = to_json(o.pose);
    oj["supported_by"] = o.supported_by ? Json(o.supported_by->str()) : Json(nullptr);
    j["objects"].push_back(std::move(oj));
  }
  j["held"] = scene.held ? Json(scene.held->str()) : Json(nullptr);
  j["seed"] = scene.seed;
  j["rng_counter"] = scene.rng.counter();
  j["step_counter"] = scene.step_counter;
  return j;
}

SceneState scene_from_json(const Json& j) {
  SceneState scene;
  scene.seed = get_as<std::uint64_t>(j, "seed");
  const auto counter = j.contains("rng_counter") ? get_as<std::uint64_t>(j, "rng_counter") : 0;
  scene.rng = SceneRng(dynamics_rng(scene.seed).seed(), counter);
  scene.step_counter = j.contains("step_counter") ? get_as<std::int64_t>(j, "step_counter") : 0;
  const auto& objects = require(j, "objects");
  if (!objects.is_array()) {
    throw SerializationError("'objects' must be an array");
  }
  for (const auto& oj : objects) {
    RigidObject o;
    o.id = ObjectId(get_as<std::string>(oj, "id"));
    const auto kind = parse_object_kind(get_as<std::string>(oj, "kind"));
    if (!kind) {
      throw SerializationError(fmt::format("object {}: kind must be block or bowl", o.id.str()));
    }
    o.kind = *kind;
    o.color = get_as<std::string>(oj, "color");
    if (!is_palette_color(o.color)) {
      throw SerializationError(fmt::format("object {}: unknown color '{}'", o.id.str(), o.color));
    }
    o.pose = vec3_from_json(require(oj, "pose"));
    if (oj.contains("supported_by") && !oj["supported_by"].is_null()) {
      o.supported_by = ObjectId(get_as<std::string>(oj, "supported_by"));
    }
    if (scene.find(o.id) != nullptr) {
      throw SerializationError(fmt::format("duplicate object id {}", o.id.str()));
    }
    scene.objects.push_back(std::move(o));
  }
  if (j.contains("held") && !j["held"].is_null()) {
    scene.held = ObjectId(get_as<std::string>(j, "held"));
  }
  return scene;
}

Json call_to_json(const PrimitiveCall& call) { return Json::parse(serialize_call(call)); }

PrimitiveCall call_from_json(const Json& j) {
  try {
    return parse_call(j.dump());
  } catch (const CallParseError& e) {
    throw SerializationError(e.what());
  }
}

Json outcome_to_json(const CallOutcome& outcome) {
  Json j;
  const auto& e = outcome.execution;
  j["ok"] = e.ok;
  j["error"] = e.error.empty() ? Json(nullptr) : Json(e.error);
  j["achieved"] = e.achieved ? to_json(*e.achieved) : Json(nullptr);
  j["intended"] = e.intended ? to_json(*e.intended) : Json(nullptr);
  j["dropped"] = e.dropped;
  if (outcome.finish) {
    j["finish"] = {{"status", to_string(outcome.finish->status)}, {"message", outcome.finish->message}};
  }
  if (outcome.observation) {
    j["observation_objects"] = outcome.observation->objects.size();
  }
  return j;
}

Json step_to_json(const PlanStep& step) {
  Json j;
  j["index"] = step.index;
  j["intent"] = step.intent ? Json(*step.intent) : Json(nullptr);
  j["call"] = step.call ? call_to_json(*step.call) : Json(nullptr);
  j["outcome"] = step.outcome ? outcome_to_json(*step.outcome) : Json(nullptr);
  j["feedback"] = step.feedback ? feedback_to_json(*step.feedback) : Json(nullptr);
  j["superseded"] = step.superseded;
  j["invocation_index"] = step.invocation_index;
  j["raw_text"] = step.raw_text;
  if (step.parse_error) {
    j["parse_error"] = *step.parse_error;
  }
  if (step.verdict) {
    j["verdict"] = step.verdict->valid ? Json("valid") : Json("rejected: " + step.verdict->reason);
  }
  if (step.post_check) {
    j["post_check"] = {{"deviated", step.post_check->deviated}, {"distance", step.post_check->distance}};
  }
  return j;
}

std::string trace_jsonl(const PlanActionMemory& memory) {
  std::string out;
  for (const auto& s : memory.steps()) {
    out += step_to_json(s).dump();
    out += '\n';
  }
  return out;
}

Json world_config_to_json(const WorldConfig& c) {
  Json j;
  j["workspace"] = {c.workspace.x_min, c.workspace.x_max, c.workspace.y_min, c.workspace.y_max};
  j["stability_offset"] = c.stability_offset;
  j["spawn_min_separation"] = c.spawn_min_separation;
  j["spawn_edge_margin"] = c.spawn_edge_margin;
  j["drop_probability"] = c.failure.drop_probability;
  j["drop_scatter_sigma"] = c.failure.drop_scatter_sigma;
  j["seed"] = c.seed;
  return j;
}

WorldConfig world_config_from_json(const Json& j) {
  WorldConfig c;
  if (j.contains("workspace")) {
    const auto& w = j["workspace"];
    if (!w.is_array() || w.size() != 4) {
      throw SerializationError("workspace must be [x_min, x_max, y_min, y_max]");
    }
    c.workspace = Workspace{w[0].get<double>(), w[1].get<double>(), w[2].get<double>(), w[3].get<double>()};
  }
  if (j.contains("stability_offset")) {
    c.stability_offset = get_as<double>(j, "stability_offset");
  }
  if (j.contains("spawn_min_separation")) {
    c.spawn_min_separation = get_as<double>(j, "spawn_min_separation");
  }
  if (j.contains("spawn_edge_margin")) {
    c.spawn_edge_margin = get_as<double>(j, "spawn_edge_margin");
  }
  if (j.contains("drop_probability")) {
    c.failure.drop_probability = get_as<double>(j, "drop_probability");
  }
  if (j.contains("drop_scatter_sigma")) {
    c.failure.drop_scatter_sigma = get_as<double>(j, "drop_scatter_sigma");
  }
  if (j.contains("seed")) {
    c.seed = get_as<std::uint64_t>(j, "seed");
  }
  return c;
}

Json agent_config_to_json(const AgentConfig& c) {
  Json j;
  j["budget"] = c.budget;
  j["monitor_threshold"] = c.monitor_threshold;
  j["slow_threshold"] = c.slow_threshold;
  j["mode_override"] = to_string(c.mode_override);
  j["closed_loop"] = c.closed_loop;
  j["observation_noise"] = c.observation_noise;
  return j;
}

Json goal_to_json(const GoalSpec& goal) {
  Json j = Json::object();
  for (const auto& [id, p] : goal.targets) {
    j[id.str()] = to_json(p);
  }
  return j;
}

Json trial_to_json(const TrialRecord& r) {
  Json j;
  j["task_id"] = r.task_id;
  j["group"] = to_string(r.group);
  j["instruction"] = r.instruction;
  j["scenario_seed"] = r.scenario_seed;
  j["goal_seed"] = r.goal_seed;
  j["n_pairs"] = r.n_pairs;
  j["feasibility_label"] = to_string(r.feasibility_label);
  j["backend"] = r.backend;
  j["mode"] = {{"mode", to_string(r.mode.mode)},
               {"predicted_difficulty", r.mode.predicted_difficulty},
               {"overridden", r.mode.overridden},
               {"signals", r.mode.signals}};
  j["agent_config"] = agent_config_to_json(r.agent);
  j["world_config"] = world_config_to_json(r.world);
  j["goal"] = goal_to_json(r.goal);
  j["invocation_count"] = r.invocation_count;
  j["total_input_tokens"] = r.total_input_tokens;
  j["avg_input_tokens"] = r.avg_input_tokens();
  j["invocations"] = Json::array();
  for (const auto& inv : r.invocations) {
    j["invocations"].push_back({{"index", inv.index},
                                {"kind", to_string(inv.kind)},
                                {"input_tokens", inv.input_tokens},
                                {"output_tokens", inv.output_tokens},
                                {"latency_s", inv.latency_s}});
  }
  j["steps_completed"] = r.steps_completed;
  j["wall_time_s"] = r.wall_time_s;
  j["time_per_step_s"] = r.time_per_step_s;
  j["predicted_status"] = to_string(r.predicted_status);
  j["finish_message"] = r.finish_message;
  j["evaluation"] = r.evaluation_pass ? "pass" : "fail";
  Json dists = Json::object();
  for (const auto& [id, d] : r.goal_distances) {
    dists[id.str()] = d;
  }
  j["goal_distances"] = std::move(dists);
  j["redundant_actions"] = r.redundant_actions;
  j["recovery_events"] = answered_recovery_events(r);
  j["warnings"] = r.warnings;
  j["diagnostic"] = r.diagnostic ? Json(*r.diagnostic) : Json(nullptr);
  j["rationales"] = Json::array();
  for (const auto& ra : r.memory.rationales()) {
    j["rationales"].push_back({{"invocation_index", ra.invocation_index},
                               {"before_step", ra.before_step},
                               {"observation", ra.observation_text},
                               {"text", ra.text}});
  }
  j["trace"] = Json::array();
  for (const auto& s : r.memory.steps()) {
    j["trace"].push_back(step_to_json(s));
  }
  j["initial_scene"] = scene_to_json(r.initial_scene);
  j["final_scene"] = scene_to_json(r.final_scene);
  return j;
}

}  // namespace robopilot
