// SPDX-License-Identifier: Apache-2.0
#include "robopilot/primitives.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <json.hpp>

namespace robopilot {

namespace {

using ordered_json = nlohmann::ordered_json;

// Returns the index one past the '}' closing the object opened at `open`, or
// npos when the braces never balance.
std::size_t balanced_end(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) {
        return i + 1;
      }
    }
  }
  return std::string_view::npos;
}

std::optional<ordered_json> first_call_object(std::string_view text) {
  for (std::size_t pos = text.find('{'); pos != std::string_view::npos; pos = text.find('{', pos + 1)) {
    const auto end = balanced_end(text, pos);
    if (end == std::string_view::npos) {
      continue;
    }
    auto parsed = ordered_json::parse(text.substr(pos, end - pos), nullptr, /*allow_exceptions=*/false);
    if (parsed.is_object() && parsed.contains("primitive")) {
      return parsed;
    }
  }
  return std::nullopt;
}

ArgValue convert_arg(const ArgSpec& spec, const ordered_json& value) {
  switch (spec.type) {
    case ArgType::ObjectRef:
      if (!value.is_string() || value.get<std::string>().empty()) {
        throw CallParseError(fmt::format("bad arguments: '{}' must be a non-empty object id string", spec.name));
      }
      return ObjectId(value.get<std::string>());
    case ArgType::Position: {
      if (!value.is_array() || value.size() != 3 ||
          !std::all_of(value.begin(), value.end(), [](const ordered_json& v) { return v.is_number(); })) {
        throw CallParseError(fmt::format("bad arguments: '{}' must be an array of 3 numbers [x, y, z]", spec.name));
      }
      return Vec3{value[0].get<double>(), value[1].get<double>(), value[2].get<double>()};
    }
    case ArgType::Status: {
      const auto status = value.is_string() ? parse_finish_status(value.get<std::string>()) : std::nullopt;
      if (!status) {
        throw CallParseError(fmt::format("bad arguments: '{}' must be one of \"success\", \"failure\", \"infeasible\"", spec.name));
      }
      return *status;
    }
    case ArgType::Text:
      if (!value.is_string()) {
        throw CallParseError(fmt::format("bad arguments: '{}' must be a string", spec.name));
      }
      return value.get<std::string>();
  }
  throw CallParseError("bad arguments: unsupported argument type");
}

ordered_json arg_to_json(const ArgValue& value) {
  return std::visit(
      [](const auto& v) -> ordered_json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ObjectId>) {
          return v.str();
        } else if constexpr (std::is_same_v<T, Vec3>) {
          return ordered_json::array({v.x, v.y, v.z});
        } else if constexpr (std::is_same_v<T, FinishStatus>) {
          return std::string(to_string(v));
        } else {
          return v;
        }
      },
      value);
}

std::string fmt_pos(const Vec3& p) { return fmt::format("({:.3f}, {:.3f}, {:.3f})", p.x, p.y, p.z); }

// Placement target for a movement call, evaluated on a scene where the moved
// object has already been picked up.
Vec3 raw_target(const PrimitiveCall& call, const SceneState& picked) {
  if (call.primitive == kPickPlaceAt) {
    return call.position_arg("position");
  }
  const RigidObject* base = picked.find(call.object_arg("base"));
  if (base->kind == ObjectKind::Bowl) {
    return Vec3{base->pose.x, base->pose.y, kBowlInteriorZ};
  }
  const RigidObject* top = column_top(picked, base->id);
  return Vec3{top->pose.x, top->pose.y, top->pose.z + kBlockEdge};
}

}  // namespace

std::string_view to_string(FinishStatus status) {
  switch (status) {
    case FinishStatus::Success:
      return "success";
    case FinishStatus::Failure:
      return "failure";
    case FinishStatus::Infeasible:
      return "infeasible";
  }
  return "failure";
}

std::optional<FinishStatus> parse_finish_status(std::string_view text) {
  if (text == "success") {
    return FinishStatus::Success;
  }
  if (text == "failure") {
    return FinishStatus::Failure;
  }
  if (text == "infeasible") {
    return FinishStatus::Infeasible;
  }
  return std::nullopt;
}

const std::vector<PrimitiveSpec>& primitive_catalog() {
  static const std::vector<PrimitiveSpec> catalog = {
      {std::string(kGetObservation), PrimitiveCategory::Perception, {},
       "Capture the current scene: id, kind, color and pose of every object."},
      {std::string(kPickPlaceAt), PrimitiveCategory::Execution,
       {{"object", ArgType::ObjectRef}, {"position", ArgType::Position}},
       "Pick up a block and place it at [x, y, z] in meters. The block settles into a bowl, onto a block, or on the table."},
      {std::string(kPickPlaceOn), PrimitiveCategory::Execution,
       {{"object", ArgType::ObjectRef}, {"base", ArgType::ObjectRef}},
       "Pick up a block and place it on top of another block's stack, or inside a bowl."},
      {std::string(kFinish), PrimitiveCategory::Control,
       {{"status", ArgType::Status}, {"message", ArgType::Text}},
       "End the task with status \"success\", \"failure\" or \"infeasible\" and a short message."},
  };
  return catalog;
}

const PrimitiveSpec* find_primitive(std::string_view name) {
  const auto& catalog = primitive_catalog();
  const auto it = std::find_if(catalog.begin(), catalog.end(), [&](const PrimitiveSpec& p) { return p.name == name; });
  return it == catalog.end() ? nullptr : &*it;
}

std::string primitive_docs() {
  static constexpr auto type_name = [](ArgType t) {
    switch (t) {
      case ArgType::ObjectRef:
        return "object_id";
      case ArgType::Position:
        return "[x, y, z]";
      case ArgType::Status:
        return "status";
      case ArgType::Text:
        return "string";
    }
    return "?";
  };
  std::string out;
  for (const auto& p : primitive_catalog()) {
    const char* category = p.category == PrimitiveCategory::Perception  ? "perception"
                           : p.category == PrimitiveCategory::Execution ? "execution"
                                                                        : "control";
    std::string params;
    for (const auto& a : p.params) {
      params += fmt::format("{}{}: {}", params.empty() ? "" : ", ", a.name, type_name(a.type));
    }
    out += fmt::format("- {}({}) [{}]: {}\n", p.name, params, category, p.doc);
  }
  return out;
}

PrimitiveCall parse_call(std::string_view text) {
  const auto obj = first_call_object(text);
  if (!obj) {
    throw CallParseError("no call found");
  }
  const auto& name_json = (*obj)["primitive"];
  if (!name_json.is_string()) {
    throw CallParseError("bad arguments: 'primitive' must be a string");
  }
  const std::string name = name_json.get<std::string>();
  const PrimitiveSpec* spec = find_primitive(name);
  if (spec == nullptr) {
    throw CallParseError(fmt::format("unknown primitive {}", name));
  }
  const auto args_it = obj->find("args");
  if (args_it == obj->end() || !args_it->is_object()) {
    throw CallParseError("bad arguments: 'args' must be an object");
  }

  PrimitiveCall call;
  call.primitive = name;
  call.raw_text = std::string(text);
  for (const auto& param : spec->params) {
    const auto it = args_it->find(param.name);
    if (it == args_it->end()) {
      throw CallParseError(fmt::format("bad arguments: missing '{}'", param.name));
    }
    call.args.emplace(param.name, convert_arg(param, *it));
  }
  for (const auto& [key, value] : args_it->items()) {
    const bool known = std::any_of(spec->params.begin(), spec->params.end(), [&](const ArgSpec& a) { return a.name == key; });
    if (!known) {
      throw CallParseError(fmt::format("bad arguments: unexpected '{}'", key));
    }
  }
  return call;
}

std::string serialize_call(const PrimitiveCall& call) {
  ordered_json args = ordered_json::object();
  if (const PrimitiveSpec* spec = find_primitive(call.primitive)) {
    for (const auto& param : spec->params) {
      if (const auto it = call.args.find(param.name); it != call.args.end()) {
        args[param.name] = arg_to_json(it->second);
      }
    }
  }
  ordered_json doc;
  doc["primitive"] = call.primitive;
  doc["args"] = std::move(args);
  return doc.dump();
}

namespace {

PrimitiveCall finalize(PrimitiveCall call) {
  call.raw_text = serialize_call(call);
  return call;
}

}  // namespace

PrimitiveCall make_pick_place_at(const ObjectId& object, const Vec3& position) {
  PrimitiveCall call;
  call.primitive = std::string(kPickPlaceAt);
  call.args.emplace("object", object);
  call.args.emplace("position", position);
  return finalize(std::move(call));
}

PrimitiveCall make_pick_place_on(const ObjectId& object, const ObjectId& base) {
  PrimitiveCall call;
  call.primitive = std::string(kPickPlaceOn);
  call.args.emplace("object", object);
  call.args.emplace("base", base);
  return finalize(std::move(call));
}

PrimitiveCall make_get_observation() {
  PrimitiveCall call;
  call.primitive = std::string(kGetObservation);
  return finalize(std::move(call));
}

PrimitiveCall make_finish(FinishStatus status, std::string message) {
  PrimitiveCall call;
  call.primitive = std::string(kFinish);
  call.args.emplace("status", status);
  call.args.emplace("message", std::move(message));
  return finalize(std::move(call));
}

ValidationVerdict validate_call(const PrimitiveCall& call, const SceneState& scene, const WorldConfig& config) {
  if (!call.is_movement()) {
    return ValidationVerdict::accept();
  }
  const ObjectId& object = call.moved_object();
  if (scene.held) {
    return ValidationVerdict::reject(fmt::format("gripper busy: holding {} while argument 'object' is {}", scene.held->str(), object.str()));
  }
  const RigidObject* moved = scene.find(object);
  if (moved == nullptr) {
    return ValidationVerdict::reject(fmt::format("unknown object {} in argument 'object'", object.str()));
  }
  if (moved->kind == ObjectKind::Bowl) {
    return ValidationVerdict::reject(fmt::format("object not graspable: {} in argument 'object' is a bowl", object.str()));
  }
  if (const auto above = scene.supported_on(object); !above.empty()) {
    return ValidationVerdict::reject(
        fmt::format("object buried: {} in argument 'object' supports {}", object.str(), above.front()->id.str()));
  }

  std::string target_arg = "position";
  if (call.primitive == kPickPlaceAt) {
    const Vec3& p = call.position_arg("position");
    if (!config.workspace.contains(p)) {
      return ValidationVerdict::reject(fmt::format("target out of workspace: argument 'position' {}", fmt_pos(p)));
    }
  } else {
    target_arg = "base";
    const ObjectId& base = call.object_arg("base");
    if (scene.find(base) == nullptr) {
      return ValidationVerdict::reject(fmt::format("unknown object {} in argument 'base'", base.str()));
    }
    if (base == object) {
      return ValidationVerdict::reject(fmt::format("argument 'base' must differ from argument 'object' ({})", object.str()));
    }
  }

  SceneState picked = scene;
  if (const auto pick = step_pick(picked, object); !pick.ok) {
    return ValidationVerdict::reject(fmt::format("{} (argument 'object')", pick.error));
  }
  const auto res = resolve_support(picked, config, raw_target(call, picked));
  if (res.supported_by) {
    const RigidObject* support = picked.find(*res.supported_by);
    if (support->kind == ObjectKind::Bowl) {
      if (const auto inside = picked.supported_on(support->id); !inside.empty()) {
        return ValidationVerdict::reject(fmt::format("bowl occupied: {} already contains {} (argument '{}')", support->id.str(),
                                                     inside.front()->id.str(), target_arg));
      }
    } else if (const auto above = picked.supported_on(support->id); !above.empty()) {
      // The in-range block is covered and the block above it is out of range.
      return ValidationVerdict::reject(
          fmt::format("target collides with {} at argument '{}' {}", above.front()->id.str(), target_arg, fmt_pos(res.settled)));
    }
  } else {
    for (const RigidObject* root : table_roots(picked)) {
      if (horizontal_distance(root->pose, res.settled) < kFootprintClearance) {
        return ValidationVerdict::reject(
            fmt::format("target collides with {} at argument '{}' {}", root->id.str(), target_arg, fmt_pos(res.settled)));
      }
    }
  }
  return ValidationVerdict::accept();
}

std::optional<Vec3> preview_target(const PrimitiveCall& call, const SceneState& scene, const WorldConfig& config) {
  if (!call.is_movement() || !validate_call(call, scene, config).valid) {
    return std::nullopt;
  }
  SceneState picked = scene;
  step_pick(picked, call.moved_object());
  return resolve_support(picked, config, raw_target(call, picked)).settled;
}

CallOutcome execute_call(const PrimitiveCall& call, SceneState& scene, const WorldConfig& config, double observation_noise) {
  CallOutcome out;
  if (call.primitive == kGetObservation) {
    out.observation = observe(scene, observation_noise);
    return out;
  }
  if (call.primitive == kFinish) {
    out.finish = FinishSignal{call.status_arg("status"), call.text_arg("message")};
    return out;
  }
  if (!call.is_movement()) {
    out.execution = ExecutionOutcome::failure(fmt::format("unknown primitive {}", call.primitive));
    return out;
  }

  // pick + place is one atomic step: any failure restores the scene.
  SceneState backup = scene;
  auto pick = step_pick(scene, call.moved_object());
  if (!pick.ok) {
    out.execution = std::move(pick);
    return out;
  }
  if (call.primitive == kPickPlaceOn && scene.find(call.object_arg("base")) == nullptr) {
    scene = std::move(backup);
    out.execution = ExecutionOutcome::failure(fmt::format("unknown object {}", call.object_arg("base").str()));
    return out;
  }
  const Vec3 target = raw_target(call, scene);
  const Vec3 intended = resolve_support(scene, config, target).settled;
  auto place = step_place(scene, config, target);
  if (!place.ok) {
    scene = std::move(backup);
    out.execution = std::move(place);
    return out;
  }
  place.intended = intended;
  out.execution = std::move(place);
  return out;
}

}  // namespace robopilot
