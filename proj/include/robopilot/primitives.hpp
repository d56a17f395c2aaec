// SPDX-License-Identifier: Apache-2.0
//
// Action-primitive catalog and the JSON call protocol spoken by reasoners:
//
//   {"primitive": "<name>", "args": {...}}
//
// Calls may arrive wrapped in prose or code fences; the first JSON object
// carrying a "primitive" key is taken.
#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "robopilot/world.hpp"

namespace robopilot {

enum class PrimitiveCategory { Perception, Execution, Control };
enum class ArgType { ObjectRef, Position, Status, Text };

enum class FinishStatus { Success, Failure, Infeasible };

std::string_view to_string(FinishStatus status);
std::optional<FinishStatus> parse_finish_status(std::string_view text);

struct ArgSpec {
  std::string name;
  ArgType type;
};

struct PrimitiveSpec {
  std::string name;
  PrimitiveCategory category;
  std::vector<ArgSpec> params;
  std::string doc;
};

/// get_observation, pick_place_at, pick_place_on, finish.
const std::vector<PrimitiveSpec>& primitive_catalog();
const PrimitiveSpec* find_primitive(std::string_view name);

/// Human-readable catalog listing for prompts.
std::string primitive_docs();

inline constexpr std::string_view kGetObservation = "get_observation";
inline constexpr std::string_view kPickPlaceAt = "pick_place_at";
inline constexpr std::string_view kPickPlaceOn = "pick_place_on";
inline constexpr std::string_view kFinish = "finish";

using ArgValue = std::variant<ObjectId, Vec3, FinishStatus, std::string>;

struct PrimitiveCall {
  std::string primitive;
  std::map<std::string, ArgValue> args;
  std::string raw_text;

  bool is_movement() const { return primitive == kPickPlaceAt || primitive == kPickPlaceOn; }

  const ObjectId& object_arg(const std::string& name) const { return std::get<ObjectId>(args.at(name)); }
  const Vec3& position_arg(const std::string& name) const { return std::get<Vec3>(args.at(name)); }
  FinishStatus status_arg(const std::string& name) const { return std::get<FinishStatus>(args.at(name)); }
  const std::string& text_arg(const std::string& name) const { return std::get<std::string>(args.at(name)); }

  /// Object being moved by a movement primitive.
  const ObjectId& moved_object() const { return object_arg("object"); }

  /// Compares primitive and args; raw_text is provenance, not identity.
  bool same_call(const PrimitiveCall& other) const { return primitive == other.primitive && args == other.args; }
};

class CallParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Throws CallParseError: "no call found", "unknown primitive <name>",
/// "bad arguments: <detail>".
PrimitiveCall parse_call(std::string_view text);

/// Canonical wire form of the call.
std::string serialize_call(const PrimitiveCall& call);

PrimitiveCall make_pick_place_at(const ObjectId& object, const Vec3& position);
PrimitiveCall make_pick_place_on(const ObjectId& object, const ObjectId& base);
PrimitiveCall make_get_observation();
PrimitiveCall make_finish(FinishStatus status, std::string message);

struct ValidationVerdict {
  bool valid = true;
  std::string reason;

  static ValidationVerdict accept() { return {}; }
  static ValidationVerdict reject(std::string why) { return {false, std::move(why)}; }
};

/// Pure check of a parsed call against the current scene. Rejection reasons
/// always name the offending argument.
ValidationVerdict validate_call(const PrimitiveCall& call, const SceneState& scene, const WorldConfig& config);

/// Where a movement call should leave the object if nothing goes wrong.
/// Returns nullopt when the call cannot be previewed (invalid call).
std::optional<Vec3> preview_target(const PrimitiveCall& call, const SceneState& scene, const WorldConfig& config);

struct FinishSignal {
  FinishStatus status = FinishStatus::Success;
  std::string message;
};

struct CallOutcome {
  ExecutionOutcome execution;
  std::optional<Observation> observation;
  std::optional<FinishSignal> finish;
};

/// Executes a validated call. World errors become failed outcomes.
CallOutcome execute_call(const PrimitiveCall& call, SceneState& scene, const WorldConfig& config, double observation_noise = 0.0);

}  // namespace robopilot
