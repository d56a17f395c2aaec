// SPDX-License-Identifier: Apache-2.0
//
// Kinematic tabletop simulator: blocks and bowls on a square table, an
// offset-threshold stacking model and seeded drop failures.
#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "robopilot/rng.hpp"

namespace robopilot {

inline constexpr double kBlockEdge = 0.05;
inline constexpr double kBlockHalfEdge = kBlockEdge / 2.0;
inline constexpr double kBowlRadius = 0.05;
inline constexpr double kBowlInteriorZ = 0.01;
inline constexpr double kTableBlockZ = kBlockHalfEdge;
/// Minimum center distance between two objects resting on the table.
inline constexpr double kFootprintClearance = 0.06;
inline constexpr int kMaxSpawnAttempts = 10000;
/// Slack for inclusive distance thresholds, absorbing rounding in poses.
inline constexpr double kDistanceEpsilon = 1e-9;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

double distance(const Vec3& a, const Vec3& b);
double horizontal_distance(const Vec3& a, const Vec3& b);

class ObjectId {
public:
  ObjectId() = default;
  explicit ObjectId(std::string id) : id_(std::move(id)) {}

  const std::string& str() const { return id_; }
  bool empty() const { return id_.empty(); }

  friend auto operator<=>(const ObjectId&, const ObjectId&) = default;

private:
  std::string id_;
};

enum class ObjectKind { Block, Bowl };

std::string_view to_string(ObjectKind kind);
std::optional<ObjectKind> parse_object_kind(std::string_view text);

/// The fixed 8-color palette, in "rainbow" order.
const std::vector<std::string>& palette();
bool is_palette_color(std::string_view color);
int palette_index(std::string_view color);

ObjectId block_id(std::string_view color);
ObjectId bowl_id(std::string_view color);

struct RigidObject {
  ObjectId id;
  ObjectKind kind = ObjectKind::Block;
  std::string color;
  Vec3 pose;
  /// nullopt means the object rests on the table.
  std::optional<ObjectId> supported_by;

  friend bool operator==(const RigidObject&, const RigidObject&) = default;
};

struct Workspace {
  double x_min = -0.25;
  double x_max = 0.25;
  double y_min = -0.25;
  double y_max = 0.25;

  bool contains(const Vec3& p) const { return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max; }
  Vec3 clip(Vec3 p) const;
};

struct FailureProfile {
  double drop_probability = 0.0;
  double drop_scatter_sigma = 0.05;
};

struct WorldConfig {
  Workspace workspace;
  double stability_offset = 0.015;
  double spawn_min_separation = 0.12;
  /// Spawned centers keep this margin from the workspace edge.
  double spawn_edge_margin = 0.03;
  FailureProfile failure;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when the config breaks an invariant.
  void validate() const;
};

class WorldError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct SceneState {
  std::vector<RigidObject> objects;
  std::optional<ObjectId> held;
  std::uint64_t seed = 0;
  SceneRng rng;
  std::int64_t step_counter = 0;

  const RigidObject* find(const ObjectId& id) const;
  RigidObject* find(const ObjectId& id);
  /// Objects directly resting on `id`.
  std::vector<const RigidObject*> supported_on(const ObjectId& id) const;
  /// Whether any object of `kind` has `color`.
  bool has(ObjectKind kind, std::string_view color) const;

  friend bool operator==(const SceneState&, const SceneState&) = default;
};

struct ObservedObject {
  ObjectId id;
  ObjectKind kind = ObjectKind::Block;
  std::string color;
  Vec3 pose;

  friend bool operator==(const ObservedObject&, const ObservedObject&) = default;
};

struct Observation {
  std::vector<ObservedObject> objects;
  std::int64_t timestamp = 0;

  const ObservedObject* find(const ObjectId& id) const;
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct ExecutionOutcome {
  bool ok = true;
  std::string error;
  std::optional<Vec3> achieved;
  std::optional<Vec3> intended;
  bool dropped = false;

  static ExecutionOutcome failure(std::string message) {
    ExecutionOutcome out;
    out.ok = false;
    out.error = std::move(message);
    return out;
  }
};

struct SupportResolution {
  std::optional<ObjectId> supported_by;
  Vec3 settled;
};

SceneState spawn_scene(const WorldConfig& config, int n_pairs, std::uint64_t seed);

/// Fresh generator for drop failures of a scene with this seed.
SceneRng dynamics_rng(std::uint64_t scene_seed);

/// Symbolic observation; noise is drawn from a generator keyed on
/// (scene seed, step counter, noise_seed) and never touches the scene.
Observation observe(const SceneState& scene, double noise_sigma = 0.0, std::uint64_t noise_seed = 0);

ExecutionOutcome step_pick(SceneState& scene, const ObjectId& id);
ExecutionOutcome step_place(SceneState& scene, const WorldConfig& config, const Vec3& target);

/// Where an object released at `pose` comes to rest. The held object, if
/// any, is ignored.
SupportResolution resolve_support(const SceneState& scene, const WorldConfig& config, const Vec3& pose);

/// Topmost object of the column resting on `base` (or `base` itself).
const RigidObject* column_top(const SceneState& scene, const ObjectId& base);

/// Objects resting directly on the table, excluding the held object.
std::vector<const RigidObject*> table_roots(const SceneState& scene);

/// Checks the scene invariants; returns a description of the first violation.
std::optional<std::string> check_invariants(const SceneState& scene, const WorldConfig& config);

/// Fixed-width text table used in prompts and feedback (poses in mm precision).
std::string format_observation_table(const Observation& obs);

/// Parses every observation table embedded in `text`, in order of appearance.
std::vector<Observation> parse_observation_tables(std::string_view text);

}  // namespace robopilot

template <>
struct std::hash<robopilot::ObjectId> {
  std::size_t operator()(const robopilot::ObjectId& id) const noexcept { return std::hash<std::string>{}(id.str()); }
};
