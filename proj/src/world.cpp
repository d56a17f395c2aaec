// SPDX-License-Identifier: Apache-2.0
#include "robopilot/world.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <unordered_set>

namespace robopilot {

namespace {

constexpr std::uint64_t kSpawnStream = 1;
constexpr std::uint64_t kDynamicsStream = 2;
constexpr std::uint64_t kNoiseStream = 3;
constexpr int kDropResampleAttempts = 64;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  line = trim(line);
  if (line.size() < 2 || line.front() != '|') {
    return cells;
  }
  line.remove_prefix(1);
  while (!line.empty()) {
    const auto bar = line.find('|');
    if (bar == std::string_view::npos) {
      break;
    }
    cells.push_back(trim(line.substr(0, bar)));
    line.remove_prefix(bar + 1);
  }
  return cells;
}

std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    return std::nullopt;
  }
  return v;
}

}  // namespace

double distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double horizontal_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

std::string_view to_string(ObjectKind kind) { return kind == ObjectKind::Block ? "block" : "bowl"; }

std::optional<ObjectKind> parse_object_kind(std::string_view text) {
  if (text == "block") {
    return ObjectKind::Block;
  }
  if (text == "bowl") {
    return ObjectKind::Bowl;
  }
  return std::nullopt;
}

const std::vector<std::string>& palette() {
  static const std::vector<std::string> colors = {"red", "orange", "yellow", "green", "blue", "purple", "pink", "cyan"};
  return colors;
}

bool is_palette_color(std::string_view color) { return palette_index(color) >= 0; }

int palette_index(std::string_view color) {
  const auto& colors = palette();
  const auto it = std::find(colors.begin(), colors.end(), color);
  return it == colors.end() ? -1 : static_cast<int>(it - colors.begin());
}

ObjectId block_id(std::string_view color) { return ObjectId(fmt::format("blk_{}", color)); }
ObjectId bowl_id(std::string_view color) { return ObjectId(fmt::format("bowl_{}", color)); }

Vec3 Workspace::clip(Vec3 p) const {
  p.x = std::clamp(p.x, x_min, x_max);
  p.y = std::clamp(p.y, y_min, y_max);
  return p;
}

void WorldConfig::validate() const {
  if (!(stability_offset >= 0.0 && stability_offset < kBlockHalfEdge)) {
    throw std::invalid_argument(fmt::format("stability_offset {} must be in [0, {})", stability_offset, kBlockHalfEdge));
  }
  if (!(failure.drop_probability >= 0.0 && failure.drop_probability <= 1.0)) {
    throw std::invalid_argument(fmt::format("drop_probability {} must be in [0, 1]", failure.drop_probability));
  }
  if (!(failure.drop_scatter_sigma >= 0.0)) {
    throw std::invalid_argument("drop_scatter_sigma must be non-negative");
  }
  if (!(workspace.x_min < workspace.x_max && workspace.y_min < workspace.y_max)) {
    throw std::invalid_argument("workspace must have positive extent");
  }
}

const RigidObject* SceneState::find(const ObjectId& id) const {
  const auto it = std::find_if(objects.begin(), objects.end(), [&](const RigidObject& o) { return o.id == id; });
  return it == objects.end() ? nullptr : &*it;
}

RigidObject* SceneState::find(const ObjectId& id) {
  const auto it = std::find_if(objects.begin(), objects.end(), [&](const RigidObject& o) { return o.id == id; });
  return it == objects.end() ? nullptr : &*it;
}

std::vector<const RigidObject*> SceneState::supported_on(const ObjectId& id) const {
  std::vector<const RigidObject*> out;
  for (const auto& o : objects) {
    if (o.supported_by && *o.supported_by == id) {
      out.push_back(&o);
    }
  }
  return out;
}

bool SceneState::has(ObjectKind kind, std::string_view color) const {
  return std::any_of(objects.begin(), objects.end(), [&](const RigidObject& o) { return o.kind == kind && o.color == color; });
}

const ObservedObject* Observation::find(const ObjectId& id) const {
  const auto it = std::find_if(objects.begin(), objects.end(), [&](const ObservedObject& o) { return o.id == id; });
  return it == objects.end() ? nullptr : &*it;
}

SceneRng dynamics_rng(std::uint64_t scene_seed) { return SceneRng(SceneRng::derive(scene_seed, kDynamicsStream)); }

SceneState spawn_scene(const WorldConfig& config, int n_pairs, std::uint64_t seed) {
  config.validate();
  if (n_pairs < 2 || n_pairs > 4) {
    throw WorldError(fmt::format("n_pairs must be in [2, 4], got {}", n_pairs));
  }
  SceneRng rng(SceneRng::derive(seed, kSpawnStream));

  // Colors without replacement (partial Fisher-Yates).
  std::vector<std::string> colors = palette();
  for (std::size_t i = 0; i < static_cast<std::size_t>(n_pairs); ++i) {
    const auto j = i + rng.below(colors.size() - i);
    std::swap(colors[i], colors[j]);
  }
  colors.resize(static_cast<std::size_t>(n_pairs));

  const auto& ws = config.workspace;
  const double margin = config.spawn_edge_margin;
  std::vector<Vec3> placed;
  int attempts = 0;
  const auto sample = [&](double z) {
    while (true) {
      if (++attempts > kMaxSpawnAttempts) {
        throw WorldError("workspace too crowded");
      }
      const Vec3 p{rng.uniform(ws.x_min + margin, ws.x_max - margin), rng.uniform(ws.y_min + margin, ws.y_max - margin), z};
      const bool clear = std::all_of(placed.begin(), placed.end(),
                                     [&](const Vec3& q) { return horizontal_distance(p, q) >= config.spawn_min_separation; });
      if (clear) {
        placed.push_back(p);
        return p;
      }
    }
  };

  SceneState scene;
  scene.seed = seed;
  scene.rng = dynamics_rng(seed);
  for (const auto& c : colors) {
    scene.objects.push_back(RigidObject{block_id(c), ObjectKind::Block, c, sample(kTableBlockZ), std::nullopt});
  }
  for (const auto& c : colors) {
    scene.objects.push_back(RigidObject{bowl_id(c), ObjectKind::Bowl, c, sample(0.0), std::nullopt});
  }
  return scene;
}

Observation observe(const SceneState& scene, double noise_sigma, std::uint64_t noise_seed) {
  Observation obs;
  obs.timestamp = scene.step_counter;
  SceneRng rng(SceneRng::derive(SceneRng::derive(scene.seed, kNoiseStream),
                                static_cast<std::uint64_t>(scene.step_counter) * 1000003ULL + noise_seed));
  for (const auto& o : scene.objects) {
    Vec3 p = o.pose;
    if (noise_sigma > 0.0) {
      p.x += noise_sigma * rng.normal();
      p.y += noise_sigma * rng.normal();
      p.z += noise_sigma * rng.normal();
    }
    obs.objects.push_back(ObservedObject{o.id, o.kind, o.color, p});
  }
  return obs;
}

ExecutionOutcome step_pick(SceneState& scene, const ObjectId& id) {
  if (scene.held) {
    return ExecutionOutcome::failure(fmt::format("already holding {}", scene.held->str()));
  }
  RigidObject* obj = scene.find(id);
  if (obj == nullptr) {
    return ExecutionOutcome::failure(fmt::format("unknown object {}", id.str()));
  }
  if (obj->kind == ObjectKind::Bowl) {
    return ExecutionOutcome::failure(fmt::format("object not graspable: {} is a bowl", id.str()));
  }
  if (const auto above = scene.supported_on(id); !above.empty()) {
    return ExecutionOutcome::failure(fmt::format("object buried: {} supports {}", id.str(), above.front()->id.str()));
  }
  obj->supported_by.reset();
  scene.held = id;
  ++scene.step_counter;
  ExecutionOutcome out;
  out.achieved = obj->pose;
  return out;
}

std::vector<const RigidObject*> table_roots(const SceneState& scene) {
  std::vector<const RigidObject*> out;
  for (const auto& o : scene.objects) {
    if (!o.supported_by && !(scene.held && *scene.held == o.id)) {
      out.push_back(&o);
    }
  }
  return out;
}

const RigidObject* column_top(const SceneState& scene, const ObjectId& base) {
  const RigidObject* top = scene.find(base);
  for (std::size_t hops = 0; top != nullptr && hops <= scene.objects.size(); ++hops) {
    const auto above = scene.supported_on(top->id);
    if (above.empty()) {
      break;
    }
    top = *std::max_element(above.begin(), above.end(), [](const RigidObject* a, const RigidObject* b) { return a->pose.z < b->pose.z; });
  }
  return top;
}

SupportResolution resolve_support(const SceneState& scene, const WorldConfig& config, const Vec3& pose) {
  const auto is_held = [&](const RigidObject& o) { return scene.held && *scene.held == o.id; };

  const RigidObject* bowl = nullptr;
  double bowl_dist = 0.0;
  for (const auto& o : scene.objects) {
    if (o.kind != ObjectKind::Bowl || is_held(o)) {
      continue;
    }
    const double d = horizontal_distance(o.pose, pose);
    if (d <= kBowlRadius + kDistanceEpsilon && (bowl == nullptr || d < bowl_dist)) {
      bowl = &o;
      bowl_dist = d;
    }
  }
  if (bowl != nullptr) {
    return {bowl->id, Vec3{pose.x, pose.y, kBowlInteriorZ}};
  }

  const RigidObject* tallest = nullptr;
  for (const auto& o : scene.objects) {
    if (o.kind != ObjectKind::Block || is_held(o)) {
      continue;
    }
    const bool within = horizontal_distance(o.pose, pose) <= config.stability_offset + kDistanceEpsilon;
    if (within && (tallest == nullptr || o.pose.z > tallest->pose.z)) {
      tallest = &o;
    }
  }
  if (tallest != nullptr) {
    return {tallest->id, Vec3{pose.x, pose.y, tallest->pose.z + kBlockEdge}};
  }
  return {std::nullopt, Vec3{pose.x, pose.y, kTableBlockZ}};
}

ExecutionOutcome step_place(SceneState& scene, const WorldConfig& config, const Vec3& target) {
  if (!scene.held) {
    return ExecutionOutcome::failure("nothing held");
  }
  if (!config.workspace.contains(target)) {
    return ExecutionOutcome::failure(fmt::format("target out of workspace: ({:.3f}, {:.3f}, {:.3f})", target.x, target.y, target.z));
  }
  RigidObject* obj = scene.find(*scene.held);
  if (obj == nullptr) {
    return ExecutionOutcome::failure(fmt::format("unknown object {}", scene.held->str()));
  }

  ExecutionOutcome out;
  const bool drop = scene.rng.uniform() < config.failure.drop_probability;
  if (drop) {
    // The object slips out of the gripper and lands on the table near the
    // target, clear of the target itself and of everything on the table.
    const auto roots = table_roots(scene);
    Vec3 landing = target;
    for (int attempt = 0; attempt < kDropResampleAttempts; ++attempt) {
      const double dx = config.failure.drop_scatter_sigma * scene.rng.normal();
      const double dy = config.failure.drop_scatter_sigma * scene.rng.normal();
      landing = config.workspace.clip(Vec3{target.x + dx, target.y + dy, kTableBlockZ});
      const bool clear = horizontal_distance(landing, target) >= kFootprintClearance &&
                         std::all_of(roots.begin(), roots.end(), [&](const RigidObject* r) {
                           return horizontal_distance(r->pose, landing) >= kFootprintClearance;
                         });
      if (clear) {
        break;
      }
    }
    obj->pose = landing;
    obj->supported_by.reset();
    out.dropped = true;
  } else {
    const auto res = resolve_support(scene, config, target);
    obj->pose = res.settled;
    obj->supported_by = res.supported_by;
  }
  scene.held.reset();
  ++scene.step_counter;
  out.achieved = obj->pose;
  return out;
}

std::optional<std::string> check_invariants(const SceneState& scene, const WorldConfig& config) {
  std::unordered_set<ObjectId> ids;
  for (const auto& o : scene.objects) {
    if (!ids.insert(o.id).second) {
      return fmt::format("duplicate id {}", o.id.str());
    }
    if (!std::isfinite(o.pose.x) || !std::isfinite(o.pose.y) || !std::isfinite(o.pose.z)) {
      return fmt::format("non-finite pose for {}", o.id.str());
    }
    if (!config.workspace.contains(o.pose)) {
      return fmt::format("{} outside workspace", o.id.str());
    }
  }
  for (const auto& o : scene.objects) {
    if (o.supported_by) {
      if (*o.supported_by == o.id) {
        return fmt::format("{} supports itself", o.id.str());
      }
      if (scene.find(*o.supported_by) == nullptr) {
        return fmt::format("{} supported by missing {}", o.id.str(), o.supported_by->str());
      }
    }
    // Following supported_by must reach the table within |objects| hops.
    const RigidObject* cur = &o;
    std::size_t hops = 0;
    while (cur->supported_by) {
      if (++hops > scene.objects.size()) {
        return fmt::format("support cycle through {}", o.id.str());
      }
      cur = scene.find(*cur->supported_by);
    }
  }
  if (scene.held) {
    if (scene.find(*scene.held) == nullptr) {
      return fmt::format("held object {} missing", scene.held->str());
    }
    if (!scene.supported_on(*scene.held).empty()) {
      return fmt::format("held object {} supports another object", scene.held->str());
    }
  }
  return std::nullopt;
}

std::string format_observation_table(const Observation& obs) {
  std::string out = fmt::format("| id | kind | color | x | y | z |  (step {})\n", obs.timestamp);
  for (const auto& o : obs.objects) {
    out += fmt::format("| {} | {} | {} | {:.3f} | {:.3f} | {:.3f} |\n", o.id.str(), to_string(o.kind), o.color, o.pose.x, o.pose.y,
                       o.pose.z);
  }
  return out;
}

std::vector<Observation> parse_observation_tables(std::string_view text) {
  std::vector<Observation> tables;
  std::optional<Observation> current;
  const auto flush = [&] {
    if (current) {
      tables.push_back(std::move(*current));
      current.reset();
    }
  };
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = nl == std::string_view::npos ? text : text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);

    const auto cells = split_cells(line);
    if (cells.size() == 6 && cells[0] == "id" && cells[1] == "kind") {
      flush();
      current.emplace();
      const auto step_pos = line.find("(step ");
      if (step_pos != std::string_view::npos) {
        auto rest = line.substr(step_pos + 6);
        std::int64_t step = 0;
        std::from_chars(rest.data(), rest.data() + rest.size(), step);
        current->timestamp = step;
      }
      continue;
    }
    if (current && cells.size() == 6) {
      const auto kind = parse_object_kind(cells[1]);
      const auto x = to_double(cells[3]);
      const auto y = to_double(cells[4]);
      const auto z = to_double(cells[5]);
      if (kind && x && y && z) {
        current->objects.push_back(ObservedObject{ObjectId(std::string(cells[0])), *kind, std::string(cells[2]), Vec3{*x, *y, *z}});
        continue;
      }
    }
    flush();
  }
  flush();
  return tables;
}

}  // namespace robopilot
