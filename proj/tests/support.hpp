// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures: hand-built scenes, a scripted reasoner and the random
// primitive-sequence property check.
#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "robopilot/primitives.hpp"
#include "robopilot/reasoner.hpp"
#include "robopilot/world.hpp"

namespace robopilot::testing {

inline RigidObject block(std::string_view color, double x, double y, double z = kTableBlockZ,
                         std::optional<ObjectId> on = std::nullopt) {
  return RigidObject{block_id(color), ObjectKind::Block, std::string(color), Vec3{x, y, z}, std::move(on)};
}

inline RigidObject bowl(std::string_view color, double x, double y) {
  return RigidObject{bowl_id(color), ObjectKind::Bowl, std::string(color), Vec3{x, y, 0.0}, std::nullopt};
}

inline SceneState make_scene(std::vector<RigidObject> objects, std::uint64_t seed = 1) {
  SceneState scene;
  scene.objects = std::move(objects);
  scene.seed = seed;
  scene.rng = dynamics_rng(seed);
  return scene;
}

/// Replies from a queue (the last reply repeats) and records every request.
class ScriptedReasoner : public Reasoner {
public:
  using Responder = std::function<std::string(const ReasonerRequest&)>;

  explicit ScriptedReasoner(std::vector<std::string> replies) : replies_(replies.begin(), replies.end()) {}
  explicit ScriptedReasoner(Responder responder) : responder_(std::move(responder)) {}

  ReasonerResponse complete(const ReasonerRequest& request) override {
    requests.push_back(request);
    std::string text;
    if (responder_) {
      text = responder_(request);
    } else if (!replies_.empty()) {
      text = replies_.front();
      if (replies_.size() > 1) {
        replies_.pop_front();
      }
    }
    return ReasonerResponse{text, estimate_tokens(request.messages), estimate_tokens(text.size()), 0.0};
  }
  std::string name() const override { return "scripted"; }

  std::vector<ReasonerRequest> requests;

private:
  std::deque<std::string> replies_;
  Responder responder_;
};

// Independent check of physical consistency, written against the geometry
// rather than the simulator's own helpers.
inline std::optional<std::string> physically_consistent(const SceneState& scene, const WorldConfig& config) {
  for (const auto& o : scene.objects) {
    if (!o.supported_by) {
      const double z = o.kind == ObjectKind::Block ? kTableBlockZ : 0.0;
      if (std::abs(o.pose.z - z) > 1e-9) {
        return "table object at wrong height: " + o.id.str();
      }
      continue;
    }
    const RigidObject* base = scene.find(*o.supported_by);
    if (base == nullptr) {
      return "dangling support: " + o.id.str();
    }
    const double dx = o.pose.x - base->pose.x;
    const double dy = o.pose.y - base->pose.y;
    const double offset = std::sqrt(dx * dx + dy * dy);
    if (base->kind == ObjectKind::Bowl) {
      if (offset > kBowlRadius + 1e-9 || std::abs(o.pose.z - kBowlInteriorZ) > 1e-9) {
        return "bad bowl placement: " + o.id.str();
      }
    } else if (offset > config.stability_offset + 1e-9 || std::abs(o.pose.z - (base->pose.z + kBlockEdge)) > 1e-9) {
      return "unstable stack: " + o.id.str();
    }
  }
  // Acyclic: every support chain reaches the table.
  for (const auto& o : scene.objects) {
    const RigidObject* cur = &o;
    for (std::size_t hops = 0; cur->supported_by; ++hops) {
      if (hops > scene.objects.size()) {
        return "support cycle: " + o.id.str();
      }
      cur = scene.find(*cur->supported_by);
    }
  }
  return std::nullopt;
}

inline PrimitiveCall random_call(const SceneState& scene, SceneRng& rng) {
  const auto pick_object = [&]() -> ObjectId {
    if (rng.uniform() < 0.05) {
      return ObjectId("blk_ghost");
    }
    return scene.objects[rng.below(scene.objects.size())].id;
  };
  const double r = rng.uniform();
  if (r < 0.45) {
    // Mostly near other objects so stacking, bowls and collisions all occur.
    Vec3 p{rng.uniform(-0.27, 0.27), rng.uniform(-0.27, 0.27), rng.uniform(0.0, 0.2)};
    if (rng.uniform() < 0.6) {
      const auto& anchor = scene.objects[rng.below(scene.objects.size())].pose;
      p.x = anchor.x + rng.uniform(-0.03, 0.03);
      p.y = anchor.y + rng.uniform(-0.03, 0.03);
    }
    return make_pick_place_at(pick_object(), p);
  }
  if (r < 0.9) {
    return make_pick_place_on(pick_object(), pick_object());
  }
  return make_get_observation();
}

/// Runs `steps` random (often invalid) calls from a spawned scene and checks
/// object count, the empty gripper and physical consistency after each one.
inline std::optional<std::string> run_random_sequence(const WorldConfig& config, std::uint64_t seq, int steps) {
  auto scene = spawn_scene(config, 2 + static_cast<int>(seq % 3), seq);
  SceneRng rng(SceneRng::derive(seq, 77));
  const auto count = scene.objects.size();
  for (int step = 0; step < steps; ++step) {
    const auto call = random_call(scene, rng);
    if (validate_call(call, scene, config).valid) {
      execute_call(call, scene, config);
    }
    if (scene.objects.size() != count) {
      return "object count changed";
    }
    if (scene.held) {
      return "gripper left holding " + scene.held->str();
    }
    if (auto bad = physically_consistent(scene, config)) {
      return bad;
    }
    if (auto bad = check_invariants(scene, config)) {
      return bad;
    }
  }
  return std::nullopt;
}

}  // namespace robopilot::testing
