// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "robopilot/bench.hpp"
#include "robopilot/replay.hpp"
#include "support.hpp"

using namespace robopilot;
using namespace robopilot::testing;

namespace {

TrialRecord er_trial(std::uint64_t seed) {
  WorldConfig world;
  world.failure = FailureProfile{0.5, 0.05};
  const auto scene = spawn_scene(world, 3, seed);
  world.seed = scene.seed;
  const auto inst = instantiate_task(*find_task("er_stack_recovery"), scene, seed + 1);
  OracleReasoner backend;
  Agent agent(backend);
  return agent.run_trial(inst, scene, world);
}

}  // namespace

TEST_CASE("scenes round-trip including the rng position") {
  WorldConfig world;
  world.failure.drop_probability = 0.5;
  auto scene = spawn_scene(world, 4, 8);
  for (int i = 0; i < 3; ++i) {
    execute_call(make_pick_place_at(scene.objects[0].id, Vec3{0.2, -0.2 + 0.1 * i, 0.1}), scene, world);
  }
  const auto back = scene_from_json(parse_json(scene_to_json(scene).dump()));
  CHECK(back == scene);
}

TEST_CASE("malformed scenes are rejected with readable errors") {
  const auto bad = [](const std::string& text) {
    try {
      scene_from_json(parse_json(text));
    } catch (const SerializationError& e) {
      return std::string(e.what());
    }
    return std::string("parsed");
  };
  CHECK(bad("{").find("invalid JSON") == 0);
  CHECK(bad(R"({"objects": []})").find("missing field 'seed'") != std::string::npos);
  CHECK(bad(R"({"seed": 1, "objects": [{"id": "a", "kind": "cube", "color": "red", "pose": [0,0,0]}]})").find("kind") !=
        std::string::npos);
  CHECK(bad(R"({"seed": 1, "objects": [{"id": "a", "kind": "block", "color": "mauve", "pose": [0,0,0]}]})").find("mauve") !=
        std::string::npos);
  CHECK(bad(R"({"seed": 1, "objects": [{"id": "a", "kind": "block", "color": "red", "pose": [0,0]}]})").find("pose") !=
        std::string::npos);
}

TEST_CASE("trial records carry the full trace and config") {
  const auto rec = er_trial(3);
  const auto j = trial_to_json(rec);
  for (const char* key : {"task_id", "instruction", "mode", "agent_config", "world_config", "goal", "invocations", "rationales", "trace",
                          "initial_scene", "final_scene", "evaluation", "recovery_events"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["trace"].size() == rec.memory.size());
  CHECK(j["invocation_count"] == rec.invocation_count);
  const auto first = j["trace"][0];
  for (const char* key : {"index", "intent", "call", "outcome", "feedback", "superseded"}) {
    CHECK(first.contains(key));
  }
  const auto lines = trace_jsonl(rec.memory);
  CHECK(static_cast<std::size_t>(std::count(lines.begin(), lines.end(), '\n')) == rec.memory.size());
}

TEST_CASE("recorded trials replay exactly") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto rec = er_trial(seed);
    const auto result = replay_trial(parse_json(trial_to_json(rec).dump()));
    CHECK_MESSAGE(result.match, result.message);
    CHECK(result.steps_replayed > 0);
  }
}

TEST_CASE("tampered trials diverge at the edited step") {
  const auto rec = er_trial(4);
  auto j = trial_to_json(rec);
  int target = -1;
  for (std::size_t i = 0; i < j["trace"].size(); ++i) {
    if (!j["trace"][i]["outcome"].is_null() && !j["trace"][i]["outcome"]["achieved"].is_null()) {
      target = static_cast<int>(i);
      break;
    }
  }
  REQUIRE(target >= 0);
  j["trace"][static_cast<std::size_t>(target)]["outcome"]["achieved"][0] = 0.2345;
  const auto result = replay_trial(j);
  CHECK_FALSE(result.match);
  REQUIRE(result.divergent_step);
  CHECK(*result.divergent_step == target);

  auto k = trial_to_json(rec);
  k["final_scene"]["objects"][0]["pose"][1] = -0.2;
  const auto fin = replay_trial(k);
  CHECK_FALSE(fin.match);
  CHECK_FALSE(fin.divergent_step);

  auto m = trial_to_json(rec);
  m.erase("initial_scene");
  CHECK_THROWS_AS(replay_trial(m), SerializationError);
}

TEST_CASE("serialized records never contain credentials") {
  ::setenv("REASONER_API_KEY", "sk-should-never-appear", 1);
  const auto text = trial_to_json(er_trial(5)).dump();
  CHECK(text.find("sk-should-never-appear") == std::string::npos);
  ::unsetenv("REASONER_API_KEY");
}
