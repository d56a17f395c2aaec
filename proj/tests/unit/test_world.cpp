// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <set>

#include "robopilot/world.hpp"
#include "robopilot/primitives.hpp"
#include "support.hpp"

using namespace robopilot;
using namespace robopilot::testing;

namespace {

// Reference splitmix64 in its textbook form (state advanced before mixing).
struct ReferenceSplitMix {
  std::uint64_t state;
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

}  // namespace

TEST_CASE("rng matches the reference splitmix64 stream") {
  ReferenceSplitMix ref{0};
  CHECK(ref.next() == 0xe220a8397b1dcdafULL);
  CHECK(ref.next() == 0x6e789e6aa1b965f4ULL);

  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 0xdeadbeefULL}) {
    ReferenceSplitMix r{seed};
    r.next();
    SceneRng rng(seed);
    for (int i = 0; i < 100; ++i) {
      REQUIRE(rng.next_u64() == r.next());
    }
  }
}

TEST_CASE("rng state is exactly (seed, counter)") {
  SceneRng a(99);
  for (int i = 0; i < 17; ++i) {
    a.next_u64();
  }
  SceneRng b(99, 17);
  CHECK(a == b);
  CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng uniform and normal moments") {
  SceneRng rng(7);
  const int n = 200000;
  double su = 0.0;
  double sn = 0.0;
  double sn2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("spawned scenes respect pairing, separation and margins") {
  const WorldConfig config;
  for (int n = 2; n <= 4; ++n) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const auto scene = spawn_scene(config, n, seed);
      REQUIRE(scene.objects.size() == static_cast<std::size_t>(2 * n));
      std::set<std::string> block_colors;
      std::set<std::string> bowl_colors;
      for (const auto& o : scene.objects) {
        (o.kind == ObjectKind::Block ? block_colors : bowl_colors).insert(o.color);
        CHECK(std::abs(o.pose.x) <= 0.25 - config.spawn_edge_margin);
        CHECK(std::abs(o.pose.y) <= 0.25 - config.spawn_edge_margin);
        CHECK(o.pose.z == (o.kind == ObjectKind::Block ? kTableBlockZ : 0.0));
        CHECK_FALSE(o.supported_by);
      }
      CHECK(block_colors.size() == static_cast<std::size_t>(n));
      CHECK(block_colors == bowl_colors);
      for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        for (std::size_t j = i + 1; j < scene.objects.size(); ++j) {
          CHECK(horizontal_distance(scene.objects[i].pose, scene.objects[j].pose) >= config.spawn_min_separation);
        }
      }
      CHECK_FALSE(check_invariants(scene, config));
    }
  }
}

TEST_CASE("spawning is a pure function of the seed") {
  const WorldConfig config;
  CHECK(spawn_scene(config, 3, 5) == spawn_scene(config, 3, 5));
  CHECK_FALSE(spawn_scene(config, 3, 5) == spawn_scene(config, 3, 6));
  CHECK_THROWS_AS(spawn_scene(config, 1, 0), WorldError);
  CHECK_THROWS_AS(spawn_scene(config, 5, 0), WorldError);
}

TEST_CASE("stacking threshold is inclusive at the stability offset") {
  const WorldConfig config;
  const auto base_scene = make_scene({block("red", 0.0, 0.0), block("blue", 0.2, 0.2)});

  SUBCASE("offset 0.015 stacks") {
    const auto r = resolve_support(base_scene, config, Vec3{0.015, 0.0, 0.2});
    REQUIRE(r.supported_by);
    CHECK(*r.supported_by == block_id("red"));
    CHECK(r.settled.z == doctest::Approx(0.075));
  }
  SUBCASE("offset 0.0151 falls to the table") {
    const auto r = resolve_support(base_scene, config, Vec3{0.0151, 0.0, 0.2});
    CHECK_FALSE(r.supported_by);
    CHECK(r.settled.z == doctest::Approx(0.025));
  }
  SUBCASE("diagonal offset uses the horizontal norm") {
    const double d = 0.015 / std::sqrt(2.0);
    const auto r = resolve_support(base_scene, config, Vec3{d, d, 0.2});
    CHECK(r.supported_by);
  }
}

TEST_CASE("placing over a column lands on its top") {
  const WorldConfig config;
  auto scene = make_scene({block("red", 0.0, 0.0), block("green", 0.005, 0.0, 0.075, block_id("red")), block("blue", 0.2, 0.2)});
  const auto r = resolve_support(scene, config, Vec3{0.0, 0.0, 0.3});
  REQUIRE(r.supported_by);
  CHECK(*r.supported_by == block_id("green"));
  CHECK(r.settled.z == doctest::Approx(0.125));
  CHECK(column_top(scene, block_id("red"))->id == block_id("green"));
}

TEST_CASE("stacking is judged against the supporting block, not the column base") {
  const WorldConfig config;
  // Within range of red (0.013) but not of green on top of it (0.021).
  auto scene = make_scene({block("red", 0.0, 0.0), block("green", -0.005, 0.0074, 0.075, block_id("red"))});
  const Vec3 target{0.012, -0.0051, 0.2};
  const auto r = resolve_support(scene, config, target);
  REQUIRE(r.supported_by);
  CHECK(*r.supported_by == block_id("red"));
  scene.objects.push_back(block("blue", 0.2, 0.2));
  const auto verdict = validate_call(make_pick_place_at(block_id("blue"), target), scene, config);
  CHECK_FALSE(verdict.valid);
  CHECK(verdict.reason.find("collides with blk_green") != std::string::npos);
}

TEST_CASE("bowls catch blocks within their radius") {
  const WorldConfig config;
  const auto scene = make_scene({block("red", 0.0, 0.0), bowl("red", 0.15, 0.15)});
  const auto inside = resolve_support(scene, config, Vec3{0.15 + 0.05, 0.15, 0.1});
  REQUIRE(inside.supported_by);
  CHECK(*inside.supported_by == bowl_id("red"));
  CHECK(inside.settled.z == doctest::Approx(kBowlInteriorZ));
  const auto outside = resolve_support(scene, config, Vec3{0.15 + 0.0501, 0.15, 0.1});
  CHECK_FALSE(outside.supported_by);
}

TEST_CASE("pick rejects bowls, unknown and buried objects") {
  auto scene = make_scene({block("red", 0.0, 0.0), block("green", 0.0, 0.0, 0.075, block_id("red")), bowl("red", 0.15, 0.15)});
  CHECK_FALSE(step_pick(scene, bowl_id("red")).ok);
  CHECK_FALSE(step_pick(scene, ObjectId("blk_nope")).ok);
  const auto buried = step_pick(scene, block_id("red"));
  CHECK_FALSE(buried.ok);
  CHECK(buried.error.find("buried") != std::string::npos);
  CHECK(step_pick(scene, block_id("green")).ok);
  CHECK_FALSE(step_pick(scene, block_id("red")).ok);
}

TEST_CASE("drops land clear of the target and of table objects") {
  WorldConfig config;
  config.failure.drop_probability = 1.0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    auto scene = make_scene({block("red", -0.1, -0.1), block("green", 0.1, 0.1), bowl("blue", 0.0, 0.15)}, seed);
    REQUIRE(step_pick(scene, block_id("red")).ok);
    const Vec3 target{0.0, 0.0, 0.1};
    const auto out = step_place(scene, config, target);
    REQUIRE(out.ok);
    CHECK(out.dropped);
    const auto* red = scene.find(block_id("red"));
    CHECK_FALSE(red->supported_by);
    CHECK(red->pose.z == doctest::Approx(kTableBlockZ));
    CHECK(horizontal_distance(red->pose, target) >= kFootprintClearance);
    CHECK(horizontal_distance(red->pose, scene.find(block_id("green"))->pose) >= kFootprintClearance);
    CHECK(horizontal_distance(red->pose, scene.find(bowl_id("blue"))->pose) >= kFootprintClearance);
    CHECK(config.workspace.contains(red->pose));
  }
}

TEST_CASE("drops are reproducible from the scene rng") {
  WorldConfig config;
  config.failure.drop_probability = 0.5;
  const auto run = [&](std::uint64_t seed) {
    auto scene = make_scene({block("red", -0.1, -0.1), block("green", 0.1, 0.1)}, seed);
    std::vector<Vec3> poses;
    for (int i = 0; i < 10; ++i) {
      step_pick(scene, block_id("red"));
      step_place(scene, config, Vec3{-0.1, -0.1 + 0.01 * (i % 2), 0.1});
      poses.push_back(scene.find(block_id("red"))->pose);
    }
    return poses;
  };
  CHECK(run(3) == run(3));
}

TEST_CASE("observation noise never touches the scene") {
  const auto scene = spawn_scene(WorldConfig{}, 3, 11);
  const auto copy = scene;
  const auto a = observe(scene, 0.01, 1);
  const auto b = observe(scene, 0.01, 1);
  CHECK(a == b);
  CHECK(scene == copy);
  CHECK_FALSE(observe(scene, 0.01, 2) == a);
  const auto clean = observe(scene);
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    CHECK(clean.objects[i].pose == scene.objects[i].pose);
  }
}

TEST_CASE("observation tables round-trip at millimetre precision") {
  const auto scene = spawn_scene(WorldConfig{}, 4, 21);
  const auto obs = observe(scene);
  const std::string text = "prefix\n" + format_observation_table(obs) + "\nsuffix\n" + format_observation_table(obs);
  const auto parsed = parse_observation_tables(text);
  REQUIRE(parsed.size() == 2);
  REQUIRE(parsed[0].objects.size() == obs.objects.size());
  for (std::size_t i = 0; i < obs.objects.size(); ++i) {
    CHECK(parsed[0].objects[i].id == obs.objects[i].id);
    CHECK(parsed[0].objects[i].kind == obs.objects[i].kind);
    CHECK(std::abs(parsed[0].objects[i].pose.x - obs.objects[i].pose.x) <= 0.0005 + 1e-12);
    CHECK(std::abs(parsed[0].objects[i].pose.y - obs.objects[i].pose.y) <= 0.0005 + 1e-12);
  }
}

TEST_CASE("invariant checker flags cycles and dangling supports") {
  const WorldConfig config;
  auto scene = make_scene({block("red", 0.0, 0.0, 0.075, block_id("green")), block("green", 0.0, 0.0, 0.125, block_id("red"))});
  CHECK(check_invariants(scene, config));
  scene.objects[1].supported_by.reset();
  CHECK_FALSE(check_invariants(scene, config));
  scene.objects[0].supported_by = ObjectId("blk_ghost");
  CHECK(check_invariants(scene, config));
  scene.objects[0].supported_by.reset();
  scene.objects[0].pose.x = 0.3;
  CHECK(check_invariants(scene, config));
}

TEST_CASE("world config validation") {
  WorldConfig config;
  config.stability_offset = 0.03;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = WorldConfig{};
  config.failure.drop_probability = 1.5;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}
