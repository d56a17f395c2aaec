// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <set>
#include <sstream>

#include "robopilot/bench.hpp"

using namespace robopilot;

namespace {

BackendFactory oracle_factory() {
  return [] { return make_backend(BackendSpec{}); };
}

SuiteConfig small_config() {
  SuiteConfig c;
  c.suite = Suite::All;
  c.scenarios = 3;
  c.goals_per_scenario = 2;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("scenarios are seeded and span two to four pairs") {
  const auto a = generate_scenarios(42, 200);
  const auto b = generate_scenarios(42, 200);
  std::set<int> sizes;
  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].seed == b[i].seed);
    CHECK(a[i].n_pairs == b[i].n_pairs);
    CHECK(a[i].index == static_cast<int>(i));
    sizes.insert(a[i].n_pairs);
    seeds.insert(a[i].seed);
  }
  CHECK(sizes == std::set<int>{2, 3, 4});
  CHECK(seeds.size() == a.size());
  CHECK(generate_scenarios(43, 5)[0].seed != a[0].seed);
  // A prefix does not depend on the count.
  const auto prefix = generate_scenarios(42, 10);
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    CHECK(prefix[i].seed == a[i].seed);
    CHECK(prefix[i].n_pairs == a[i].n_pairs);
  }
  CHECK_THROWS_AS(generate_scenarios(1, 0), std::invalid_argument);
}

TEST_CASE("goal seeds separate tasks and goal indices") {
  std::set<std::uint64_t> seeds;
  for (const auto& def : build_catalog()) {
    for (int g = 0; g < 5; ++g) {
      seeds.insert(derive_goal_seed(7, def.id, g));
    }
  }
  CHECK(seeds.size() == 21 * 5);
}

TEST_CASE("suites partition the catalog") {
  CHECK(suite_tasks(Suite::Canonical).size() + suite_tasks(Suite::Robustness).size() == 21);
  CHECK(suite_tasks(Suite::All).size() == 21);
  for (const auto* t : suite_tasks(Suite::Canonical)) {
    CHECK(is_canonical(t->group));
  }
  CHECK(parse_suite("robustness") == Suite::Robustness);
  CHECK_FALSE(parse_suite("everything"));
}

TEST_CASE("suite config JSON round-trips and rejects unknown keys") {
  auto c = small_config();
  c.agent.mode_override = ModeOverride::Fast;
  c.drop_probability = 0.3;
  c.tasks = {"sm_block_in_bowl"};
  const auto back = SuiteConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());

  CHECK_THROWS_AS(SuiteConfig::from_json(parse_json(R"({"suite": "all", "api_key": "x"})")), std::invalid_argument);
  CHECK_THROWS_AS(SuiteConfig::from_json(parse_json(R"({"overrides": {"temperature": 1}})")), std::invalid_argument);
  CHECK_THROWS_AS(SuiteConfig::from_json(parse_json(R"({"budget": 0})")), std::invalid_argument);
  CHECK_THROWS_AS(SuiteConfig::from_json(parse_json(R"({"overrides": {"drop_probability": 2}})")), std::invalid_argument);
  CHECK_THROWS_AS(SuiteConfig::from_json(parse_json(R"({"overrides": {"tasks": ["nope"]}})")), std::invalid_argument);
  CHECK_THROWS_AS(SuiteConfig::from_json(parse_json(R"({"master_seed": "abc"})")), std::invalid_argument);
}

TEST_CASE("suite results are independent of parallelism") {
  auto c = small_config();
  const auto serial = run_suite(c, oracle_factory());
  c.parallel = 4;
  const auto parallel = run_suite(c, oracle_factory());
  REQUIRE(serial.trials.size() == parallel.trials.size());
  for (std::size_t i = 0; i < serial.trials.size(); ++i) {
    auto a = trial_to_json(serial.trials[i]);
    auto b = trial_to_json(parallel.trials[i]);
    for (auto* j : {&a, &b}) {
      j->erase("wall_time_s");
      j->erase("time_per_step_s");
      (*j)["invocations"] = nullptr;
    }
    CHECK(a == b);
  }
  CHECK(serial.trials.size() + serial.skipped.size() == 21 * 3 * 2);
}

TEST_CASE("summary CSV has the fixed header and round-trips") {
  const auto report = run_suite(small_config(), oracle_factory());
  const auto csv = summary_csv(report.tasks);
  CHECK(csv.rfind(std::string(kSummaryHeader) + "\n", 0) == 0);
  const auto parsed = parse_summary_csv(csv);
  REQUIRE(parsed.size() == report.tasks.size());
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    CHECK(parsed[i].task_id == report.tasks[i].task_id);
    CHECK(parsed[i].trials == report.tasks[i].trials);
    CHECK(parsed[i].passes == report.tasks[i].passes);
  }
  CHECK(summary_csv(parsed) == csv);
  CHECK_THROWS(parse_summary_csv("wrong,header\n"));
  CHECK_THROWS(parse_summary_csv(std::string(kSummaryHeader) + "\nsm,SM,1,2\n"));
}

TEST_CASE("group aggregation is an independent weighted mean") {
  std::vector<TaskSummary> tasks = {{"a", TaskGroup::SR, 10, 5, 50.0, 0.0, 100.0, 1.0},
                                    {"b", TaskGroup::SR, 30, 30, 100.0, 0.0, 200.0, 0.0},
                                    {"c", TaskGroup::SM, 10, 10, 100.0, 0.0, 50.0, 0.0}};
  const auto groups = summarize_groups(tasks);
  REQUIRE(groups.size() == 10);
  const auto& sr = groups[static_cast<std::size_t>(TaskGroup::SR)];
  CHECK(sr.trials == 40);
  CHECK(sr.success_rate == doctest::Approx(87.5));
  CHECK(sr.avg_input_tokens == doctest::Approx(175.0));
  CHECK(sr.slow_mode_fraction == doctest::Approx(0.25));
  const auto table = group_report(tasks);
  CHECK(table.find("Spatial Reasoning") != std::string::npos);
  CHECK(table.find("Avg") != std::string::npos);
  // Mean over the two present groups: (87.5 + 100) / 2.
  CHECK(table.find("93.8") != std::string::npos);
}

TEST_CASE("outputs are written and the same seed reproduces them") {
  const auto dir = std::filesystem::temp_directory_path() / "robopilot_bench_test";
  std::filesystem::remove_all(dir);
  const auto report = run_suite(small_config(), oracle_factory());
  write_suite_outputs(report, dir / "a");
  write_suite_outputs(run_suite(small_config(), oracle_factory()), dir / "b");
  const auto strip = [](const std::string& csv) {
    std::string out;
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        cells.push_back(cell);
      }
      cells.erase(cells.begin() + 4);
      for (const auto& c : cells) {
        out += c + ",";
      }
      out += '\n';
    }
    return out;
  };
  CHECK(strip(slurp(dir / "a" / "summary.csv")) == strip(slurp(dir / "b" / "summary.csv")));
  std::istringstream lines(slurp(dir / "a" / "trials.jsonl"));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    CHECK_NOTHROW(parse_json(line));
    ++n;
  }
  CHECK(n == report.trials.size());
  std::filesystem::remove_all(dir);
}

TEST_CASE("a task filter restricts the run") {
  auto c = small_config();
  c.tasks = {"er_stack_recovery"};
  const auto report = run_suite(c, oracle_factory());
  CHECK(report.trials.size() == 6);
  for (const auto& t : report.trials) {
    CHECK(t.task_id == "er_stack_recovery");
    CHECK(t.world.failure.drop_probability == doctest::Approx(0.3));
  }
  c.drop_probability = 0.0;
  for (const auto& t : run_suite(c, oracle_factory()).trials) {
    CHECK(t.world.failure.drop_probability == 0.0);
  }
}

TEST_CASE("solve_instruction judges catalog instructions and flags unknown ones") {
  const auto scene = spawn_scene(WorldConfig{}, 3, 5);
  OracleReasoner backend;
  const auto& block = scene.objects[0];
  const auto& bowl = scene.objects[4];
  const auto ok = solve_instruction(fmt::format("Put the {} block in the {} bowl.", block.color, bowl.color), scene, WorldConfig{},
                                    AgentConfig{}, backend);
  CHECK(ok.recognized);
  CHECK(ok.record.evaluation_pass);
  CHECK(ok.record.task_id == "sm_block_in_bowl");
  const auto unknown = solve_instruction("Juggle.", scene, WorldConfig{}, AgentConfig{}, backend);
  CHECK_FALSE(unknown.recognized);
  CHECK_FALSE(unknown.record.evaluation_pass);
}
