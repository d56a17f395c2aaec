// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "robopilot/serialization.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(ROBOPILOT_CLI) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) {
    r.output += buf.data();
  }
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(ROBOPILOT_SCRATCH) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("argument errors exit 2 and help exits 0") {
  CHECK(run("").code == 2);
  CHECK(run("--help").code == 0);
  CHECK(run("bench-run --no-such-flag").code == 2);
  CHECK(run("bench-run --suite everything").code == 2);
  CHECK(run("bench-run --mode medium").code == 2);
  CHECK(run("replay").code == 2);
}

TEST_CASE("bench-run writes outputs and bench-report reads them") {
  const auto dir = scratch("bench");
  const auto r = run("bench-run --suite canonical --seed 7 --scenarios 2 --goals 1 --task sm_block_in_bowl --out " + dir.string());
  CHECK(r.code == 0);
  CHECK(r.output.find("Simple Manipulation") != std::string::npos);
  CHECK(fs::exists(dir / "trials.jsonl"));
  CHECK(read(dir / "summary.csv").find("sm_block_in_bowl,SM,2,100.0") != std::string::npos);

  const auto rep = run("bench-report " + dir.string());
  CHECK(rep.code == 0);
  CHECK(rep.output.find("Avg") != std::string::npos);
  CHECK(run("bench-report " + (dir / "missing.csv").string()).code == 2);
  write(dir / "bad.csv", "not,a,summary\n");
  CHECK(run("bench-report " + (dir / "bad.csv").string()).code == 2);
}

TEST_CASE("config files are validated and flags override them") {
  const auto dir = scratch("config");
  write(dir / "unknown.json", R"({"suite": "all", "api_key": "secret"})");
  CHECK(run("bench-run --config " + (dir / "unknown.json").string() + " --out " + dir.string()).code == 2);
  write(dir / "broken.json", "{");
  CHECK(run("bench-run --config " + (dir / "broken.json").string() + " --out " + dir.string()).code == 2);
  CHECK(run("bench-run --config " + (dir / "absent.json").string()).code == 2);

  write(dir / "ok.json", R"({"suite": "robustness", "master_seed": 3, "overrides": {"scenarios": 1, "goals_per_scenario": 1,
    "tasks": ["fr_absent_color"]}})");
  const auto r = run("bench-run --config " + (dir / "ok.json").string() + " --goals 2 --out " + (dir / "out").string());
  CHECK(r.code == 0);
  CHECK(read(dir / "out" / "summary.csv").find("fr_absent_color,FR,2,") != std::string::npos);
}

TEST_CASE("missing http credentials exit 3") {
  const auto dir = scratch("http");
  const auto cmd = std::string("env -u REASONER_API_KEY ") + ROBOPILOT_CLI + " bench-run --backend http --scenarios 1 --goals 1 --out " +
                   dir.string() + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 3);
  const auto solve = std::string("env -u REASONER_API_KEY ") + ROBOPILOT_CLI +
                     " solve --backend http --instruction 'Put each block in the bowl of the same color.' >/dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(solve.c_str())) == 3);
}

TEST_CASE("solve runs one trial from a spawned or saved scene") {
  const auto r = run("solve --pairs 3 --seed 4 --instruction 'Put each block in the bowl of the same color.'");
  CHECK(r.code == 0);
  CHECK(r.output.find("verdict: pass") != std::string::npos);
  CHECK(r.output.find("pick_place_on") != std::string::npos);

  const auto dir = scratch("solve");
  write(dir / "scene.json", R"({"seed": 5, "objects": [
    {"id": "blk_red", "kind": "block", "color": "red", "pose": [0.0, 0.0, 0.025], "supported_by": null},
    {"id": "blk_blue", "kind": "block", "color": "blue", "pose": [0.15, 0.15, 0.025], "supported_by": null},
    {"id": "bowl_red", "kind": "bowl", "color": "red", "pose": [-0.15, 0.15, 0.0], "supported_by": null},
    {"id": "bowl_blue", "kind": "bowl", "color": "blue", "pose": [-0.15, -0.15, 0.0], "supported_by": null}]})");
  const auto js = run("solve --json --scene " + (dir / "scene.json").string() + " --instruction 'Put the red block in the blue bowl.'");
  REQUIRE(js.code == 0);
  const auto rec = robopilot::parse_json(js.output);
  CHECK(rec["evaluation"] == "pass");
  CHECK(rec["task_id"] == "sm_block_in_bowl");

  const auto loop = run("solve --json --backend fault:loop_forever --scene " + (dir / "scene.json").string() +
                        " --instruction 'Put the red block in the blue bowl.'");
  REQUIRE(loop.code == 0);
  CHECK(robopilot::parse_json(loop.output)["invocation_count"] == 20);

  write(dir / "bad.json", R"({"seed": 5, "objects": [{"id": "x", "kind": "block", "color": "mauve", "pose": [0,0,0]}]})");
  CHECK(run("solve --scene " + (dir / "bad.json").string() + " --instruction 'x'").code == 2);
  CHECK(run("solve --scene " + (dir / "nope.json").string() + " --instruction 'x'").code == 2);
  CHECK(run("solve --pairs 9 --instruction 'x'").code == 2);
}

TEST_CASE("replay accepts recorded trials and flags divergence") {
  const auto dir = scratch("replay");
  REQUIRE(run("bench-run --suite robustness --task er_stack_recovery --scenarios 2 --goals 1 --out " + dir.string()).code == 0);
  const auto ok = run("replay --trial " + (dir / "trials.jsonl").string());
  CHECK(ok.code == 0);
  CHECK(ok.output.find("2 trial(s) replayed") != std::string::npos);
  CHECK(run("replay --trial " + (dir / "trials.jsonl").string() + " --line 2").code == 0);

  std::istringstream lines(read(dir / "trials.jsonl"));
  std::string first;
  std::getline(lines, first);
  auto j = robopilot::parse_json(first);
  for (auto& step : j["trace"]) {
    if (!step["outcome"].is_null() && !step["outcome"]["achieved"].is_null()) {
      step["outcome"]["achieved"][1] = -0.2222;
      break;
    }
  }
  write(dir / "tampered.jsonl", j.dump() + "\n");
  const auto bad = run("replay --trial " + (dir / "tampered.jsonl").string());
  CHECK(bad.code == 4);
  CHECK(bad.output.find("step") != std::string::npos);

  write(dir / "garbage.jsonl", "{not json}\n");
  CHECK(run("replay --trial " + (dir / "garbage.jsonl").string()).code == 2);
  write(dir / "empty.jsonl", "");
  CHECK(run("replay --trial " + (dir / "empty.jsonl").string()).code == 2);
}
