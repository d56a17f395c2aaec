// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "robopilot/prompts.hpp"
#include "robopilot/reasoner.hpp"
#include "support.hpp"

using namespace robopilot;
using namespace robopilot::testing;

TEST_CASE("selector answers parse difficulty and mode") {
  const auto a = parse_selector_answer("Thinking...\nDIFFICULTY: 3.5\nMODE: Slow\n");
  REQUIRE(a);
  CHECK(a->difficulty == 3.5);
  CHECK(*a->mode == "slow");

  const auto b = parse_selector_answer("difficulty = 2");
  REQUIRE(b);
  CHECK(b->difficulty == 2.0);
  CHECK_FALSE(b->mode);

  CHECK_FALSE(parse_selector_answer("MODE: fast"));
  CHECK_FALSE(parse_selector_answer("DIFFICULTY: 7\nMODE: slow"));
  CHECK_FALSE(parse_selector_answer("DIFFICULTY: 0.5"));
}

TEST_CASE("rationales round-trip through the wire format") {
  Rationale r;
  r.env_status = "Three blocks on the table.";
  r.instruction_restatement = "Stack red on blue.";
  r.feasibility = Feasibility::Feasible;
  r.feasibility_justification = "feasible: both blocks exist";
  r.calculations = "blue at (0.1, 0.1)";
  r.plan = {"pick red", "place red on blue", "finish"};
  const auto parsed = parse_rationale(format_rationale(r));
  CHECK(parsed == r);

  r.feasibility = Feasibility::Infeasible;
  r.feasibility_justification = "the scene has no purple block";
  const auto inf = parse_rationale(format_rationale(r));
  CHECK(inf.feasibility == Feasibility::Infeasible);
}

TEST_CASE("rationale parse errors name the missing section") {
  const std::string full = "1. ENVIRONMENT\na\n2. INSTRUCTION\nb\n3. FEASIBILITY\nfeasible\n4. CALCULATION\nc\n5. PLAN\n- x\n* y\n";
  const auto ok = parse_rationale(full);
  CHECK(ok.plan == std::vector<std::string>{"x", "y"});

  const auto error = [](const std::string& text) {
    try {
      parse_rationale(text);
    } catch (const RationaleParseError& e) {
      return std::string(e.what());
    }
    return std::string("parsed");
  };
  CHECK(error("1. ENVIRONMENT\na\n2. INSTRUCTION\nb\n4. CALCULATION\nc\n5. PLAN\n1. x\n") == "missing section 3");
  CHECK(error("just prose") == "missing section 1");
  CHECK(error("1. ENVIRONMENT\na\n2. INSTRUCTION\nb\n3. FEASIBILITY\nmaybe\n4. CALCULATION\nc\n5. PLAN\n1. x\n") == "unparseable feasibility");
  CHECK(parse_rationale("1. ENVIRONMENT\na\n2. INSTRUCTION\nb\n3. FEASIBILITY\nThis is not feasible.\n4. CALCULATION\nc\n5. PLAN\n1. x\n")
            .feasibility == Feasibility::Infeasible);
}

TEST_CASE("backend specs parse and reject unknown names") {
  CHECK(BackendSpec::parse("oracle").kind == BackendSpec::Kind::Oracle);
  CHECK(BackendSpec::parse("http").kind == BackendSpec::Kind::Http);
  const auto f = BackendSpec::parse("fault:wrong_object");
  CHECK(f.kind == BackendSpec::Kind::Fault);
  CHECK(f.fault == FaultMode::WrongObject);
  CHECK(f.str() == "fault:wrong_object");
  CHECK_THROWS_AS(BackendSpec::parse("fault:teleport"), std::invalid_argument);
  CHECK_THROWS_AS(BackendSpec::parse("gpt"), std::invalid_argument);
}

TEST_CASE("http backend requires credentials from the environment") {
  ::unsetenv("REASONER_API_KEY");
  BackendSpec spec;
  spec.kind = BackendSpec::Kind::Http;
  try {
    make_backend(spec);
    FAIL("expected BackendInitError");
  } catch (const BackendInitError& e) {
    CHECK(std::string(e.what()).find("REASONER_API_KEY") != std::string::npos);
  }
}

TEST_CASE("oracle plan: bowls, bottom-up stacks and skipped moves") {
  const auto scene = make_scene({block("red", 0.0, 0.0), block("green", 0.1, 0.1), block("blue", -0.1, 0.1), bowl("red", 0.15, -0.15)});
  const auto obs = observe(scene);
  GoalSpec goal;
  goal.targets[block_id("red")] = Vec3{0.15, -0.15, kBowlInteriorZ};
  // blue on green, and green stays put: the green move is skipped.
  goal.targets[block_id("blue")] = Vec3{0.1, 0.1, 0.075};
  goal.targets[block_id("green")] = Vec3{0.1, 0.1, 0.025};
  const auto plan = oracle_plan(obs, goal);
  REQUIRE(plan.calls.size() == 3);
  CHECK(plan.calls.back().primitive == "finish");
  CHECK(plan.calls.back().status_arg("status") == FinishStatus::Success);
  for (const auto& c : plan.calls) {
    if (c.is_movement() && c.moved_object() == block_id("red")) {
      CHECK(c.primitive == "pick_place_on");
      CHECK(c.object_arg("base") == bowl_id("red"));
    }
    if (c.is_movement() && c.moved_object() == block_id("blue")) {
      CHECK(c.primitive == "pick_place_on");
      CHECK(c.object_arg("base") == block_id("green"));
    }
    CHECK_FALSE((c.is_movement() && c.moved_object() == block_id("green")));
  }
}

TEST_CASE("oracle plan orders a tower bottom-up") {
  const auto scene = make_scene({block("red", 0.0, 0.0), block("green", 0.1, 0.1), block("blue", -0.1, 0.1)});
  GoalSpec goal;
  goal.targets[block_id("red")] = Vec3{0.0, -0.15, 0.125};
  goal.targets[block_id("green")] = Vec3{0.0, -0.15, 0.075};
  goal.targets[block_id("blue")] = Vec3{0.0, -0.15, 0.025};
  const auto plan = oracle_plan(observe(scene), goal);
  REQUIRE(plan.calls.size() == 4);
  CHECK(plan.calls[0].moved_object() == block_id("blue"));
  CHECK(plan.calls[0].primitive == "pick_place_at");
  CHECK(plan.calls[1].moved_object() == block_id("green"));
  CHECK(plan.calls[1].object_arg("base") == block_id("blue"));
  CHECK(plan.calls[2].moved_object() == block_id("red"));
  CHECK(plan.calls[2].object_arg("base") == block_id("green"));
}

namespace {

ReasonerRequest request_for(RequestKind kind, const std::string& instruction, const SceneState& scene) {
  const auto& prompts = PromptSet::builtin();
  const auto& tmpl = kind == RequestKind::ModeSelection ? prompts.mode_selector
                     : kind == RequestKind::Reasoning   ? prompts.cot_reasoning
                                                        : prompts.action_generation;
  const auto base = prompts.render(tmpl, instruction, format_observation_table(observe(scene)));
  ReasonerRequest req;
  req.kind = kind;
  req.messages = render_context(PlanActionMemory{}, base, ThinkingMode::Fast);
  return req;
}

}  // namespace

TEST_CASE("oracle reasoner answers from the transcript alone") {
  const auto scene = make_scene({block("red", 0.0, 0.0), block("blue", 0.1, 0.1), bowl("red", 0.15, -0.15), bowl("blue", -0.15, 0.15)});
  OracleReasoner oracle;

  const auto sel = oracle.complete(request_for(RequestKind::ModeSelection, "Put the red block in the blue bowl.", scene));
  const auto answer = parse_selector_answer(sel.text);
  REQUIRE(answer);
  CHECK(answer->difficulty < 3.0);
  CHECK(*answer->mode == "fast");
  CHECK(sel.input_tokens > 0);

  const auto act = oracle.complete(request_for(RequestKind::Action, "Put the red block in the blue bowl.", scene));
  const auto call = parse_call(act.text);
  CHECK(call.primitive == "pick_place_on");
  CHECK(call.object_arg("object") == block_id("red"));
  CHECK(call.object_arg("base") == bowl_id("blue"));

  const auto rationale = parse_rationale(oracle.complete(request_for(RequestKind::Reasoning, "Put the red block in the blue bowl.", scene)).text);
  CHECK(rationale.feasibility == Feasibility::Feasible);
  CHECK_FALSE(rationale.plan.empty());

  const auto absent = parse_rationale(
      oracle.complete(request_for(RequestKind::Reasoning, "Put the purple block in the red bowl.", scene)).text);
  CHECK(absent.feasibility == Feasibility::Infeasible);
  const auto fin = parse_call(oracle.complete(request_for(RequestKind::Action, "Put the purple block in the red bowl.", scene)).text);
  CHECK(fin.status_arg("status") == FinishStatus::Infeasible);

  const auto unknown = parse_call(oracle.complete(request_for(RequestKind::Action, "Dance.", scene)).text);
  CHECK(unknown.status_arg("status") == FinishStatus::Failure);
}

TEST_CASE("fault backends misbehave as named") {
  const auto scene = make_scene({block("red", 0.0, 0.0), block("blue", 0.1, 0.1)});
  FaultReasoner loop(FaultMode::LoopForever);
  CHECK(parse_call(loop.complete(request_for(RequestKind::Action, "x", scene)).text).primitive == "get_observation");
  FaultReasoner invalid(FaultMode::InvalidCall);
  CHECK(parse_call(invalid.complete(request_for(RequestKind::Action, "x", scene)).text).moved_object() == ObjectId("blk_invisible"));
  FaultReasoner silent(FaultMode::Silent);
  CHECK(silent.complete(request_for(RequestKind::Action, "x", scene)).text.empty());
  FaultReasoner wrong(FaultMode::WrongObject);
  CHECK(parse_call(wrong.complete(request_for(RequestKind::Action, "x", scene)).text).primitive == "pick_place_on");
  CHECK(parse_selector_answer(loop.complete(request_for(RequestKind::ModeSelection, "x", scene)).text));
  CHECK_NOTHROW(parse_rationale(loop.complete(request_for(RequestKind::Reasoning, "x", scene)).text));
}

TEST_CASE("prompt templates fill known placeholders only") {
  CHECK(fill_placeholders("{instruction} {json: {a}} {rationale}", {{"instruction", "go"}, {"rationale", "R"}}) == "go {json: {a}} R");
  const auto t = PromptTemplate::parse("[system]\nS line\n[user]\nU {instruction}\n");
  CHECK(t.system.find("S line") != std::string::npos);
  CHECK(t.user.find("U {instruction}") != std::string::npos);

  const auto& builtin = PromptSet::builtin();
  for (const auto* tmpl : {&builtin.mode_selector, &builtin.cot_reasoning, &builtin.action_generation}) {
    CHECK_FALSE(tmpl->system.empty());
    CHECK(tmpl->user.find("{instruction}") != std::string::npos);
  }
  const auto rendered = builtin.render(builtin.action_generation, "Do it.", "| table |", "PLAN");
  CHECK(rendered.user.find("Do it.") != std::string::npos);
  CHECK((rendered.system + rendered.user).find("pick_place_on") != std::string::npos);
}

TEST_CASE("prompt sets load from a directory and match the built-ins") {
  const auto loaded = PromptSet::load(ROBOPILOT_PROMPTS_DIR);
  CHECK(loaded.mode_selector.system == PromptSet::builtin().mode_selector.system);
  CHECK(loaded.cot_reasoning.user == PromptSet::builtin().cot_reasoning.user);
  CHECK_THROWS(PromptSet::load(std::filesystem::temp_directory_path() / "robopilot_no_such_dir"));
}
