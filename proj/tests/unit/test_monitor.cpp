// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "robopilot/monitor.hpp"
#include "support.hpp"

using namespace robopilot;
using namespace robopilot::testing;

TEST_CASE("post-check deviation boundary is inclusive of the threshold") {
  const Vec3 intended{0.1, 0.1, 0.025};
  const auto call = make_pick_place_at(block_id("red"), intended);
  const auto at = [&](double d) { return post_execution_check(call, Vec3{intended.x + d, intended.y, intended.z}, intended, 0.02); };
  CHECK_FALSE(at(0.0199).deviated);
  CHECK_FALSE(at(0.0200).deviated);
  CHECK(at(0.0201).deviated);
  CHECK(at(0.0201).distance == doctest::Approx(0.0201));
}

TEST_CASE("recovery feedback carries the marker") {
  const auto rejected = synthesize_feedback(RejectedEvent{"unknown object blk_x in argument 'object'"}, 3);
  CHECK(rejected.recovery);
  CHECK(rejected.invocation_index == 3);
  CHECK(rejected.content.find(kRecoveryMarker) != std::string::npos);
  CHECK(rejected.content.find("blk_x") != std::string::npos);

  const auto call = make_pick_place_at(block_id("red"), Vec3{0.0, 0.0, 0.025});
  const auto deviated = synthesize_feedback(DeviatedEvent{call, Vec3{0.1, 0.0, 0.025}, Vec3{0.0, 0.0, 0.025}});
  CHECK(deviated.recovery);
  CHECK(deviated.content.find("blk_red") != std::string::npos);
  CHECK(deviated.content.find("0.100") != std::string::npos);

  CallOutcome ok;
  ok.execution.achieved = Vec3{0.0, 0.0, 0.025};
  const auto executed = synthesize_feedback(ExecutedEvent{call, ok});
  CHECK_FALSE(executed.recovery);
  CHECK(executed.content.find(kRecoveryMarker) == std::string::npos);
}

TEST_CASE("feedback role depends on the thinking mode") {
  CHECK(feedback_role(ThinkingMode::Fast) == "system");
  CHECK(feedback_role(ThinkingMode::Slow) == "assistant");
}

TEST_CASE("monitor records rejections, deviations and supersedes failed attempts") {
  WorldConfig config;
  auto scene = make_scene({block("red", 0.0, 0.0), block("blue", 0.15, 0.15)});
  ExecutionMonitor monitor(0.02);

  const auto bad = make_pick_place_at(ObjectId("blk_ghost"), Vec3{0.1, 0.1, 0.025});
  CHECK_FALSE(monitor.pre_execution_check(bad, scene, config, 1).valid);
  REQUIRE(monitor.memory().size() == 1);
  CHECK_FALSE(monitor.memory().steps()[0].executed());
  CHECK(monitor.memory().steps()[0].feedback->recovery);

  // A deviated move: the achieved pose is forced away from the intended one.
  const auto move = make_pick_place_at(block_id("red"), Vec3{-0.1, -0.1, 0.025});
  REQUIRE(monitor.pre_execution_check(move, scene, config, 2).valid);
  CallOutcome dropped;
  dropped.execution.achieved = Vec3{-0.1, 0.0, 0.025};
  dropped.execution.intended = Vec3{-0.1, -0.1, 0.025};
  dropped.execution.dropped = true;
  const auto& s1 = monitor.record_execution(move, dropped, 2);
  CHECK(s1.post_check->deviated);
  CHECK(s1.feedback->recovery);

  auto good = execute_call(move, scene, config);
  const auto& s2 = monitor.record_execution(move, good, 3);
  CHECK_FALSE(s2.post_check->deviated);
  CHECK_FALSE(s2.feedback->recovery);
  CHECK(monitor.memory().steps()[1].superseded);
  CHECK_FALSE(monitor.memory().steps()[0].superseded);
  CHECK(monitor.memory().size() == 3);
}

TEST_CASE("open-loop recording drops feedback except observations") {
  WorldConfig config;
  auto scene = make_scene({block("red", 0.0, 0.0)});
  ExecutionMonitor monitor;
  const auto move = make_pick_place_at(block_id("red"), Vec3{0.1, 0.1, 0.1});
  const auto& s = monitor.record_execution(move, execute_call(move, scene, config), 1, std::nullopt, false);
  CHECK_FALSE(s.feedback);
  const auto look = make_get_observation();
  const auto& o = monitor.record_execution(look, execute_call(look, scene, config), 2, std::nullopt, false);
  REQUIRE(o.feedback);
  CHECK(o.feedback->content.find("blk_red") != std::string::npos);
}

TEST_CASE("render_context interleaves rationales, calls and feedback") {
  PlanActionMemory memory;
  memory.add_rationale(RationaleEntry{1, 0, "", "first rationale", {}});
  PlanStep step;
  step.raw_text = "call one";
  step.feedback = HistoryMessage{MessageRole::Feedback, "feedback one", 2, true};
  memory.append(step);
  memory.add_rationale(RationaleEntry{3, 0, "| table |", "second rationale", {}});
  step.raw_text = "call two";
  step.feedback.reset();
  memory.append(step);

  const BasePrompt base{"sys", "usr"};
  const auto slow = render_context(memory, base, ThinkingMode::Slow);
  const std::vector<ChatMessage> expected = {{"system", "sys"},
                                             {"user", "usr"},
                                             {"assistant", "first rationale"},
                                             {"assistant", "call one"},
                                             {"assistant", "feedback one"},
                                             {"assistant", "Current observation:\n| table |"},
                                             {"assistant", "second rationale"},
                                             {"assistant", "call two"}};
  CHECK(slow == expected);

  const auto fast = render_context(memory, base, ThinkingMode::Fast);
  CHECK(fast[4] == ChatMessage{"system", "feedback one"});
  CHECK(memory.rationales()[1].before_step == 1);
}

TEST_CASE("memory is append-only") {
  PlanActionMemory memory;
  for (int i = 0; i < 5; ++i) {
    memory.append(PlanStep{});
  }
  memory.supersede(2);
  memory.supersede(99);
  REQUIRE(memory.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(memory.steps()[static_cast<std::size_t>(i)].index == i);
    CHECK(memory.steps()[static_cast<std::size_t>(i)].superseded == (i == 2));
  }
}
