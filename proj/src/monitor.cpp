// SPDX-License-Identifier: Apache-2.0
#include "robopilot/monitor.hpp"

#include <fmt/format.h>

namespace robopilot {

namespace {

std::string fmt_pos(const Vec3& p) { return fmt::format("({:.3f}, {:.3f}, {:.3f})", p.x, p.y, p.z); }

std::string describe_executed(const ExecutedEvent& ev) {
  const auto& call = ev.call;
  const auto& exec = ev.outcome.execution;
  if (call.primitive == kGetObservation && ev.outcome.observation) {
    return "Observation:\n" + format_observation_table(*ev.outcome.observation);
  }
  if (call.primitive == kFinish) {
    return fmt::format("Finished with status {}: {}", to_string(call.status_arg("status")), call.text_arg("message"));
  }
  const std::string achieved = exec.achieved ? fmt_pos(*exec.achieved) : std::string("(unknown)");
  if (call.primitive == kPickPlaceOn) {
    return fmt::format("Moved {} onto {}. Achieved {}.", call.moved_object().str(), call.object_arg("base").str(), achieved);
  }
  if (call.primitive == kPickPlaceAt) {
    return fmt::format("Moved {} to {}. Achieved {}.", call.moved_object().str(), fmt_pos(call.position_arg("position")), achieved);
  }
  return fmt::format("Executed {}.", call.primitive);
}

}  // namespace

std::string_view to_string(ThinkingMode mode) { return mode == ThinkingMode::Fast ? "fast" : "slow"; }

std::string_view to_string(MessageRole role) {
  switch (role) {
    case MessageRole::System:
      return "system";
    case MessageRole::User:
      return "user";
    case MessageRole::Assistant:
      return "assistant";
    case MessageRole::Feedback:
      return "feedback";
  }
  return "feedback";
}

std::string_view feedback_role(ThinkingMode mode) { return mode == ThinkingMode::Fast ? "system" : "assistant"; }

PostCheck post_execution_check(const PrimitiveCall& /*call*/, const Vec3& achieved, const Vec3& intended, double threshold) {
  const double d = distance(achieved, intended);
  return PostCheck{d > threshold + kDistanceEpsilon, d};
}

HistoryMessage synthesize_feedback(const MonitorEvent& event, int invocation_index) {
  HistoryMessage msg;
  msg.role = MessageRole::Feedback;
  msg.invocation_index = invocation_index;
  std::visit(
      [&](const auto& ev) {
        using T = std::decay_t<decltype(ev)>;
        if constexpr (std::is_same_v<T, RejectedEvent>) {
          msg.content = fmt::format("Call rejected before execution: {}. {}: choose a valid action.", ev.reason, kRecoveryMarker);
          msg.recovery = true;
        } else if constexpr (std::is_same_v<T, DeviatedEvent>) {
          msg.content = fmt::format("Deviation detected for {}: intended {} but achieved {}, off by {:.3f} m. {}: the object is not where it should be.",
                                    ev.call.is_movement() ? ev.call.moved_object().str() : ev.call.primitive, fmt_pos(ev.intended),
                                    fmt_pos(ev.achieved), distance(ev.achieved, ev.intended), kRecoveryMarker);
          msg.recovery = true;
        } else {
          if (!ev.outcome.execution.ok) {
            msg.content = fmt::format("Execution failed: {}. {}: choose a valid action.", ev.outcome.execution.error, kRecoveryMarker);
            msg.recovery = true;
          } else {
            msg.content = describe_executed(ev);
          }
        }
      },
      event);
  return msg;
}

PlanStep& PlanActionMemory::append(PlanStep step) {
  step.index = static_cast<int>(steps_.size());
  steps_.push_back(std::move(step));
  return steps_.back();
}

void PlanActionMemory::add_rationale(RationaleEntry entry) {
  entry.before_step = steps_.size();
  rationales_.push_back(std::move(entry));
}

void PlanActionMemory::supersede(std::size_t index) {
  if (index < steps_.size()) {
    steps_[index].superseded = true;
  }
}

ValidationVerdict ExecutionMonitor::pre_execution_check(const PrimitiveCall& call, const SceneState& scene, const WorldConfig& config,
                                                        int invocation_index, std::optional<std::string> intent) {
  auto verdict = validate_call(call, scene, config);
  if (!verdict.valid) {
    PlanStep step;
    step.invocation_index = invocation_index;
    step.intent = std::move(intent);
    step.raw_text = call.raw_text;
    step.call = call;
    step.verdict = verdict;
    step.feedback = synthesize_feedback(RejectedEvent{verdict.reason}, invocation_index);
    memory_.append(std::move(step));
  }
  return verdict;
}

const PlanStep& ExecutionMonitor::record_execution(const PrimitiveCall& call, CallOutcome outcome, int invocation_index,
                                                   std::optional<std::string> intent, bool report_feedback) {
  PlanStep step;
  step.invocation_index = invocation_index;
  step.intent = std::move(intent);
  step.raw_text = call.raw_text;
  step.call = call;
  step.verdict = ValidationVerdict::accept();

  const auto& exec = outcome.execution;
  std::optional<MonitorEvent> event;
  if (call.is_movement() && exec.ok && exec.achieved && exec.intended) {
    step.post_check = post_execution_check(call, *exec.achieved, *exec.intended, threshold_);
    if (step.post_check->deviated) {
      event = DeviatedEvent{call, *exec.achieved, *exec.intended};
    }
  }
  if (!event) {
    event = ExecutedEvent{call, outcome};
  }
  // Observations are data, not feedback; they are always returned.
  if (report_feedback || call.primitive == kGetObservation) {
    step.feedback = synthesize_feedback(*event, invocation_index);
  }
  step.outcome = std::move(outcome);

  // A successful move of an object edits the trace locally: earlier failed
  // attempts on the same object are superseded.
  if (step.moved_in_place()) {
    const ObjectId& moved = call.moved_object();
    const auto& steps = memory_.steps();
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const auto& prev = steps[i];
      const bool failed = !prev.outcome || (prev.post_check && prev.post_check->deviated) || !prev.outcome->execution.ok;
      if (!prev.superseded && failed && prev.call && prev.call->is_movement() && prev.call->moved_object() == moved) {
        memory_.supersede(i);
      }
    }
  }
  return memory_.append(std::move(step));
}

void ExecutionMonitor::record_parse_failure(std::string raw_text, std::string error, int invocation_index) {
  PlanStep step;
  step.invocation_index = invocation_index;
  step.raw_text = std::move(raw_text);
  step.parse_error = error;
  HistoryMessage msg;
  msg.role = MessageRole::Feedback;
  msg.invocation_index = invocation_index;
  msg.content = fmt::format("Could not parse a primitive call: {}. Reply with exactly one JSON call {{\"primitive\": ..., \"args\": {{...}}}}.", error);
  step.feedback = std::move(msg);
  memory_.append(std::move(step));
}

std::vector<ChatMessage> render_context(const PlanActionMemory& memory, const BasePrompt& base, ThinkingMode mode) {
  std::vector<ChatMessage> out;
  out.push_back({"system", base.system});
  out.push_back({"user", base.user});
  const std::string fb_role(feedback_role(mode));

  const auto& steps = memory.steps();
  const auto& rationales = memory.rationales();
  std::size_t r = 0;
  const auto emit_rationales_upto = [&](std::size_t step_index) {
    while (r < rationales.size() && rationales[r].before_step <= step_index) {
      if (!rationales[r].observation_text.empty()) {
        out.push_back({fb_role, "Current observation:\n" + rationales[r].observation_text});
      }
      out.push_back({"assistant", rationales[r].text});
      ++r;
    }
  };
  for (std::size_t i = 0; i < steps.size(); ++i) {
    emit_rationales_upto(i);
    out.push_back({"assistant", steps[i].raw_text});
    if (steps[i].feedback) {
      out.push_back({fb_role, steps[i].feedback->content});
    }
  }
  emit_rationales_upto(steps.size());
  return out;
}

}  // namespace robopilot
