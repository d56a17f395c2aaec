// SPDX-License-Identifier: Apache-2.0
//
// Execution monitor: gates calls before execution, checks movement results
// against their intended pose afterwards, and keeps the plan-action memory
// that the reasoner sees as conversation history.
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "robopilot/chat.hpp"
#include "robopilot/primitives.hpp"
#include "robopilot/rationale.hpp"

namespace robopilot {

enum class ThinkingMode { Fast, Slow };

std::string_view to_string(ThinkingMode mode);

/// Marker carried by every recovery-flagged feedback message.
inline constexpr std::string_view kRecoveryMarker = "REPLAN REQUIRED";

enum class MessageRole { System, User, Assistant, Feedback };

std::string_view to_string(MessageRole role);

struct HistoryMessage {
  MessageRole role = MessageRole::Feedback;
  std::string content;
  int invocation_index = 0;
  bool recovery = false;
};

struct PostCheck {
  bool deviated = false;
  double distance = 0.0;
};

/// Deviated iff distance(achieved, intended) > threshold.
PostCheck post_execution_check(const PrimitiveCall& call, const Vec3& achieved, const Vec3& intended, double threshold = 0.02);

struct RejectedEvent {
  std::string reason;
};
struct DeviatedEvent {
  PrimitiveCall call;
  Vec3 achieved;
  Vec3 intended;
};
struct ExecutedEvent {
  PrimitiveCall call;
  CallOutcome outcome;
};
using MonitorEvent = std::variant<RejectedEvent, DeviatedEvent, ExecutedEvent>;

HistoryMessage synthesize_feedback(const MonitorEvent& event, int invocation_index = 0);

struct PlanStep {
  int index = 0;
  int invocation_index = 0;
  std::optional<std::string> intent;
  /// Reasoner text the step came from.
  std::string raw_text;
  /// nullopt when the text held no parseable call.
  std::optional<PrimitiveCall> call;
  std::optional<std::string> parse_error;
  std::optional<ValidationVerdict> verdict;
  /// Present iff the call was executed.
  std::optional<CallOutcome> outcome;
  std::optional<PostCheck> post_check;
  std::optional<HistoryMessage> feedback;
  bool superseded = false;

  bool executed() const { return outcome.has_value(); }
  bool moved_in_place() const { return outcome && post_check && !post_check->deviated && outcome->execution.ok; }
};

struct RationaleEntry {
  int invocation_index = 0;
  /// Number of plan steps that existed when this rationale was produced.
  std::size_t before_step = 0;
  /// Fresh observation handed to the reasoning stage (empty for the first).
  std::string observation_text;
  std::string text;
  Rationale parsed;
};

/// Append-only trace; steps are superseded, never removed.
class PlanActionMemory {
public:
  PlanStep& append(PlanStep step);
  void add_rationale(RationaleEntry entry);
  /// Marks a step superseded by a later, localized edit.
  void supersede(std::size_t index);

  const std::vector<PlanStep>& steps() const { return steps_; }
  const std::vector<RationaleEntry>& rationales() const { return rationales_; }
  std::size_t size() const { return steps_.size(); }
  bool empty() const { return steps_.empty() && rationales_.empty(); }

private:
  std::vector<PlanStep> steps_;
  std::vector<RationaleEntry> rationales_;
};

class ExecutionMonitor {
public:
  explicit ExecutionMonitor(double threshold = 0.02) : threshold_(threshold) {}

  /// Validates the call. A rejection is recorded as a step without outcome
  /// plus a recovery feedback message.
  ValidationVerdict pre_execution_check(const PrimitiveCall& call, const SceneState& scene, const WorldConfig& config,
                                        int invocation_index, std::optional<std::string> intent = std::nullopt);

  /// Records an executed call, runs the post-execution check for movement
  /// primitives and attaches feedback. With report_feedback off the step is
  /// recorded silently (open-loop ablation).
  const PlanStep& record_execution(const PrimitiveCall& call, CallOutcome outcome, int invocation_index,
                                   std::optional<std::string> intent = std::nullopt, bool report_feedback = true);

  void record_parse_failure(std::string raw_text, std::string error, int invocation_index);

  PlanActionMemory& memory() { return memory_; }
  const PlanActionMemory& memory() const { return memory_; }
  double threshold() const { return threshold_; }

private:
  double threshold_;
  PlanActionMemory memory_;
};

struct BasePrompt {
  std::string system;
  std::string user;
};

/// [system, user, history...]. Feedback renders as "system" in fast mode and
/// "assistant" in slow mode; rationales render as assistant messages at the
/// point they were produced.
std::vector<ChatMessage> render_context(const PlanActionMemory& memory, const BasePrompt& base, ThinkingMode mode);

/// Role string a feedback message is rendered with in `mode`.
std::string_view feedback_role(ThinkingMode mode);

}  // namespace robopilot
