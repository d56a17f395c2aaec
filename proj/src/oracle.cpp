// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <fmt/format.h>
#include <regex>

#include "robopilot/monitor.hpp"
#include "robopilot/reasoner.hpp"

namespace robopilot {

namespace {

// Observations carry millimetre precision, so "in place" and "same spot"
// comparisons use tolerances well above the rounding error.
constexpr double kInPlaceTolerance = 0.01;
constexpr double kSlotTolerance = 0.005;

bool near_xy(const Vec3& a, const Vec3& b) { return horizontal_distance(a, b) <= kSlotTolerance; }

std::optional<ObjectId> base_for(const ObjectId& object, const Vec3& target, const Observation& obs, const GoalSpec& goal) {
  if (std::abs(target.z - kBowlInteriorZ) <= kSlotTolerance) {
    for (const auto& o : obs.objects) {
      if (o.kind == ObjectKind::Bowl && near_xy(o.pose, target)) {
        return o.id;
      }
    }
    return std::nullopt;
  }
  if (target.z <= kTableBlockZ + kSlotTolerance) {
    return std::nullopt;
  }
  const Vec3 below{target.x, target.y, target.z - kBlockEdge};
  for (const auto& [id, t] : goal.targets) {
    if (id != object && distance(t, below) <= kSlotTolerance) {
      return id;
    }
  }
  for (const auto& o : obs.objects) {
    if (o.id != object && o.kind == ObjectKind::Block && distance(o.pose, below) <= kSlotTolerance) {
      return o.id;
    }
  }
  return std::nullopt;
}

std::string describe(const PrimitiveCall& call) {
  if (call.primitive == kPickPlaceOn) {
    return fmt::format("move {} onto {}", call.moved_object().str(), call.object_arg("base").str());
  }
  const auto& p = call.position_arg("position");
  return fmt::format("move {} to ({:.3f}, {:.3f}, {:.3f})", call.moved_object().str(), p.x, p.y, p.z);
}

std::string environment_summary(const Observation& obs) {
  std::vector<std::string> ids;
  for (const auto& o : obs.objects) {
    ids.push_back(fmt::format("{} at ({:.3f}, {:.3f}, {:.3f})", o.id.str(), o.pose.x, o.pose.y, o.pose.z));
  }
  std::string out = fmt::format("{} objects observed:", obs.objects.size());
  for (const auto& s : ids) {
    out += "\n- " + s;
  }
  return out;
}

struct TranscriptState {
  std::string instruction;
  std::string user_content;
  std::optional<Observation> initial;
  Observation current;
  bool recovery_pending = false;
};

TranscriptState read_transcript(const std::vector<ChatMessage>& messages, const GoalSpec* goal) {
  static const std::regex instruction_re(R"(Instruction:[ \t]*([^\n]*))");
  static const std::regex achieved_re(R"(Achieved \((-?[0-9.]+), (-?[0-9.]+), (-?[0-9.]+)\))");
  TranscriptState st;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    const auto& msg = messages[i];
    if (msg.role == "user" && st.instruction.empty()) {
      std::smatch m;
      if (std::regex_search(msg.content, m, instruction_re)) {
        st.instruction = m[1];
      }
      st.user_content = msg.content;
    }
    if (const auto tables = parse_observation_tables(msg.content); !tables.empty()) {
      st.current = tables.back();
      if (!st.initial) {
        st.initial = tables.front();
      }
      st.recovery_pending = false;
    }
    if (msg.content.find(kRecoveryMarker) != std::string::npos) {
      st.recovery_pending = true;
    }
    if (msg.role != "assistant" || goal == nullptr || msg.content.find("\"primitive\"") == std::string::npos) {
      continue;
    }
    std::optional<PrimitiveCall> call;
    try {
      call = parse_call(msg.content);
    } catch (const CallParseError&) {
      continue;
    }
    if (!call->is_movement()) {
      continue;
    }
    const std::string* next = i + 1 < messages.size() ? &messages[i + 1].content : nullptr;
    if (next != nullptr && next->find(kRecoveryMarker) != std::string::npos) {
      continue;
    }
    // Without a failure report the move is taken to have landed.
    Vec3 landed;
    std::smatch m;
    if (next != nullptr && std::regex_search(*next, m, achieved_re)) {
      landed = Vec3{std::stod(m[1]), std::stod(m[2]), std::stod(m[3])};
    } else if (const auto it = goal->targets.find(call->moved_object()); it != goal->targets.end()) {
      landed = it->second;
    } else {
      continue;
    }
    for (auto& o : st.current.objects) {
      if (o.id == call->moved_object()) {
        o.pose = landed;
      }
    }
  }
  return st;
}

}  // namespace

OraclePlan oracle_plan(const Observation& observation, const GoalSpec& goal) {
  std::vector<Move> pending;
  for (const auto& [id, target] : goal.targets) {
    const auto* obj = observation.find(id);
    if (obj == nullptr) {
      OraclePlan plan;
      plan.feasible = false;
      plan.rationale.feasibility = Feasibility::Infeasible;
      plan.rationale.feasibility_justification = fmt::format("infeasible: {} is not in the scene", id.str());
      plan.calls.push_back(make_finish(FinishStatus::Infeasible, plan.rationale.feasibility_justification));
      return plan;
    }
    if (distance(obj->pose, target) <= kInPlaceTolerance) {
      continue;
    }
    pending.push_back(Move{id, base_for(id, target, observation, goal), target});
  }
  OraclePlan plan;
  for (const auto& m : order_bottom_up(pending)) {
    plan.calls.push_back(m.base ? make_pick_place_on(m.object, *m.base) : make_pick_place_at(m.object, m.position));
    plan.rationale.plan.push_back(describe(plan.calls.back()));
  }
  plan.rationale.env_status = environment_summary(observation);
  plan.rationale.feasibility_justification = "feasible: every referenced object is present";
  plan.calls.push_back(make_finish(FinishStatus::Success, "goal reached"));
  return plan;
}

std::optional<Interpretation> OracleReasoner::interpret(const std::string& key_text, const Observation& initial) {
  {
    std::lock_guard lock(mutex_);
    if (const auto it = cache_.find(key_text); it != cache_.end()) {
      return it->second;
    }
  }
  static const std::regex instruction_re(R"(Instruction:[ \t]*([^\n]*))");
  std::smatch m;
  std::optional<Interpretation> interp;
  if (std::regex_search(key_text, m, instruction_re)) {
    interp = interpret_instruction(m[1], initial);
  }
  std::lock_guard lock(mutex_);
  cache_.emplace(key_text, interp);
  return interp;
}

ReasonerResponse OracleReasoner::complete(const ReasonerRequest& request) {
  ReasonerResponse response;
  response.input_tokens = estimate_tokens(request.messages);

  const auto head = read_transcript(request.messages, nullptr);
  std::optional<Interpretation> interp;
  if (head.initial) {
    interp = interpret(head.user_content, *head.initial);
  }

  switch (request.kind) {
    case RequestKind::ModeSelection: {
      double difficulty = 3.0;
      if (interp && head.initial) {
        if (const auto* def = find_task(interp->task_id)) {
          int blocks = 0;
          for (const auto& o : head.initial->objects) {
            blocks += o.kind == ObjectKind::Block ? 1 : 0;
          }
          difficulty = scale_difficulty(def->labeled_difficulty, blocks);
        }
      }
      response.text = fmt::format("DIFFICULTY: {:.1f}\nMODE: {}", difficulty, difficulty >= 3.0 ? "slow" : "fast");
      break;
    }
    case RequestKind::Reasoning: {
      Rationale r;
      if (!interp) {
        const auto st = read_transcript(request.messages, nullptr);
        r.env_status = environment_summary(st.current);
        r.instruction_restatement = head.instruction;
        r.feasibility_justification = "feasible: no reason to reject, but the instruction is not understood";
        r.calculations = "none";
      } else {
        const auto st = read_transcript(request.messages, &interp->goal);
        r = oracle_plan(st.current, interp->goal).rationale;
        r.instruction_restatement = head.instruction;
        r.calculations = interp->calculation;
        if (!interp->feasible) {
          r.feasibility = Feasibility::Infeasible;
          r.feasibility_justification = "infeasible: " + interp->infeasible_reason;
          r.plan.clear();
        }
      }
      response.text = format_rationale(r);
      break;
    }
    case RequestKind::Action: {
      PrimitiveCall call;
      if (!interp) {
        call = make_finish(FinishStatus::Failure, "instruction not understood");
      } else if (!interp->feasible) {
        call = make_finish(FinishStatus::Infeasible, interp->infeasible_reason);
      } else {
        const auto st = read_transcript(request.messages, &interp->goal);
        call = st.recovery_pending ? make_get_observation() : oracle_plan(st.current, interp->goal).calls.front();
      }
      response.text = serialize_call(call);
      break;
    }
  }
  response.output_tokens = estimate_tokens(response.text.size());
  return response;
}

}  // namespace robopilot
