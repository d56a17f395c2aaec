// SPDX-License-Identifier: Apache-2.0
#include "robopilot/agent.hpp"

#include <chrono>
#include <fmt/format.h>

namespace robopilot {

namespace {

enum class StepResult { Continue, Finished, Recovery };

std::string plan_text(const Rationale& r) {
  std::string out = "Current plan from your analysis:\n";
  for (std::size_t i = 0; i < r.plan.size(); ++i) {
    out += fmt::format("{}. {}\n", i + 1, r.plan[i]);
  }
  return out;
}

}  // namespace

std::string_view to_string(ModeOverride mode) {
  switch (mode) {
    case ModeOverride::Auto:
      return "auto";
    case ModeOverride::Fast:
      return "fast";
    case ModeOverride::Slow:
      return "slow";
  }
  return "auto";
}

std::optional<ModeOverride> parse_mode_override(std::string_view text) {
  for (const auto m : {ModeOverride::Auto, ModeOverride::Fast, ModeOverride::Slow}) {
    if (to_string(m) == text) {
      return m;
    }
  }
  return std::nullopt;
}

void AgentConfig::validate() const {
  if (budget < 1) {
    throw std::invalid_argument("budget must be at least 1");
  }
  if (!(monitor_threshold > 0.0)) {
    throw std::invalid_argument("monitor_threshold must be positive");
  }
  if (!(observation_noise >= 0.0)) {
    throw std::invalid_argument("observation_noise must be non-negative");
  }
}

double TrialRecord::avg_input_tokens() const {
  return invocation_count == 0 ? 0.0 : static_cast<double>(total_input_tokens) / invocation_count;
}

int answered_recovery_events(const TrialRecord& record) {
  if (record.invocations.empty()) {
    return 0;
  }
  const int last = record.invocations.back().index;
  int n = 0;
  for (const auto& step : record.memory.steps()) {
    if (step.feedback && step.feedback->recovery && step.invocation_index < last) {
      ++n;
    }
  }
  return n;
}

struct Agent::Trial {
  TrialRecord record;
  SceneState scene;
  WorldConfig world;
  ExecutionMonitor monitor;
  std::string initial_table;
  bool finished = false;

  bool can_invoke(const AgentConfig& c) const { return record.invocation_count < c.budget; }
};

Agent::Agent(Reasoner& backend, AgentConfig config, PromptSet prompts)
    : backend_(backend), config_(config), prompts_(std::move(prompts)) {
  config_.validate();
}

namespace {

ReasonerResponse invoke(Reasoner& backend, TrialRecord& record, const AgentConfig& config, RequestKind kind,
                        std::vector<ChatMessage> messages) {
  ReasonerRequest req;
  req.messages = std::move(messages);
  req.temperature = 0.0;
  req.kind = kind;
  req.invocation_index = record.invocation_count;
  req.budget = config.budget;
  // Counted before the call so a throwing backend still consumes budget.
  ++record.invocation_count;
  auto resp = backend.complete(req);
  record.invocations.push_back(InvocationRecord{req.invocation_index, kind, resp.input_tokens, resp.output_tokens, resp.latency_s});
  record.total_input_tokens += resp.input_tokens;
  return resp;
}

}  // namespace

ModeDecision Agent::select_mode(const std::string& instruction, const Observation& observation, TrialRecord& record) {
  const auto base = prompts_.render(prompts_.mode_selector, instruction, format_observation_table(observation));
  const auto resp = invoke(backend_, record, config_, RequestKind::ModeSelection, {{"system", base.system}, {"user", base.user}});
  ModeDecision d;
  d.signals = resp.text;
  const auto answer = parse_selector_answer(resp.text);
  if (!answer) {
    record.warnings.push_back("mode selector reply unparseable; defaulting to slow at difficulty 3.0");
    d.mode = ThinkingMode::Slow;
    d.predicted_difficulty = 3.0;
    return d;
  }
  d.predicted_difficulty = answer->difficulty;
  d.mode = answer->difficulty >= config_.slow_threshold ? ThinkingMode::Slow : ThinkingMode::Fast;
  if (answer->mode && *answer->mode != to_string(d.mode)) {
    record.warnings.push_back(fmt::format("mode token '{}' contradicts difficulty {:.2f}; using {}", *answer->mode, answer->difficulty,
                                          to_string(d.mode)));
  }
  return d;
}

TrialRecord Agent::run_fast(const TaskInstance& task, const SceneState& scene, const WorldConfig& world) {
  return run(task, scene, world, ThinkingMode::Fast);
}

TrialRecord Agent::run_slow(const TaskInstance& task, const SceneState& scene, const WorldConfig& world) {
  return run(task, scene, world, ThinkingMode::Slow);
}

TrialRecord Agent::run_trial(const TaskInstance& task, const SceneState& scene, const WorldConfig& world) {
  switch (config_.mode_override) {
    case ModeOverride::Fast:
      return run(task, scene, world, ThinkingMode::Fast);
    case ModeOverride::Slow:
      return run(task, scene, world, ThinkingMode::Slow);
    case ModeOverride::Auto:
      break;
  }
  return run(task, scene, world, std::nullopt);
}

TrialRecord Agent::run(const TaskInstance& task, const SceneState& scene, const WorldConfig& world, std::optional<ThinkingMode> forced) {
  const auto start = std::chrono::steady_clock::now();
  Trial t{.record = {}, .scene = scene, .world = world, .monitor = ExecutionMonitor(config_.monitor_threshold), .initial_table = {}};
  auto& rec = t.record;
  rec.task_id = task.task_id;
  rec.group = task.group;
  rec.instruction = task.instruction;
  rec.scenario_seed = scene.seed;
  rec.goal_seed = task.goal_seed;
  rec.n_pairs = task.n_pairs;
  rec.feasibility_label = task.feasibility_label;
  rec.goal = task.goal;
  rec.world = world;
  rec.agent = config_;
  rec.backend = backend_.name();
  rec.initial_scene = scene;

  try {
    t.initial_table = format_observation_table(observe(t.scene, config_.observation_noise));
    if (forced) {
      rec.mode = ModeDecision{*forced, *forced == ThinkingMode::Slow ? 5.0 : 1.0, "mode set by configuration", true};
    } else {
      rec.mode = select_mode(task.instruction, observe(t.scene, config_.observation_noise), rec);
    }
    if (rec.mode.mode == ThinkingMode::Fast) {
      fast_loop(t);
    } else {
      slow_loop(t);
    }
  } catch (const std::exception& e) {
    rec.predicted_status = FinishStatus::Failure;
    rec.diagnostic = e.what();
  }

  rec.final_scene = t.scene;
  rec.memory = t.monitor.memory();
  int movements = 0;
  for (const auto& step : rec.memory.steps()) {
    if (step.executed() && step.call && step.call->is_movement()) {
      ++movements;
    }
  }
  if (task.feasibility_label == Feasibility::Infeasible) {
    const auto v = evaluate_feasibility(rec.predicted_status, task.feasibility_label, movements);
    rec.evaluation_pass = v.pass;
    rec.redundant_actions = v.redundant_actions;
  } else {
    try {
      const auto eval = evaluate(t.scene, task.goal);
      rec.evaluation_pass = eval.pass;
      rec.goal_distances = eval.distances;
    } catch (const EvaluationError& e) {
      rec.evaluation_pass = false;
      rec.diagnostic = e.what();
    }
  }
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  rec.time_per_step_s = rec.steps_completed > 0 ? rec.wall_time_s / rec.steps_completed : 0.0;
  return rec;
}

namespace {

// Pre-check, execute and post-check one parsed call.
StepResult handle_call(const PrimitiveCall& call, int invocation, std::optional<std::string> intent, SceneState& scene,
                       const WorldConfig& world, ExecutionMonitor& monitor, TrialRecord& rec, const AgentConfig& config) {
  const auto verdict = monitor.pre_execution_check(call, scene, world, invocation, intent);
  if (!verdict.valid) {
    return StepResult::Recovery;
  }
  auto outcome = execute_call(call, scene, world, config.observation_noise);
  const auto& step = monitor.record_execution(call, std::move(outcome), invocation, std::move(intent), config.closed_loop);
  if (call.primitive == kFinish) {
    rec.predicted_status = step.outcome->finish->status;
    rec.finish_message = step.outcome->finish->message;
    return StepResult::Finished;
  }
  if (step.moved_in_place()) {
    ++rec.steps_completed;
  }
  const bool failed = !step.outcome->execution.ok || (step.post_check && step.post_check->deviated);
  return failed ? StepResult::Recovery : StepResult::Continue;
}

}  // namespace

void Agent::fast_loop(Trial& t) {
  auto& rec = t.record;
  const auto base = prompts_.render(prompts_.action_generation, rec.instruction, t.initial_table);
  int parse_failures = 0;
  while (true) {
    if (!t.can_invoke(config_)) {
      rec.predicted_status = FinishStatus::Failure;
      rec.finish_message = "invocation budget exhausted";
      return;
    }
    const auto resp = invoke(backend_, rec, config_, RequestKind::Action, render_context(t.monitor.memory(), base, ThinkingMode::Fast));
    const int inv = rec.invocations.back().index;
    PrimitiveCall call;
    try {
      call = parse_call(resp.text);
    } catch (const CallParseError& e) {
      t.monitor.record_parse_failure(resp.text, e.what(), inv);
      if (++parse_failures >= 2 * config_.budget) {
        rec.predicted_status = FinishStatus::Failure;
        rec.finish_message = "too many unparseable replies";
        return;
      }
      continue;
    }
    call.raw_text = resp.text;
    if (handle_call(call, inv, std::nullopt, t.scene, t.world, t.monitor, rec, config_) == StepResult::Finished) {
      return;
    }
  }
}

void Agent::slow_loop(Trial& t) {
  auto& rec = t.record;
  const auto reasoning_base = prompts_.render(prompts_.cot_reasoning, rec.instruction, t.initial_table);
  std::optional<Rationale> current;
  std::size_t moves_since_rationale = 0;

  // Stage 1: one get_reasoning invocation (plus one retry on a parse error).
  // Returns false when the trial has to stop.
  const auto reason = [&](std::string observation_text) -> bool {
    auto context = render_context(t.monitor.memory(), reasoning_base, ThinkingMode::Slow);
    if (!observation_text.empty()) {
      context.push_back({std::string(feedback_role(ThinkingMode::Slow)), "Current observation:\n" + observation_text});
    }
    for (int attempt = 0; attempt < 2; ++attempt) {
      if (!t.can_invoke(config_)) {
        rec.predicted_status = FinishStatus::Failure;
        rec.finish_message = "invocation budget exhausted";
        return false;
      }
      const auto resp = invoke(backend_, rec, config_, RequestKind::Reasoning, context);
      try {
        auto parsed = parse_rationale(resp.text);
        t.monitor.memory().add_rationale(RationaleEntry{rec.invocations.back().index, 0, observation_text, resp.text, parsed});
        current = std::move(parsed);
        moves_since_rationale = 0;
        return true;
      } catch (const RationaleParseError& e) {
        rec.warnings.push_back(fmt::format("rationale parse failed: {}", e.what()));
        context.push_back({"assistant", resp.text});
        context.push_back({std::string(feedback_role(ThinkingMode::Slow)),
                           fmt::format("The rationale could not be parsed ({}). Write all five numbered sections.", e.what())});
      }
    }
    rec.predicted_status = FinishStatus::Failure;
    rec.finish_message = "rationale could not be parsed";
    return false;
  };

  // An infeasible verdict ends the trial without another invocation.
  const auto finish_if_infeasible = [&]() -> bool {
    if (current->feasibility != Feasibility::Infeasible) {
      return false;
    }
    auto call = make_finish(FinishStatus::Infeasible, current->feasibility_justification);
    handle_call(call, rec.invocations.back().index, current->feasibility_justification, t.scene, t.world, t.monitor, rec, config_);
    return true;
  };

  if (!reason("") || finish_if_infeasible()) {
    return;
  }

  int parse_failures = 0;
  while (true) {
    if (!t.can_invoke(config_)) {
      rec.predicted_status = FinishStatus::Failure;
      rec.finish_message = "invocation budget exhausted";
      return;
    }
    const auto base = prompts_.render(prompts_.action_generation, rec.instruction, t.initial_table, plan_text(*current));
    const auto resp = invoke(backend_, rec, config_, RequestKind::Action, render_context(t.monitor.memory(), base, ThinkingMode::Slow));
    const int inv = rec.invocations.back().index;
    PrimitiveCall call;
    try {
      call = parse_call(resp.text);
    } catch (const CallParseError& e) {
      t.monitor.record_parse_failure(resp.text, e.what(), inv);
      if (++parse_failures >= 2 * config_.budget) {
        rec.predicted_status = FinishStatus::Failure;
        rec.finish_message = "too many unparseable replies";
        return;
      }
      continue;
    }
    call.raw_text = resp.text;
    std::optional<std::string> intent;
    if (call.is_movement() && moves_since_rationale < current->plan.size()) {
      intent = current->plan[moves_since_rationale];
    }
    if (call.is_movement()) {
      ++moves_since_rationale;
    }
    const auto result = handle_call(call, inv, std::move(intent), t.scene, t.world, t.monitor, rec, config_);
    if (result == StepResult::Finished) {
      return;
    }
    if (result == StepResult::Recovery && config_.closed_loop) {
      const auto fresh = observe(t.scene, config_.observation_noise, static_cast<std::uint64_t>(inv));
      if (!reason(format_observation_table(fresh)) || finish_if_infeasible()) {
        return;
      }
    }
  }
}

}  // namespace robopilot
