// SPDX-License-Identifier: Apache-2.0
#include "robopilot/reasoner.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fmt/format.h>
#include <regex>

namespace robopilot {

namespace {

constexpr std::array<std::string_view, 5> kSectionHeaders = {"1. ENVIRONMENT", "2. INSTRUCTION", "3. FEASIBILITY", "4. CALCULATION",
                                                             "5. PLAN"};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Position of `header` at the start of a line, searching from `from`.
std::size_t find_header(std::string_view text, std::string_view header, std::size_t from) {
  auto pos = text.find(header, from);
  while (pos != std::string_view::npos) {
    if (pos == 0 || text[pos - 1] == '\n') {
      return pos;
    }
    pos = text.find(header, pos + 1);
  }
  return std::string_view::npos;
}

std::vector<std::string> plan_items(std::string_view body) {
  static const std::regex item(R"(^\s*(?:\d+[.)]|[-*])\s+(.*\S)\s*$)");
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    auto end = body.find('\n', pos);
    if (end == std::string_view::npos) {
      end = body.size();
    }
    const std::string line(body.substr(pos, end - pos));
    std::smatch m;
    if (std::regex_match(line, m, item)) {
      out.push_back(m[1]);
    }
    pos = end + 1;
  }
  return out;
}

ReasonerResponse offline_response(const ReasonerRequest& request, std::string text) {
  ReasonerResponse r;
  r.input_tokens = estimate_tokens(request.messages);
  r.output_tokens = estimate_tokens(text.size());
  r.text = std::move(text);
  return r;
}

// Block ids in the first observation table of the transcript.
std::vector<ObjectId> transcript_blocks(const std::vector<ChatMessage>& messages) {
  for (const auto& m : messages) {
    const auto tables = parse_observation_tables(m.content);
    if (!tables.empty()) {
      std::vector<ObjectId> out;
      for (const auto& o : tables.front().objects) {
        if (o.kind == ObjectKind::Block) {
          out.push_back(o.id);
        }
      }
      return out;
    }
  }
  return {};
}

}  // namespace

std::string_view to_string(RequestKind kind) {
  switch (kind) {
    case RequestKind::ModeSelection:
      return "mode_selection";
    case RequestKind::Reasoning:
      return "reasoning";
    case RequestKind::Action:
      return "action";
  }
  return "action";
}

std::string_view to_string(FaultMode mode) {
  switch (mode) {
    case FaultMode::LoopForever:
      return "loop_forever";
    case FaultMode::InvalidCall:
      return "invalid_call";
    case FaultMode::WrongObject:
      return "wrong_object";
    case FaultMode::Silent:
      return "silent";
  }
  return "silent";
}

BackendSpec BackendSpec::parse(std::string_view text) {
  BackendSpec spec;
  if (text == "oracle") {
    spec.kind = Kind::Oracle;
    return spec;
  }
  if (text == "http") {
    spec.kind = Kind::Http;
    return spec;
  }
  if (text.starts_with("fault:")) {
    const auto mode = text.substr(6);
    for (const auto m : {FaultMode::LoopForever, FaultMode::InvalidCall, FaultMode::WrongObject, FaultMode::Silent}) {
      if (to_string(m) == mode) {
        spec.kind = Kind::Fault;
        spec.fault = m;
        return spec;
      }
    }
    throw std::invalid_argument(fmt::format("unknown fault mode '{}'", mode));
  }
  throw std::invalid_argument(fmt::format("unknown backend '{}' (expected oracle, http or fault:<mode>)", text));
}

std::string BackendSpec::str() const {
  switch (kind) {
    case Kind::Oracle:
      return "oracle";
    case Kind::Http:
      return "http";
    case Kind::Fault:
      return "fault:" + std::string(to_string(fault));
  }
  return "oracle";
}

std::unique_ptr<Reasoner> make_backend(const BackendSpec& spec) {
  switch (spec.kind) {
    case BackendSpec::Kind::Oracle:
      return std::make_unique<OracleReasoner>();
    case BackendSpec::Kind::Fault:
      return std::make_unique<FaultReasoner>(spec.fault);
    case BackendSpec::Kind::Http:
      return std::make_unique<HttpReasoner>(HttpBackendConfig::from_environment(spec.model));
  }
  throw BackendInitError("unknown backend kind");
}

Rationale parse_rationale(std::string_view text) {
  std::array<std::size_t, 5> starts{};
  std::size_t from = 0;
  for (std::size_t i = 0; i < kSectionHeaders.size(); ++i) {
    const auto pos = find_header(text, kSectionHeaders[i], from);
    if (pos == std::string_view::npos) {
      throw RationaleParseError(fmt::format("missing section {}", i + 1));
    }
    starts[i] = pos;
    from = pos + kSectionHeaders[i].size();
  }
  const auto body = [&](std::size_t i) {
    const auto b = starts[i] + kSectionHeaders[i].size();
    const auto e = i + 1 < starts.size() ? starts[i + 1] : text.size();
    return text.substr(b, e - b);
  };
  Rationale r;
  r.env_status = trim(body(0));
  r.instruction_restatement = trim(body(1));
  r.feasibility_justification = trim(body(2));
  const auto feas = lower(r.feasibility_justification);
  if (feas.find("infeasible") != std::string::npos || feas.find("not feasible") != std::string::npos) {
    r.feasibility = Feasibility::Infeasible;
  } else if (feas.find("feasible") != std::string::npos) {
    r.feasibility = Feasibility::Feasible;
  } else {
    throw RationaleParseError("unparseable feasibility");
  }
  r.calculations = trim(body(3));
  r.plan = plan_items(body(4));
  return r;
}

std::string format_rationale(const Rationale& r) {
  std::string out;
  out += fmt::format("{}\n{}\n\n", kSectionHeaders[0], r.env_status);
  out += fmt::format("{}\n{}\n\n", kSectionHeaders[1], r.instruction_restatement);
  std::string feas = r.feasibility_justification;
  const auto label = std::string(to_string(r.feasibility));
  if (lower(feas).find(label) != 0) {
    feas = feas.empty() ? label : label + ": " + feas;
  }
  out += fmt::format("{}\n{}\n\n", kSectionHeaders[2], feas);
  out += fmt::format("{}\n{}\n\n", kSectionHeaders[3], r.calculations.empty() ? "none" : r.calculations);
  out += fmt::format("{}\n", kSectionHeaders[4]);
  for (std::size_t i = 0; i < r.plan.size(); ++i) {
    out += fmt::format("{}. {}\n", i + 1, r.plan[i]);
  }
  return out;
}

std::optional<SelectorAnswer> parse_selector_answer(std::string_view text) {
  static const std::regex difficulty_re(R"(DIFFICULTY\s*[:=]\s*([0-9]+(?:\.[0-9]+)?))", std::regex::icase);
  static const std::regex mode_re(R"(MODE\s*[:=]\s*(fast|slow))", std::regex::icase);
  const std::string s(text);
  std::smatch m;
  if (!std::regex_search(s, m, difficulty_re)) {
    return std::nullopt;
  }
  SelectorAnswer a;
  const std::string num = m[1];
  std::from_chars(num.data(), num.data() + num.size(), a.difficulty);
  if (a.difficulty < 1.0 || a.difficulty > 5.0) {
    return std::nullopt;
  }
  if (std::regex_search(s, m, mode_re)) {
    a.mode = lower(m[1]);
  }
  return a;
}

ReasonerResponse FaultReasoner::complete(const ReasonerRequest& request) {
  if (mode_ == FaultMode::Silent) {
    return offline_response(request, "");
  }
  switch (request.kind) {
    case RequestKind::ModeSelection:
      return offline_response(request, "DIFFICULTY: 3.0\nMODE: slow");
    case RequestKind::Reasoning: {
      Rationale r;
      r.env_status = "Objects are on the table.";
      r.instruction_restatement = "Carry out the instruction.";
      r.feasibility_justification = "feasible: all referenced objects appear present";
      r.calculations = "none";
      r.plan = {"inspect the scene", "act on it"};
      return offline_response(request, format_rationale(r));
    }
    case RequestKind::Action:
      break;
  }
  switch (mode_) {
    case FaultMode::LoopForever:
      return offline_response(request, serialize_call(make_get_observation()));
    case FaultMode::InvalidCall:
      return offline_response(request, serialize_call(make_pick_place_at(ObjectId("blk_invisible"), Vec3{0.0, 0.0, kTableBlockZ})));
    case FaultMode::WrongObject: {
      const bool moved = std::any_of(request.messages.begin(), request.messages.end(), [](const ChatMessage& m) {
        return m.role == "assistant" && m.content.find(kPickPlaceOn) != std::string::npos;
      });
      const auto blocks = transcript_blocks(request.messages);
      if (moved || blocks.size() < 2) {
        return offline_response(request, serialize_call(make_finish(FinishStatus::Success, "done")));
      }
      return offline_response(request, serialize_call(make_pick_place_on(blocks[0], blocks[1])));
    }
    case FaultMode::Silent:
      break;
  }
  return offline_response(request, "");
}

}  // namespace robopilot
