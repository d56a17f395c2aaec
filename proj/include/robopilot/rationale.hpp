// SPDX-License-Identifier: Apache-2.0
//
// Five-part rationale produced by the get_reasoning stage. Wire format is a
// block of text with these headers, in order, each on its own line:
//
//   1. ENVIRONMENT
//   2. INSTRUCTION
//   3. FEASIBILITY
//   4. CALCULATION
//   5. PLAN
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace robopilot {

enum class Feasibility { Feasible, Infeasible };

struct Rationale {
  std::string env_status;
  std::string instruction_restatement;
  Feasibility feasibility = Feasibility::Feasible;
  std::string feasibility_justification;
  std::string calculations;
  std::vector<std::string> plan;

  friend bool operator==(const Rationale&, const Rationale&) = default;
};

class RationaleParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Throws RationaleParseError("missing section <n>") or
/// RationaleParseError("unparseable feasibility").
Rationale parse_rationale(std::string_view text);

/// Renders a rationale in the wire format parse_rationale accepts.
std::string format_rationale(const Rationale& rationale);

}  // namespace robopilot
