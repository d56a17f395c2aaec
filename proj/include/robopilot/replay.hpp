// SPDX-License-Identifier: Apache-2.0
//
// Re-simulates a recorded trial from its initial scene snapshot and checks
// every executed step and the final scene against the record.
#pragma once

#include <optional>
#include <string>

#include "robopilot/serialization.hpp"

namespace robopilot {

struct ReplayResult {
  bool match = true;
  /// Trace index of the first step that diverged; nullopt for a final-scene
  /// mismatch or a match.
  std::optional<int> divergent_step;
  std::string message;
  int steps_replayed = 0;
};

/// Throws SerializationError when the record is malformed.
ReplayResult replay_trial(const Json& trial);

}  // namespace robopilot
