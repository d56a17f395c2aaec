// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "robopilot/monitor.hpp"

namespace robopilot {

/// A prompt asset: a system part and a user part. In the file they are
/// introduced by `[system]` and `[user]` lines.
struct PromptTemplate {
  std::string system;
  std::string user;

  static PromptTemplate parse(const std::string& text);
};

/// Substitutes {instruction}, {observation_table}, {primitive_docs} and
/// {rationale}. Other braces are left alone.
std::string fill_placeholders(const std::string& text, const std::map<std::string, std::string>& values);

struct PromptSet {
  PromptTemplate mode_selector;
  PromptTemplate cot_reasoning;
  PromptTemplate action_generation;

  /// Templates compiled into the library from prompts/.
  static const PromptSet& builtin();
  /// Loads mode_selector.txt, cot_reasoning.txt and action_generation.txt.
  static PromptSet load(const std::filesystem::path& dir);

  BasePrompt render(const PromptTemplate& tmpl, const std::string& instruction, const std::string& observation_table,
                    const std::string& rationale = "") const;
};

}  // namespace robopilot
