// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace robopilot {

/// One message as sent to a chat-completions style reasoner.
struct ChatMessage {
  std::string role;  // "system", "user" or "assistant"
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

/// Offline token estimate: ceil(characters / 4).
inline std::int64_t estimate_tokens(std::size_t characters) { return static_cast<std::int64_t>((characters + 3) / 4); }

inline std::int64_t estimate_tokens(const std::vector<ChatMessage>& messages) {
  std::size_t chars = 0;
  for (const auto& m : messages) {
    chars += m.content.size();
  }
  return estimate_tokens(chars);
}

}  // namespace robopilot
