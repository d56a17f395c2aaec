// SPDX-License-Identifier: Apache-2.0
#include "robopilot/prompts.hpp"

#include <fmt/format.h>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace robopilot {

namespace {

const std::vector<std::pair<std::string, std::string>>& embedded() {
  static const std::vector<std::pair<std::string, std::string>> prompts = {
#include "embedded_prompts.inc"
  };
  return prompts;
}

std::string strip_trailing_newlines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) {
    s.pop_back();
  }
  return s;
}

PromptTemplate embedded_template(const std::string& name) {
  for (const auto& [key, body] : embedded()) {
    if (key == name) {
      return PromptTemplate::parse(body);
    }
  }
  throw std::runtime_error(fmt::format("no embedded prompt named {}", name));
}

}  // namespace

PromptTemplate PromptTemplate::parse(const std::string& text) {
  const std::string sys_tag = "[system]\n";
  const std::string user_tag = "\n[user]\n";
  const auto sys = text.find(sys_tag);
  const auto user = text.find(user_tag);
  if (sys == std::string::npos || user == std::string::npos || user < sys) {
    throw std::runtime_error("prompt template needs a [system] section followed by a [user] section");
  }
  PromptTemplate t;
  t.system = strip_trailing_newlines(text.substr(sys + sys_tag.size(), user - sys - sys_tag.size()));
  t.user = strip_trailing_newlines(text.substr(user + user_tag.size()));
  return t;
}

std::string fill_placeholders(const std::string& text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find('{', pos);
    if (open == std::string::npos) {
      out.append(text, pos, std::string::npos);
      break;
    }
    out.append(text, pos, open - pos);
    const auto close = text.find('}', open);
    if (close != std::string::npos) {
      const auto it = values.find(text.substr(open + 1, close - open - 1));
      if (it != values.end()) {
        out += it->second;
        pos = close + 1;
        continue;
      }
    }
    out += '{';
    pos = open + 1;
  }
  return out;
}

const PromptSet& PromptSet::builtin() {
  static const PromptSet set{embedded_template("mode_selector"), embedded_template("cot_reasoning"),
                             embedded_template("action_generation")};
  return set;
}

PromptSet PromptSet::load(const std::filesystem::path& dir) {
  const auto read = [&](const char* name) {
    const auto path = dir / fmt::format("{}.txt", name);
    std::ifstream in(path);
    if (!in) {
      throw std::runtime_error(fmt::format("cannot read prompt template {}", path.string()));
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return PromptTemplate::parse(ss.str());
  };
  return PromptSet{read("mode_selector"), read("cot_reasoning"), read("action_generation")};
}

BasePrompt PromptSet::render(const PromptTemplate& tmpl, const std::string& instruction, const std::string& observation_table,
                             const std::string& rationale) const {
  const std::map<std::string, std::string> values = {
      {"instruction", instruction},
      {"observation_table", strip_trailing_newlines(observation_table)},
      {"primitive_docs", strip_trailing_newlines(primitive_docs())},
      {"rationale", rationale},
  };
  return BasePrompt{strip_trailing_newlines(fill_placeholders(tmpl.system, values)), fill_placeholders(tmpl.user, values)};
}

}  // namespace robopilot
