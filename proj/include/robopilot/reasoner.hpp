// SPDX-License-Identifier: Apache-2.0
//
// Reasoner backends. A backend turns a chat transcript into one reply; the
// agent decides what the reply means based on the request kind.
#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "robopilot/chat.hpp"
#include "robopilot/primitives.hpp"
#include "robopilot/rationale.hpp"
#include "robopilot/tasks.hpp"

namespace robopilot {

enum class RequestKind { ModeSelection, Reasoning, Action };

std::string_view to_string(RequestKind kind);

struct ReasonerRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  RequestKind kind = RequestKind::Action;
  int invocation_index = 0;
  int budget = 20;
};

struct ReasonerResponse {
  std::string text;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  double latency_s = 0.0;
};

class ReasonerError : public std::runtime_error {
public:
  ReasonerError(const std::string& what, bool retriable) : std::runtime_error(what), retriable_(retriable) {}
  bool retriable() const { return retriable_; }

private:
  bool retriable_;
};

/// Raised when a backend cannot be constructed (e.g. missing credentials).
class BackendInitError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class Reasoner {
public:
  virtual ~Reasoner() = default;
  virtual ReasonerResponse complete(const ReasonerRequest& request) = 0;
  virtual std::string name() const = 0;
};

enum class FaultMode { LoopForever, InvalidCall, WrongObject, Silent };

std::string_view to_string(FaultMode mode);

struct BackendSpec {
  enum class Kind { Oracle, Http, Fault };
  Kind kind = Kind::Oracle;
  FaultMode fault = FaultMode::LoopForever;
  std::string model = "gpt-4o";

  /// "oracle", "http", "fault:<mode>". Throws std::invalid_argument.
  static BackendSpec parse(std::string_view text);
  std::string str() const;
};

/// Builds a backend. The http backend reads its credentials from the
/// environment and throws BackendInitError naming any missing variable.
std::unique_ptr<Reasoner> make_backend(const BackendSpec& spec);

// Offline backends -----------------------------------------------------------

/// Parses "DIFFICULTY: <x>" and "MODE: <fast|slow>" from a selector reply.
struct SelectorAnswer {
  double difficulty = 3.0;
  std::optional<std::string> mode;
};
std::optional<SelectorAnswer> parse_selector_answer(std::string_view text);

/// Sequence of calls the oracle would emit from `observation` to reach
/// `goal`, plus its rationale. Moves already within tolerance are skipped and
/// stacked goals are ordered bottom-up.
struct OraclePlan {
  std::vector<PrimitiveCall> calls;
  Rationale rationale;
  bool feasible = true;
};

OraclePlan oracle_plan(const Observation& observation, const GoalSpec& goal);

/// Reads the task from the transcript's instruction and observation tables
/// and answers like a perfect planner. Stateless across calls; resolved
/// instructions are cached behind a mutex.
class OracleReasoner : public Reasoner {
public:
  ReasonerResponse complete(const ReasonerRequest& request) override;
  std::string name() const override { return "oracle"; }

private:
  std::optional<Interpretation> interpret(const std::string& instruction, const Observation& initial);

  std::mutex mutex_;
  std::map<std::string, std::optional<Interpretation>> cache_;
};

class FaultReasoner : public Reasoner {
public:
  explicit FaultReasoner(FaultMode mode) : mode_(mode) {}
  ReasonerResponse complete(const ReasonerRequest& request) override;
  std::string name() const override { return "fault:" + std::string(to_string(mode_)); }

private:
  FaultMode mode_;
};

// HTTP backend ----------------------------------------------------------------

struct HttpBackendConfig {
  std::string base_url;
  std::string model = "gpt-4o";
  std::string api_key;
  int max_retries = 3;
  double initial_backoff_s = 1.0;
  double timeout_s = 120.0;

  /// Reads REASONER_API_KEY and REASONER_BASE_URL.
  static HttpBackendConfig from_environment(std::string model);
};

/// What the transport hands back: status code, body, or a connection error.
struct HttpReply {
  int status = 0;
  std::string body;
  std::optional<std::string> transport_error;
};

/// OpenAI-compatible chat completions client.
class HttpReasoner : public Reasoner {
public:
  using Transport = std::function<HttpReply(const std::string& path, const std::string& body)>;
  using Sleeper = std::function<void(double seconds)>;

  explicit HttpReasoner(HttpBackendConfig config);
  /// For tests: inject the transport and the backoff sleeper.
  HttpReasoner(HttpBackendConfig config, Transport transport, Sleeper sleeper);

  ReasonerResponse complete(const ReasonerRequest& request) override;
  std::string name() const override { return "http:" + config_.model; }

  /// Request body for the given messages (never contains credentials).
  std::string request_body(const ReasonerRequest& request) const;

private:
  HttpBackendConfig config_;
  std::string path_prefix_;
  Transport transport_;
  Sleeper sleeper_;
};

/// Parses a chat-completions response body. Throws ReasonerError (hard).
ReasonerResponse parse_completion_body(const std::string& body, std::int64_t fallback_input_tokens);

}  // namespace robopilot
