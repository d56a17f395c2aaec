// SPDX-License-Identifier: Apache-2.0
#include <chrono>
#include <cstdlib>
#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>
#include <thread>

#include "robopilot/reasoner.hpp"

namespace robopilot {

namespace {

constexpr std::string_view kDefaultBaseUrl = "https://api.openai.com/v1";

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw BackendInitError(fmt::format("REASONER_BASE_URL must start with http:// or https:// (got '{}')", url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') {
    out.path.pop_back();
  }
  return out;
}

bool retriable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

HttpBackendConfig HttpBackendConfig::from_environment(std::string model) {
  HttpBackendConfig config;
  config.model = std::move(model);
  const char* key = std::getenv("REASONER_API_KEY");
  if (key == nullptr || *key == '\0') {
    throw BackendInitError("REASONER_API_KEY is not set");
  }
  config.api_key = key;
  const char* base = std::getenv("REASONER_BASE_URL");
  config.base_url = base != nullptr && *base != '\0' ? std::string(base) : std::string(kDefaultBaseUrl);
  return config;
}

HttpReasoner::HttpReasoner(HttpBackendConfig config) : config_(std::move(config)) {
  const auto url = split_url(config_.base_url);
  path_prefix_ = url.path;
  auto client = std::make_shared<httplib::Client>(url.origin);
  const auto timeout = std::chrono::duration<double>(config_.timeout_s);
  client->set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client->set_connection_timeout(std::chrono::seconds(30));
  client->set_bearer_token_auth(config_.api_key);
  transport_ = [client](const std::string& path, const std::string& body) {
    HttpReply reply;
    auto res = client->Post(path, body, "application/json");
    if (!res) {
      reply.transport_error = httplib::to_string(res.error());
      return reply;
    }
    reply.status = res->status;
    reply.body = res->body;
    return reply;
  };
  sleeper_ = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
}

HttpReasoner::HttpReasoner(HttpBackendConfig config, Transport transport, Sleeper sleeper)
    : config_(std::move(config)), transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
  path_prefix_ = split_url(config_.base_url).path;
}

std::string HttpReasoner::request_body(const ReasonerRequest& request) const {
  nlohmann::ordered_json body;
  body["model"] = config_.model;
  body["messages"] = nlohmann::json::array();
  for (const auto& m : request.messages) {
    body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  }
  body["temperature"] = request.temperature;
  return body.dump();
}

ReasonerResponse parse_completion_body(const std::string& body, std::int64_t fallback_input_tokens) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw ReasonerError("malformed provider response: not JSON", false);
  }
  const auto* content = [&]() -> const nlohmann::json* {
    if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
      return nullptr;
    }
    const auto& choice = doc["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content")) {
      return nullptr;
    }
    return &choice["message"]["content"];
  }();
  if (content == nullptr || !(content->is_string() || content->is_null())) {
    throw ReasonerError("malformed provider response: missing choices[0].message.content", false);
  }
  ReasonerResponse r;
  r.text = content->is_string() ? content->get<std::string>() : std::string();
  r.input_tokens = fallback_input_tokens;
  r.output_tokens = estimate_tokens(r.text.size());
  if (doc.contains("usage") && doc["usage"].is_object()) {
    const auto& usage = doc["usage"];
    if (usage.contains("prompt_tokens") && usage["prompt_tokens"].is_number_integer()) {
      r.input_tokens = usage["prompt_tokens"].get<std::int64_t>();
    }
    if (usage.contains("completion_tokens") && usage["completion_tokens"].is_number_integer()) {
      r.output_tokens = usage["completion_tokens"].get<std::int64_t>();
    }
  }
  return r;
}

ReasonerResponse HttpReasoner::complete(const ReasonerRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  const std::string body = request_body(request);
  const std::string path = path_prefix_ + "/chat/completions";
  double backoff = config_.initial_backoff_s;
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      sleeper_(backoff);
      backoff *= 2.0;
    }
    const HttpReply reply = transport_(path, body);
    if (reply.transport_error) {
      last_error = "connection error: " + *reply.transport_error;
      continue;
    }
    if (retriable_status(reply.status)) {
      last_error = fmt::format("provider returned HTTP {}", reply.status);
      continue;
    }
    if (reply.status < 200 || reply.status >= 300) {
      throw ReasonerError(fmt::format("provider returned HTTP {}", reply.status), false);
    }
    auto r = parse_completion_body(reply.body, estimate_tokens(request.messages));
    r.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  }
  throw ReasonerError(fmt::format("{} after {} retries", last_error, config_.max_retries), true);
}

}  // namespace robopilot
