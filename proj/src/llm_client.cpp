/*
 * Copyright 2026 The factforge Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "factforge/llm_client.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "factforge/digest.hpp"
#include "factforge/errors.hpp"
#include "factforge/io.hpp"
#include "factforge/text.hpp"
#include "http_endpoint.hpp"
#include "httplib.h"

namespace factforge {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view role_name(Role role) {
  switch (role) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

namespace {

FinishReason parse_finish_reason(std::string_view text) {
  if (text == "stop") return FinishReason::kStop;
  if (text == "length") return FinishReason::kLength;
  return FinishReason::kError;
}

json request_json(const CompletionRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages)
    messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
  return {{"model_id", request.model_id},
          {"messages", std::move(messages)},
          {"temperature", request.temperature},
          {"max_tokens", request.max_tokens}};
}

}  // namespace

void CompletionRequest::validate() const {
  if (messages.empty()) throw std::invalid_argument("request has no messages");
  auto first = std::find_if(messages.begin(), messages.end(),
                            [](const ChatMessage& m) { return m.role != Role::kSystem; });
  if (first == messages.end() || first->role != Role::kUser)
    throw std::invalid_argument("first non-system message must be a user turn");
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
  if (max_tokens <= 0) throw std::invalid_argument("max_tokens must be positive");
}

std::string_view finish_reason_name(FinishReason reason) {
  switch (reason) {
    case FinishReason::kStop: return "stop";
    case FinishReason::kLength: return "length";
    case FinishReason::kError: return "error";
  }
  return "error";
}

std::string canonical_request(const CompletionRequest& request) {
  return request_json(request).dump();
}

std::string request_key(const CompletionRequest& request) {
  return sha256_hex(canonical_request(request));
}

HttpTransportOptions HttpTransportOptions::from_environment() {
  HttpTransportOptions options;
  if (const char* endpoint = std::getenv("FACTFORGE_LLM_ENDPOINT"))
    options.endpoint = endpoint;
  if (const char* key = std::getenv("FACTFORGE_LLM_API_KEY")) options.api_key = key;
  return options;
}

HttpChatTransport::HttpChatTransport(HttpTransportOptions options)
    : options_(std::move(options)) {
  detail::split_endpoint(options_.endpoint);
}

CompletionResult HttpChatTransport::send(const CompletionRequest& request) {
  const auto endpoint = detail::split_endpoint(options_.endpoint);
  json body = {{"model", request.model_id},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens},
               {"messages", json::array()}};
  for (const auto& m : request.messages)
    body["messages"].push_back({{"role", role_name(m.role)}, {"content", m.content}});

  httplib::Client client(endpoint.base);
  const auto timeout = std::chrono::milliseconds(options_.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  httplib::Headers headers;
  if (!options_.api_key.empty())
    headers.emplace("Authorization", "Bearer " + options_.api_key);

  auto res = client.Post(endpoint.path, headers, body.dump(), "application/json");
  if (!res) throw TransportError("no response from " + endpoint.base, 0);
  if (res->status != 200)
    throw TransportError("chat endpoint returned HTTP " + std::to_string(res->status),
                         res->status);
  json reply = json::parse(res->body, nullptr, false);
  CompletionResult result;
  try {
    const json& choice = reply.at("choices").at(0);
    result.text = choice.at("message").at("content").get<std::string>();
    if (choice.contains("finish_reason") && choice["finish_reason"].is_string())
      result.finish_reason = parse_finish_reason(choice["finish_reason"].get<std::string>());
    if (reply.contains("usage") && reply["usage"].is_object()) {
      result.usage.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
      result.usage.completion_tokens = reply["usage"].value("completion_tokens", 0);
    }
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed chat completion body: ") + e.what(),
                         res->status);
  }
  return result;
}

ClientMode parse_client_mode(std::string_view text) {
  const std::string key = normalize_text(text);
  if (key == "live") return ClientMode::kLive;
  if (key == "record") return ClientMode::kRecord;
  if (key == "replay") return ClientMode::kReplay;
  throw ConfigError("unknown client mode '" + std::string(text) + "'");
}

std::string_view client_mode_name(ClientMode mode) {
  switch (mode) {
    case ClientMode::kLive: return "live";
    case ClientMode::kRecord: return "record";
    case ClientMode::kReplay: return "replay";
  }
  return "replay";
}

bool is_retryable_status(int status) {
  return status == 0 || status == 408 || status == 429 || status >= 500;
}

std::filesystem::path FixtureStore::path_for(std::string_view key) const {
  return dir_ / (std::string(key) + ".json");
}

std::optional<CompletionResult> FixtureStore::load(const CompletionRequest& request) const {
  const std::string key = request_key(request);
  const auto path = path_for(key);
  if (!std::filesystem::exists(path)) return std::nullopt;
  json fixture = json::parse(read_file(path), nullptr, false);
  if (fixture.is_discarded()) throw CorruptionError("unparseable fixture " + path.string());
  CompletionResult result;
  try {
    if (fixture.at("fixture_version").get<int>() != kFixtureVersion)
      throw CorruptionError("unsupported fixture version in " + path.string());
    if (fixture.at("request") != request_json(request))
      throw CorruptionError("fixture " + path.string() + " does not match its key");
    const json& response = fixture.at("response");
    result.text = response.at("text").get<std::string>();
    result.finish_reason = parse_finish_reason(response.at("finish_reason").get<std::string>());
    result.usage.prompt_tokens = response.at("usage").at("prompt_tokens").get<std::int64_t>();
    result.usage.completion_tokens =
        response.at("usage").at("completion_tokens").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw CorruptionError("malformed fixture " + path.string() + ": " + e.what());
  }
  result.cache_hit = true;
  return result;
}

void FixtureStore::save(const CompletionRequest& request,
                        const CompletionResult& result) const {
  const std::string key = request_key(request);
  ordered_json fixture;
  fixture["fixture_version"] = kFixtureVersion;
  fixture["key"] = key;
  fixture["request"] = request_json(request);
  fixture["response"] = {
      {"text", result.text},
      {"finish_reason", finish_reason_name(result.finish_reason)},
      {"usage",
       {{"prompt_tokens", result.usage.prompt_tokens},
        {"completion_tokens", result.usage.completion_tokens}}}};
  atomic_write_file(path_for(key), fixture.dump(2) + "\n");
}

LlmClient::LlmClient(ClientMode mode, std::filesystem::path fixture_dir,
                     std::shared_ptr<ChatTransport> transport, RetryPolicy retry,
                     size_t max_in_flight)
    : mode_(mode),
      store_(std::move(fixture_dir)),
      transport_(std::move(transport)),
      retry_(retry),
      in_flight_(static_cast<std::ptrdiff_t>(std::clamp<size_t>(max_in_flight, 1, 1024))),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  if (mode_ != ClientMode::kReplay && !transport_)
    throw ConfigError(std::string(client_mode_name(mode_)) + " mode requires a transport");
  if (retry_.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
}

CompletionResult LlmClient::call_with_retries(const CompletionRequest& request) {
  double delay_ms = retry_.initial_backoff_ms;
  int last_status = 0;
  std::string last_message;
  for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
    try {
      in_flight_.acquire();
      const auto start = std::chrono::steady_clock::now();
      CompletionResult result;
      try {
        result = transport_->send(request);
      } catch (...) {
        in_flight_.release();
        throw;
      }
      in_flight_.release();
      result.latency_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - start)
                              .count();
      result.cache_hit = false;
      return result;
    } catch (const TransportError& e) {
      last_status = e.status();
      last_message = e.what();
      if (!is_retryable_status(e.status()) || attempt == retry_.max_attempts) break;
      sleeper_(std::chrono::milliseconds(static_cast<long long>(delay_ms)));
      delay_ms = std::min<double>(delay_ms * retry_.backoff_multiplier, retry_.max_backoff_ms);
    }
  }
  throw TransportError("completion failed after retries (last status " +
                           std::to_string(last_status) + "): " + last_message,
                       last_status);
}

CompletionResult LlmClient::complete(const CompletionRequest& request) {
  request.validate();
  CompletionResult result;
  switch (mode_) {
    case ClientMode::kReplay: {
      auto hit = store_.load(request);
      if (!hit) throw FixtureMissingError(request_key(request));
      result = std::move(*hit);
      break;
    }
    case ClientMode::kLive:
      result = call_with_retries(request);
      break;
    case ClientMode::kRecord:
      result = call_with_retries(request);
      store_.save(request, result);
      break;
  }
  std::lock_guard lock(log_mu_);
  log_.push_back(result);
  return result;
}

std::vector<CompletionResult> LlmClient::log() const {
  std::lock_guard lock(log_mu_);
  return log_;
}

CostReport cost_report(std::span<const CompletionResult> log) {
  CostReport report;
  for (const auto& r : log) {
    ++report.total_requests;
    report.total_prompt_tokens += r.usage.prompt_tokens;
    report.total_completion_tokens += r.usage.completion_tokens;
    if (r.cache_hit) ++report.cache_hits;
  }
  return report;
}

ordered_json cost_report_to_json(const CostReport& report) {
  ordered_json j;
  j["total_requests"] = report.total_requests;
  j["total_prompt_tokens"] = report.total_prompt_tokens;
  j["total_completion_tokens"] = report.total_completion_tokens;
  j["cache_hits"] = report.cache_hits;
  return j;
}

}  // namespace factforge
