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

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace factforge {

enum class Role { kSystem, kUser, kAssistant };

std::string_view role_name(Role role);

struct ChatMessage {
  Role role = Role::kUser;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct CompletionRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 512;

  // Throws std::invalid_argument: messages must be non-empty, the first
  // non-system message must be a user turn, temperature >= 0, max_tokens > 0.
  void validate() const;
  bool operator==(const CompletionRequest&) const = default;
};

enum class FinishReason { kStop, kLength, kError };

std::string_view finish_reason_name(FinishReason reason);

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct CompletionResult {
  std::string text;
  FinishReason finish_reason = FinishReason::kStop;
  TokenUsage usage;
  double latency_ms = 0.0;
  bool cache_hit = false;
};

// Canonical JSON of the fields that identify a request. Object keys are
// sorted and numbers use a fixed shortest round-trip form, so the encoding is
// identical across runs and platforms.
std::string canonical_request(const CompletionRequest& request);

// SHA-256 of canonical_request(); names the fixture file.
std::string request_key(const CompletionRequest& request);

// Wire-level chat completion. Throws TransportError carrying the HTTP status
// (0 when no response arrived).
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual CompletionResult send(const CompletionRequest& request) = 0;
};

struct HttpTransportOptions {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string api_key;
  int timeout_ms = 60000;

  // Reads FACTFORGE_LLM_ENDPOINT and FACTFORGE_LLM_API_KEY.
  static HttpTransportOptions from_environment();
};

// OpenAI-compatible /chat/completions endpoint.
class HttpChatTransport : public ChatTransport {
 public:
  explicit HttpChatTransport(HttpTransportOptions options);
  CompletionResult send(const CompletionRequest& request) override;

 private:
  HttpTransportOptions options_;
};

enum class ClientMode { kLive, kRecord, kReplay };

ClientMode parse_client_mode(std::string_view text);
std::string_view client_mode_name(ClientMode mode);

struct RetryPolicy {
  int max_attempts = 5;
  int initial_backoff_ms = 500;
  double backoff_multiplier = 2.0;
  int max_backoff_ms = 30000;
};

// Status codes worth another attempt: rate limiting, server errors, and
// connection failures (status 0).
bool is_retryable_status(int status);

inline constexpr int kFixtureVersion = 1;

// One JSON file per request key: <dir>/<key>.json holding the canonical
// request and the raw response. Credentials never enter the store.
class FixtureStore {
 public:
  explicit FixtureStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::filesystem::path path_for(std::string_view key) const;
  // Throws CorruptionError if the stored request does not match the key.
  std::optional<CompletionResult> load(const CompletionRequest& request) const;
  void save(const CompletionRequest& request, const CompletionResult& result) const;

 private:
  std::filesystem::path dir_;
};

class LlmClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  LlmClient(ClientMode mode, std::filesystem::path fixture_dir,
            std::shared_ptr<ChatTransport> transport, RetryPolicy retry = {},
            size_t max_in_flight = 4);

  // live: transport with exponential backoff; record: live plus fixture
  // write; replay: fixture lookup only (FixtureMissingError on a miss).
  CompletionResult complete(const CompletionRequest& request);

  ClientMode mode() const { return mode_; }
  std::vector<CompletionResult> log() const;
  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

 private:
  CompletionResult call_with_retries(const CompletionRequest& request);

  ClientMode mode_;
  FixtureStore store_;
  std::shared_ptr<ChatTransport> transport_;
  RetryPolicy retry_;
  std::counting_semaphore<1024> in_flight_;
  Sleeper sleeper_;
  mutable std::mutex log_mu_;
  std::vector<CompletionResult> log_;
};

struct CostReport {
  std::int64_t total_requests = 0;
  std::int64_t total_prompt_tokens = 0;
  std::int64_t total_completion_tokens = 0;
  std::int64_t cache_hits = 0;
};

CostReport cost_report(std::span<const CompletionResult> log);
nlohmann::ordered_json cost_report_to_json(const CostReport& report);

}  // namespace factforge
