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

#include <atomic>
#include <thread>

#include "doctest.h"
#include "factforge/errors.hpp"
#include "factforge/io.hpp"
#include "factforge/llm_client.hpp"
#include "httplib.h"
#include "json.hpp"
#include "support.hpp"

using namespace factforge;
using nlohmann::json;

namespace {

CompletionRequest request(const std::string& text) {
  CompletionRequest r;
  r.model_id = "gpt-3.5-turbo";
  r.messages = {{Role::kSystem, "be brief"}, {Role::kUser, text}};
  return r;
}

class CountingTransport : public ChatTransport {
 public:
  std::atomic<int> calls{0};
  CompletionResult send(const CompletionRequest& r) override {
    ++calls;
    CompletionResult out;
    out.text = "echo: " + r.messages.back().content + "\nAnswer: yes";
    out.usage = {100, 50};
    return out;
  }
};

class FailingTransport : public ChatTransport {
 public:
  std::vector<int> statuses;  // consumed front to back, then success
  int calls = 0;
  CompletionResult send(const CompletionRequest&) override {
    if (calls < static_cast<int>(statuses.size())) {
      const int status = statuses[calls++];
      throw TransportError("fail", status);
    }
    ++calls;
    CompletionResult out;
    out.text = "ok";
    return out;
  }
};

// Local OpenAI-shaped endpoint; answers 429 for the first `throttle` calls.
struct LocalChatServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> calls{0};
  int throttle = 0;

  LocalChatServer() {
    server.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                               httplib::Response& res) {
      const int n = ++calls;
      if (n <= throttle) {
        res.status = 429;
        return;
      }
      const json body = json::parse(req.body);
      const std::string last = body["messages"].back()["content"];
      const json reply = {
          {"choices", {{{"message", {{"role", "assistant"}, {"content", "seen " + last}}},
                        {"finish_reason", "stop"}}}},
          {"usage", {{"prompt_tokens", 7}, {"completion_tokens", 3}}}};
      res.set_content(reply.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LocalChatServer() {
    server.stop();
    thread.join();
  }
  std::shared_ptr<ChatTransport> transport() const {
    HttpTransportOptions o;
    o.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    o.api_key = "test-key";
    o.timeout_ms = 5000;
    return std::make_shared<HttpChatTransport>(o);
  }
};

RetryPolicy fast_retry() {
  RetryPolicy r;
  r.initial_backoff_ms = 1;
  r.max_backoff_ms = 2;
  return r;
}

}  // namespace

TEST_CASE("request key is stable and sensitive to content") {
  CHECK(request_key(request("a")) == request_key(request("a")));
  CHECK(request_key(request("a")) != request_key(request("b")));
  auto hot = request("a");
  hot.temperature = 0.7;
  CHECK(request_key(hot) != request_key(request("a")));
  CHECK(request_key(request("a")).size() == 64);
}

TEST_CASE("record then replay returns byte-identical text without the transport") {
  testing::TempDir dir;
  auto transport = std::make_shared<CountingTransport>();
  LlmClient recorder(ClientMode::kRecord, dir.path(), transport);
  const auto recorded = recorder.complete(request("héllo\nworld \"quoted\""));
  CHECK(transport->calls == 1);
  CHECK_FALSE(recorded.cache_hit);

  LlmClient replayer(ClientMode::kReplay, dir.path(), nullptr);
  const auto replayed = replayer.complete(request("héllo\nworld \"quoted\""));
  CHECK(replayed.text == recorded.text);
  CHECK(replayed.cache_hit);
  CHECK(replayed.usage.prompt_tokens == 100);
}

TEST_CASE("replay miss is a fixture-missing error") {
  testing::TempDir dir;
  LlmClient replayer(ClientMode::kReplay, dir.path(), nullptr);
  CHECK_THROWS_AS(replayer.complete(request("never recorded")), FixtureMissingError);
}

TEST_CASE("replay never touches the network") {
  testing::TempDir dir;
  {
    LocalChatServer server;
    LlmClient recorder(ClientMode::kRecord, dir.path(), server.transport());
    recorder.complete(request("x"));
    CHECK(server.calls == 1);
  }
  // Server gone; a transport pointed at a closed port would fail.
  HttpTransportOptions dead;
  dead.endpoint = "http://127.0.0.1:1/v1/chat/completions";
  dead.timeout_ms = 200;
  LlmClient replayer(ClientMode::kReplay, dir.path(), std::make_shared<HttpChatTransport>(dead));
  CHECK(replayer.complete(request("x")).text == "seen x");
}

TEST_CASE("tampered fixture is detected") {
  testing::TempDir dir;
  auto transport = std::make_shared<CountingTransport>();
  LlmClient recorder(ClientMode::kRecord, dir.path(), transport);
  const auto req = request("tamper");
  recorder.complete(req);
  const auto path = FixtureStore(dir.path()).path_for(request_key(req));
  json j = json::parse(read_file(path));
  j["request"]["messages"][1]["content"] = "something else";
  atomic_write_file(path, j.dump(2));
  LlmClient replayer(ClientMode::kReplay, dir.path(), nullptr);
  CHECK_THROWS_AS(replayer.complete(req), CorruptionError);
}

TEST_CASE("live mode over HTTP retries 429 with backoff") {
  testing::TempDir dir;
  LocalChatServer server;
  server.throttle = 2;
  LlmClient client(ClientMode::kLive, dir.path(), server.transport(), fast_retry());
  std::vector<long> sleeps;
  client.set_sleeper([&](std::chrono::milliseconds ms) { sleeps.push_back(ms.count()); });
  const auto result = client.complete(request("ping"));
  CHECK(result.text == "seen ping");
  CHECK(result.usage.prompt_tokens == 7);
  CHECK(server.calls == 3);
  CHECK(sleeps.size() == 2);
  CHECK(std::filesystem::is_empty(dir.path()));
}

TEST_CASE("backoff doubles and non-retryable statuses fail fast") {
  testing::TempDir dir;
  auto flaky = std::make_shared<FailingTransport>();
  flaky->statuses = {500, 503, 0};
  RetryPolicy retry;
  retry.initial_backoff_ms = 10;
  retry.max_backoff_ms = 1000;
  LlmClient client(ClientMode::kLive, dir.path(), flaky, retry);
  std::vector<long> sleeps;
  client.set_sleeper([&](std::chrono::milliseconds ms) { sleeps.push_back(ms.count()); });
  CHECK(client.complete(request("x")).text == "ok");
  CHECK(sleeps == std::vector<long>{10, 20, 40});

  auto bad = std::make_shared<FailingTransport>();
  bad->statuses = {401};
  LlmClient strict(ClientMode::kLive, dir.path(), bad, retry);
  strict.set_sleeper([](std::chrono::milliseconds) {});
  CHECK_THROWS_AS(strict.complete(request("x")), TransportError);
  CHECK(bad->calls == 1);

  auto down = std::make_shared<FailingTransport>();
  down->statuses = std::vector<int>(10, 503);
  LlmClient gives_up(ClientMode::kLive, dir.path(), down, retry);
  gives_up.set_sleeper([](std::chrono::milliseconds) {});
  CHECK_THROWS_AS(gives_up.complete(request("x")), TransportError);
  CHECK(down->calls == retry.max_attempts);
}

TEST_CASE("cost report") {
  CHECK(cost_report({}).total_requests == 0);
  CHECK(cost_report({}).total_prompt_tokens == 0);
  std::vector<CompletionResult> log(2);
  log[0].usage = {100, 50};
  log[1].usage = {100, 50};
  log[1].cache_hit = true;
  const auto r = cost_report(log);
  CHECK(r.total_requests == 2);
  CHECK(r.total_prompt_tokens == 200);
  CHECK(r.total_completion_tokens == 100);
  CHECK(r.cache_hits == 1);
}

TEST_CASE("request validation") {
  CompletionRequest r = request("x");
  r.messages.clear();
  testing::TempDir dir;
  LlmClient client(ClientMode::kLive, dir.path(), std::make_shared<CountingTransport>());
  CHECK_THROWS(client.complete(r));
}
