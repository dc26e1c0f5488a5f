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

// A deterministic stand-in for an OpenAI-style chat completions endpoint.
// It judges persona facts by content-word overlap with the target speaker's
// lines and occasionally forgets the answer line, so re-prompting and
// abstains get exercised when recording fixtures.

#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "factforge/digest.hpp"
#include "factforge/text.hpp"
#include "httplib.h"
#include "json.hpp"

using nlohmann::json;
using namespace factforge;

namespace {

unsigned bucket(const std::string& text, unsigned mod) {
  return static_cast<unsigned>(std::stoul(sha256_hex(text).substr(0, 8), nullptr, 16) % mod);
}

struct Judgment {
  std::string rationale;
  bool yes = false;
};

Judgment judge(const std::string& prompt) {
  std::string fact;
  std::string target_line;
  std::vector<std::string> lines = split_lines(prompt);
  for (const auto& line : lines) {
    if (starts_with_ci(line, "fact:")) fact = trim(line.substr(5));
    const auto open = line.find("<target>");
    if (open != std::string::npos) {
      target_line = line.substr(open + 8);
      const auto close = target_line.find("</target>");
      if (close != std::string::npos) target_line.resize(close);
    }
  }
  const std::string speaker = target_line.substr(0, target_line.find(':'));
  std::set<std::string> said;
  for (auto line : lines) {
    const auto open = line.find("<target>");
    if (open != std::string::npos) line = target_line;
    if (line.rfind(speaker + ":", 0) != 0) continue;
    for (auto& t : content_tokens(line.substr(speaker.size() + 1))) said.insert(t);
  }
  std::vector<std::string> shared;
  const auto fact_tokens = content_tokens(fact);
  for (const auto& t : fact_tokens)
    if (said.count(t)) shared.push_back(t);

  Judgment j;
  std::ostringstream r;
  r << "The target utterance is spoken by " << speaker << ". ";
  r << "The fact under consideration is \"" << fact << "\". ";
  if (shared.empty()) {
    r << "Nothing " << speaker << " says touches on it, so the utterance gives no "
      << "evidence for this fact.\n";
  } else {
    r << speaker << " mentions";
    for (const auto& t : shared) r << " \"" << t << "\"";
    r << ", which relates to the fact.\n";
  }
  j.yes = !fact_tokens.empty() && shared.size() * 3 >= fact_tokens.size();
  j.rationale = r.str();
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mock chat completions server"};
  std::string host = "127.0.0.1";
  int port = 8765;
  app.add_option("--host", host);
  app.add_option("--port", port);
  CLI11_PARSE(app, argc, argv);

  httplib::Server server;
  server.Post("/v1/chat/completions", [](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("messages")) {
      res.status = 400;
      return;
    }
    std::string first_user;
    for (const auto& m : body["messages"])
      if (m.value("role", "") == "user") {
        first_user = m.value("content", "");
        break;
      }
    const size_t turns = body["messages"].size();
    const Judgment j = judge(first_user);
    std::string text = j.rationale;
    const bool always_unparseable = bucket(first_user, 23) == 0;
    const bool first_try_unparseable = turns <= 2 && bucket(first_user, 6) == 0;
    if (always_unparseable || first_try_unparseable)
      text += "It is hard to say either way.";
    else
      text += std::string("Answer: ") + (j.yes ? "yes" : "no");

    json reply = {
        {"id", "mock-" + sha256_hex(req.body).substr(0, 12)},
        {"object", "chat.completion"},
        {"model", body.value("model", "mock")},
        {"choices", json::array({{{"index", 0},
                                  {"message", {{"role", "assistant"}, {"content", text}}},
                                  {"finish_reason", "stop"}}})},
        {"usage", {{"prompt_tokens", tokenize(req.body).size()},
                   {"completion_tokens", tokenize(text).size()}}}};
    res.set_content(reply.dump(), "application/json");
  });

  std::cout << "listening on http://" << host << ":" << port << std::endl;
  server.listen(host, port);
  return 0;
}
