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

#include <filesystem>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "factforge/corpus.hpp"
#include "factforge/llm_client.hpp"
#include "factforge/pairing.hpp"
#include "json.hpp"

namespace factforge {

// Which part of the triple a prompt asks about.
enum class FactPart { kHead, kTail };

std::string_view fact_part_name(FactPart part);
FactPart parse_fact_part(std::string_view text);

struct PromptTemplate {
  std::string template_id;
  FactPart variant = FactPart::kHead;
  std::string system_text;
  std::string user_text_pattern;  // {context} and {fact} placeholders
};

// Template files:
//
//   ---
//   template_id: cot_v1
//   variant: head
//   ---
//   [system]
//   ...system text...
//   [user]
//   ...user text with {context} and {fact}...
//
// `{{` and `}}` render as literal braces.
PromptTemplate parse_template(std::string_view text);
PromptTemplate load_template(const std::filesystem::path& path);

// Substitutes {name} placeholders; throws TemplateError for any placeholder
// without a binding.
std::string render_text(std::string_view pattern,
                        const std::map<std::string, std::string>& bindings);

struct RenderOptions {
  std::string model_id = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_tokens = 512;
};

CompletionRequest render_prompt(const DialogueWindow& window, const PersonaFact& fact,
                                const PromptTemplate& tmpl,
                                const RenderOptions& options = {});

// Follow-up turn appended when a reply carries no parseable verdict.
inline constexpr std::string_view kReprompt =
    "Your reply did not end with a verdict. Reply with a final line that is "
    "exactly \"Answer: Yes\" or \"Answer: No\".";

enum class ParsedAnswer { kYes, kNo, kUnparseable };

// completion == rationale + answer_text, byte for byte. answer_text starts at
// the last line matching "answer: yes|no" (case-insensitive) and is empty
// when no such line exists.
struct ParsedVerdict {
  ParsedAnswer answer = ParsedAnswer::kUnparseable;
  std::string rationale;
  std::string answer_text;
};

ParsedVerdict parse_verdict(std::string_view completion);

struct AnnotationResult {
  std::string candidate_id;
  FactPart variant = FactPart::kHead;
  Verdict verdict = Verdict::kAbstain;
  std::string rationale;
  std::string answer_text;
  std::string template_id;
  std::string model_id;
  int attempts = 0;

  bool operator==(const AnnotationResult&) const = default;
};

nlohmann::ordered_json annotation_to_json(const AnnotationResult& r);
AnnotationResult annotation_from_json(const nlohmann::json& j);

std::string annotation_key(std::string_view candidate_id, FactPart variant,
                           std::string_view template_id);

// Append-only newline-delimited store of finished annotations, keyed by
// (candidate_id, variant, template_id). A torn final line from a crashed
// writer is ignored on load.
class AnnotationCheckpoint {
 public:
  explicit AnnotationCheckpoint(std::filesystem::path path);

  const AnnotationResult* find(std::string_view key) const;
  void append(const AnnotationResult& result);
  size_t size() const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::map<std::string, AnnotationResult, std::less<>> done_;
};

struct AnnotateOptions {
  int retry_max = 3;
  size_t max_in_flight = 1;
  RenderOptions render;
};

// One result per candidate, in candidate order. Unparseable replies are
// re-prompted until retry_max attempts have been spent, then recorded as
// abstain; transport failures also consume attempts. FixtureMissingError
// propagates, since a replay run without fixtures is misconfigured.
std::vector<AnnotationResult> annotate(std::span<const CandidateExample> candidates,
                                       LlmClient& client, const PromptTemplate& tmpl,
                                       const AnnotateOptions& options = {},
                                       AnnotationCheckpoint* checkpoint = nullptr);

struct CombinedLabel {
  bool final_label = false;
  bool decided = false;
};

// final = head yes AND tail yes; undecided when either side abstained.
CombinedLabel combine_labels(Verdict head, Verdict tail);

}  // namespace factforge
