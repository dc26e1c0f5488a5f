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

#include "factforge/labeler.hpp"

#include <cctype>
#include <regex>

#include "factforge/errors.hpp"
#include "factforge/io.hpp"
#include "factforge/parallel.hpp"
#include "factforge/text.hpp"

namespace factforge {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view fact_part_name(FactPart part) {
  return part == FactPart::kHead ? "head" : "tail";
}

FactPart parse_fact_part(std::string_view text) {
  const std::string key = normalize_text(text);
  if (key == "head") return FactPart::kHead;
  if (key == "tail") return FactPart::kTail;
  throw TemplateError("unknown template variant '" + std::string(text) + "'");
}

namespace {

std::string strip_trailing_newlines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

bool is_placeholder_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

}  // namespace

PromptTemplate parse_template(std::string_view text) {
  const auto lines = split_lines(text);
  size_t i = 0;
  while (i < lines.size() && trim(lines[i]).empty()) ++i;
  if (i >= lines.size() || trim(lines[i]) != "---")
    throw TemplateError("template must start with a --- front-matter block");
  PromptTemplate tmpl;
  bool have_variant = false;
  for (++i; i < lines.size() && trim(lines[i]) != "---"; ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    const size_t colon = line.find(':');
    if (colon == std::string::npos)
      throw TemplateError("front-matter line without ':': " + line);
    const std::string key = trim(line.substr(0, colon));
    const std::string value = trim(line.substr(colon + 1));
    if (key == "template_id") {
      tmpl.template_id = value;
    } else if (key == "variant") {
      tmpl.variant = parse_fact_part(value);
      have_variant = true;
    } else {
      throw TemplateError("unknown front-matter key '" + key + "'");
    }
  }
  if (i >= lines.size()) throw TemplateError("unterminated front-matter block");
  if (tmpl.template_id.empty()) throw TemplateError("template_id missing");
  if (!have_variant) throw TemplateError("variant missing");

  std::string* section = nullptr;
  bool have_user = false;
  for (++i; i < lines.size(); ++i) {
    const std::string marker = trim(lines[i]);
    if (marker == "[system]") {
      section = &tmpl.system_text;
      continue;
    }
    if (marker == "[user]") {
      section = &tmpl.user_text_pattern;
      have_user = true;
      continue;
    }
    if (section == nullptr) {
      if (marker.empty()) continue;
      throw TemplateError("text outside a [system] or [user] section");
    }
    *section += lines[i];
    section->push_back('\n');
  }
  if (!have_user) throw TemplateError("template has no [user] section");
  tmpl.system_text = trim(tmpl.system_text);
  tmpl.user_text_pattern = strip_trailing_newlines(tmpl.user_text_pattern);
  for (const char* required : {"{context}", "{fact}"}) {
    if (tmpl.user_text_pattern.find(required) == std::string::npos)
      throw TemplateError(std::string("user text lacks placeholder ") + required);
  }
  return tmpl;
}

PromptTemplate load_template(const std::filesystem::path& path) {
  return parse_template(read_file(path));
}

std::string render_text(std::string_view pattern,
                        const std::map<std::string, std::string>& bindings) {
  std::string out;
  out.reserve(pattern.size());
  for (size_t i = 0; i < pattern.size(); ++i) {
    const char c = pattern[i];
    if ((c == '{' || c == '}') && i + 1 < pattern.size() && pattern[i + 1] == c) {
      out.push_back(c);
      ++i;
      continue;
    }
    if (c == '{') {
      size_t j = i + 1;
      while (j < pattern.size() && is_placeholder_char(pattern[j])) ++j;
      if (j < pattern.size() && pattern[j] == '}' && j > i + 1) {
        const std::string name(pattern.substr(i + 1, j - i - 1));
        auto it = bindings.find(name);
        if (it == bindings.end())
          throw TemplateError("unbound placeholder {" + name + "}");
        out += it->second;
        i = j;
        continue;
      }
    }
    out.push_back(c);
  }
  return out;
}

CompletionRequest render_prompt(const DialogueWindow& window, const PersonaFact& fact,
                                const PromptTemplate& tmpl, const RenderOptions& options) {
  const std::string& part = tmpl.variant == FactPart::kHead ? fact.head : fact.tail;
  const std::map<std::string, std::string> bindings = {
      {"context", serialize_context(window)}, {"fact", part}};
  CompletionRequest request;
  request.model_id = options.model_id;
  request.temperature = options.temperature;
  request.max_tokens = options.max_tokens;
  if (!tmpl.system_text.empty())
    request.messages.push_back({Role::kSystem, render_text(tmpl.system_text, bindings)});
  request.messages.push_back({Role::kUser, render_text(tmpl.user_text_pattern, bindings)});
  return request;
}

ParsedVerdict parse_verdict(std::string_view completion) {
  static const std::regex kAnswer(R"(^[\s*_#>]*answer[\s*_]*:[\s*_]*(yes|no)\b)",
                                  std::regex::icase);
  ParsedVerdict parsed;
  // Offsets of each line start, scanned from the end.
  std::vector<size_t> starts{0};
  for (size_t i = 0; i < completion.size(); ++i) {
    if (completion[i] == '\n') starts.push_back(i + 1);
  }
  for (auto it = starts.rbegin(); it != starts.rend(); ++it) {
    const size_t begin = *it;
    size_t end = completion.find('\n', begin);
    if (end == std::string_view::npos) end = completion.size();
    const std::string line(completion.substr(begin, end - begin));
    std::smatch m;
    if (std::regex_search(line, m, kAnswer)) {
      parsed.answer = to_lower(m[1].str()) == "yes" ? ParsedAnswer::kYes : ParsedAnswer::kNo;
      parsed.rationale = std::string(completion.substr(0, begin));
      parsed.answer_text = std::string(completion.substr(begin));
      return parsed;
    }
  }
  parsed.rationale = std::string(completion);
  return parsed;
}

ordered_json annotation_to_json(const AnnotationResult& r) {
  ordered_json j;
  j["candidate_id"] = r.candidate_id;
  j["variant"] = fact_part_name(r.variant);
  j["verdict"] = verdict_name(r.verdict);
  j["rationale"] = r.rationale;
  j["answer_text"] = r.answer_text;
  j["template_id"] = r.template_id;
  j["model_id"] = r.model_id;
  j["attempts"] = r.attempts;
  return j;
}

AnnotationResult annotation_from_json(const json& j) {
  AnnotationResult r;
  try {
    r.candidate_id = j.at("candidate_id").get<std::string>();
    r.variant = parse_fact_part(j.at("variant").get<std::string>());
    auto v = try_parse_verdict(j.at("verdict").get<std::string>());
    if (!v) throw SchemaError("bad verdict");
    r.verdict = *v;
    r.rationale = j.at("rationale").get<std::string>();
    r.answer_text = j.value("answer_text", std::string());
    r.template_id = j.at("template_id").get<std::string>();
    r.model_id = j.value("model_id", std::string());
    r.attempts = j.at("attempts").get<int>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("annotation record: ") + e.what());
  } catch (const TemplateError& e) {
    throw SchemaError(e.what());
  }
  return r;
}

std::string annotation_key(std::string_view candidate_id, FactPart variant,
                           std::string_view template_id) {
  std::string key(candidate_id);
  key += '|';
  key += fact_part_name(variant);
  key += '|';
  key += template_id;
  return key;
}

AnnotationCheckpoint::AnnotationCheckpoint(std::filesystem::path path)
    : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  const auto lines = read_record_lines(read_file(path_));
  for (size_t i = 0; i < lines.size(); ++i) {
    json rec = json::parse(lines[i].text, nullptr, false);
    if (rec.is_discarded()) {
      if (i + 1 == lines.size()) break;  // torn tail
      throw SchemaError("checkpoint line " + std::to_string(lines[i].line_number) +
                        ": malformed json");
    }
    AnnotationResult r = annotation_from_json(rec);
    done_[annotation_key(r.candidate_id, r.variant, r.template_id)] = std::move(r);
  }
}

const AnnotationResult* AnnotationCheckpoint::find(std::string_view key) const {
  std::lock_guard lock(mu_);
  auto it = done_.find(key);
  return it == done_.end() ? nullptr : &it->second;
}

void AnnotationCheckpoint::append(const AnnotationResult& result) {
  std::lock_guard lock(mu_);
  append_line(path_, annotation_to_json(result).dump());
  done_[annotation_key(result.candidate_id, result.variant, result.template_id)] = result;
}

size_t AnnotationCheckpoint::size() const {
  std::lock_guard lock(mu_);
  return done_.size();
}

namespace {

AnnotationResult annotate_one(const CandidateExample& c, LlmClient& client,
                              const PromptTemplate& tmpl, const AnnotateOptions& options) {
  AnnotationResult result;
  result.candidate_id = c.candidate_id;
  result.variant = tmpl.variant;
  result.template_id = tmpl.template_id;
  result.model_id = options.render.model_id;

  CompletionRequest request = render_prompt(c.window, c.fact, tmpl, options.render);
  const int max_attempts = std::max(options.retry_max, 1);
  std::string last_text;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    result.attempts = attempt;
    CompletionResult reply;
    try {
      reply = client.complete(request);
    } catch (const TransportError& e) {
      last_text = std::string("transport error: ") + e.what();
      continue;
    }
    ParsedVerdict parsed = parse_verdict(reply.text);
    if (parsed.answer != ParsedAnswer::kUnparseable) {
      result.verdict = parsed.answer == ParsedAnswer::kYes ? Verdict::kYes : Verdict::kNo;
      result.rationale = std::move(parsed.rationale);
      result.answer_text = std::move(parsed.answer_text);
      return result;
    }
    last_text = reply.text;
    request.messages.push_back({Role::kAssistant, reply.text});
    request.messages.push_back({Role::kUser, std::string(kReprompt)});
  }
  result.verdict = Verdict::kAbstain;
  result.rationale = last_text;
  result.answer_text.clear();
  return result;
}

}  // namespace

std::vector<AnnotationResult> annotate(std::span<const CandidateExample> candidates,
                                       LlmClient& client, const PromptTemplate& tmpl,
                                       const AnnotateOptions& options,
                                       AnnotationCheckpoint* checkpoint) {
  std::vector<AnnotationResult> results(candidates.size());
  std::vector<size_t> pending;
  std::map<std::string, size_t> first_seen;
  std::vector<std::optional<size_t>> alias(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    const std::string key =
        annotation_key(candidates[i].candidate_id, tmpl.variant, tmpl.template_id);
    if (checkpoint != nullptr) {
      if (const AnnotationResult* done = checkpoint->find(key)) {
        results[i] = *done;
        continue;
      }
    }
    auto [it, inserted] = first_seen.emplace(key, i);
    if (!inserted) {
      alias[i] = it->second;
      continue;
    }
    pending.push_back(i);
  }

  parallel_for(pending.size(), options.max_in_flight, [&](size_t p) {
    const size_t i = pending[p];
    results[i] = annotate_one(candidates[i], client, tmpl, options);
    if (checkpoint != nullptr) checkpoint->append(results[i]);
  });
  for (size_t i = 0; i < candidates.size(); ++i) {
    if (alias[i]) results[i] = results[*alias[i]];
  }
  return results;
}

CombinedLabel combine_labels(Verdict head, Verdict tail) {
  CombinedLabel out;
  out.decided = head != Verdict::kAbstain && tail != Verdict::kAbstain;
  out.final_label = head == Verdict::kYes && tail == Verdict::kYes;
  return out;
}

}  // namespace factforge
