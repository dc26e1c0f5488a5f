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

#include "factforge/corpus.hpp"

#include <set>
#include <sstream>
#include <stdexcept>

#include "factforge/errors.hpp"
#include "factforge/io.hpp"
#include "factforge/text.hpp"

namespace factforge {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view relation_name(Relation relation) {
  switch (relation) {
    case Relation::kCharacteristic: return "characteristic";
    case Relation::kRoutineHabit: return "routine_habit";
    case Relation::kGoalPlan: return "goal_plan";
    case Relation::kExperience: return "experience";
    case Relation::kRelationship: return "relationship";
  }
  return "unknown";
}

std::optional<Relation> try_parse_relation(std::string_view text) {
  std::string key;
  for (char c : normalize_text(text)) {
    key.push_back(c == ' ' || c == '-' ? '_' : c);
  }
  if (key == "routine_or_habit") key = "routine_habit";
  if (key == "goal_or_plan") key = "goal_plan";
  for (Relation r : kAllRelations) {
    if (relation_name(r) == key) return r;
  }
  return std::nullopt;
}

Relation parse_relation(std::string_view text) {
  if (auto r = try_parse_relation(text)) return *r;
  throw NormalizationError("unknown relation: " + std::string(text));
}

PersonaFact normalize_fact(std::string_view raw_head,
                           std::string_view raw_relation,
                           std::string_view raw_tail) {
  PersonaFact fact;
  fact.head = normalize_text(raw_head);
  fact.tail = normalize_text(raw_tail);
  if (fact.head.empty()) throw NormalizationError("empty head");
  if (fact.tail.empty()) throw NormalizationError("empty tail");
  fact.relation = parse_relation(raw_relation);
  return fact;
}

PersonaFact normalize_fact(const PersonaFact& fact) {
  return normalize_fact(fact.head, relation_name(fact.relation), fact.tail);
}

std::string_view speaker_id(Speaker s) {
  return s == Speaker::kA ? "speaker_a" : "speaker_b";
}

std::string_view speaker_prefix(Speaker s) { return s == Speaker::kA ? "A" : "B"; }

std::optional<Speaker> try_parse_speaker(std::string_view text) {
  const std::string key = normalize_text(text);
  if (key == "speaker_a" || key == "a") return Speaker::kA;
  if (key == "speaker_b" || key == "b") return Speaker::kB;
  return std::nullopt;
}

CorpusFormat parse_corpus_format(std::string_view text) {
  const std::string key = normalize_text(text);
  if (key == "peacok_release" || key == "release") return CorpusFormat::kPeacokRelease;
  if (key == "canonical" || key == "jsonl") return CorpusFormat::kCanonical;
  throw ConfigError("unknown corpus format '" + std::string(text) +
                    "' (expected peacok_release or canonical)");
}

namespace {

const json& require(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key))
    throw SchemaError(std::string("missing field '") + key + "'");
  return obj.at(key);
}

std::string require_string(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_string())
    throw SchemaError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

const json& require_array(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_array())
    throw SchemaError(std::string("field '") + key + "' must be an array");
  return v;
}

// Normalization failures surface as schema errors carrying the same reason.
PersonaFact fact_from_json(const json& f) {
  try {
    return normalize_fact(require_string(f, "head"), require_string(f, "relation"),
                          require_string(f, "tail"));
  } catch (const NormalizationError& e) {
    throw SchemaError(e.what());
  }
}

std::vector<std::string> string_list(const json& arr, const char* key) {
  std::vector<std::string> out;
  for (const auto& v : arr) {
    if (!v.is_string())
      throw SchemaError(std::string("entries of '") + key + "' must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

Utterance make_utterance(Speaker speaker, size_t index, std::string text) {
  if (trim(text).empty())
    throw SchemaError("empty utterance text at index " + std::to_string(index));
  return Utterance{speaker, index, std::move(text)};
}

Dialogue release_record_to_dialogue(const json& rec, size_t record_index,
                                    std::string_view source_name) {
  if (!rec.is_object()) throw SchemaError("record is not an object");
  Dialogue d;
  if (rec.contains("dialogue_id")) {
    d.dialogue_id = require_string(rec, "dialogue_id");
  } else {
    std::filesystem::path p{std::string(source_name)};
    d.dialogue_id = p.stem().string() + "-" + std::to_string(record_index);
  }
  if (trim(d.dialogue_id).empty()) throw SchemaError("empty dialogue_id");

  const char* line_keys[2] = {"speaker1_persona", "speaker2_persona"};
  const char* fact_keys[2] = {"speaker1_peacok", "speaker2_peacok"};
  for (int i = 0; i < 2; ++i) {
    PersonaProfile& profile = d.profiles[i];
    profile.speaker = i == 0 ? Speaker::kA : Speaker::kB;
    if (rec.contains(line_keys[i]))
      profile.raw_persona_lines =
          string_list(require_array(rec, line_keys[i]), line_keys[i]);
    for (const auto& f : require_array(rec, fact_keys[i]))
      profile.facts.push_back(fact_from_json(f));
  }
  const json& turns = require_array(rec, "utterances");
  for (size_t i = 0; i < turns.size(); ++i) {
    if (!turns[i].is_string()) throw SchemaError("utterances must be strings");
    d.utterances.push_back(make_utterance(i % 2 == 0 ? Speaker::kA : Speaker::kB,
                                          i, turns[i].get<std::string>()));
  }
  return d;
}

}  // namespace

ordered_json dialogue_to_json(const Dialogue& dialogue) {
  ordered_json rec;
  rec["dialogue_id"] = dialogue.dialogue_id;
  ordered_json utts = ordered_json::array();
  for (const auto& u : dialogue.utterances) {
    ordered_json uj;
    uj["speaker"] = speaker_id(u.speaker);
    uj["text"] = u.text;
    utts.push_back(std::move(uj));
  }
  rec["utterances"] = std::move(utts);
  ordered_json personas = ordered_json::array();
  for (const auto& p : dialogue.profiles) {
    ordered_json pj;
    pj["speaker"] = speaker_id(p.speaker);
    ordered_json facts = ordered_json::array();
    for (const auto& f : p.facts) {
      ordered_json fj;
      fj["head"] = f.head;
      fj["relation"] = relation_name(f.relation);
      fj["tail"] = f.tail;
      facts.push_back(std::move(fj));
    }
    pj["facts"] = std::move(facts);
    pj["lines"] = p.raw_persona_lines;
    personas.push_back(std::move(pj));
  }
  rec["personas"] = std::move(personas);
  return rec;
}

Dialogue dialogue_from_json(const json& rec) {
  if (!rec.is_object()) throw SchemaError("record is not an object");
  Dialogue d;
  d.dialogue_id = require_string(rec, "dialogue_id");
  if (trim(d.dialogue_id).empty()) throw SchemaError("empty dialogue_id");

  const json& personas = require_array(rec, "personas");
  if (personas.size() != 2) throw SchemaError("expected exactly two personas");
  bool seen[2] = {false, false};
  for (const auto& pj : personas) {
    auto speaker = try_parse_speaker(require_string(pj, "speaker"));
    if (!speaker) throw SchemaError("unknown persona speaker");
    const int slot = *speaker == Speaker::kA ? 0 : 1;
    if (seen[slot]) throw SchemaError("duplicate persona speaker");
    seen[slot] = true;
    PersonaProfile& profile = d.profiles[slot];
    profile.speaker = *speaker;
    for (const auto& f : require_array(pj, "facts"))
      profile.facts.push_back(fact_from_json(f));
    if (pj.contains("lines"))
      profile.raw_persona_lines = string_list(require_array(pj, "lines"), "lines");
  }

  const json& utts = require_array(rec, "utterances");
  for (size_t i = 0; i < utts.size(); ++i) {
    auto speaker = try_parse_speaker(require_string(utts[i], "speaker"));
    if (!speaker)
      throw SchemaError("utterance " + std::to_string(i) +
                        " has a speaker outside the two profiles");
    d.utterances.push_back(make_utterance(*speaker, i, require_string(utts[i], "text")));
  }
  return d;
}

ParsedCorpus parse_corpus(std::string_view contents, CorpusFormat format,
                          std::string_view source_name) {
  ParsedCorpus out;
  std::set<std::string> seen_ids;
  auto accept = [&](Dialogue d, std::string locator) {
    if (!seen_ids.insert(d.dialogue_id).second) {
      out.rejects.push_back({std::move(locator), "duplicate dialogue_id " + d.dialogue_id});
      return;
    }
    out.dialogues.push_back(std::move(d));
  };

  if (format == CorpusFormat::kCanonical) {
    for (const auto& line : read_record_lines(contents)) {
      std::string locator =
          std::string(source_name) + ":" + std::to_string(line.line_number);
      json rec = json::parse(line.text, nullptr, /*allow_exceptions=*/false);
      if (rec.is_discarded()) {
        out.rejects.push_back({std::move(locator), "malformed json"});
        continue;
      }
      try {
        accept(dialogue_from_json(rec), locator);
      } catch (const SchemaError& e) {
        out.rejects.push_back({std::move(locator), e.what()});
      }
    }
    return out;
  }

  if (trim(contents).empty()) return out;
  json doc = json::parse(contents, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_array())
    throw SchemaError(std::string(source_name) +
                      ": release corpus must be a JSON array of records");
  for (size_t i = 0; i < doc.size(); ++i) {
    std::string locator = std::string(source_name) + "#" + std::to_string(i);
    try {
      accept(release_record_to_dialogue(doc[i], i, source_name), locator);
    } catch (const SchemaError& e) {
      out.rejects.push_back({std::move(locator), e.what()});
    }
  }
  return out;
}

ParsedCorpus parse_corpus_file(const std::filesystem::path& path,
                               CorpusFormat format) {
  return parse_corpus(read_file(path), format, path.filename().string());
}

std::string serialize_corpus(std::span<const Dialogue> dialogues) {
  std::string out;
  for (const auto& d : dialogues) {
    out += dialogue_to_json(d).dump();
    out.push_back('\n');
  }
  return out;
}

std::string serialize_rejects(std::span<const Reject> rejects) {
  std::string out;
  for (const auto& r : rejects) {
    ordered_json rec;
    rec["source_locator"] = r.source_locator;
    rec["reason"] = r.reason;
    out += rec.dump();
    out.push_back('\n');
  }
  return out;
}

ordered_json window_to_json(const DialogueWindow& window) {
  ordered_json rec;
  rec["dialogue_id"] = window.dialogue_id;
  rec["target_index"] = window.target_index;
  rec["target_speaker"] = speaker_id(window.target_speaker);
  ordered_json utts = ordered_json::array();
  for (const auto& u : window.utterances) {
    ordered_json uj;
    uj["speaker"] = speaker_id(u.speaker);
    uj["index"] = u.index;
    uj["text"] = u.text;
    utts.push_back(std::move(uj));
  }
  rec["utterances"] = std::move(utts);
  return rec;
}

DialogueWindow window_from_json(const json& rec) {
  DialogueWindow w;
  w.dialogue_id = require_string(rec, "dialogue_id");
  const json& target = require(rec, "target_index");
  if (!target.is_number_unsigned()) throw SchemaError("target_index must be unsigned");
  w.target_index = target.get<size_t>();
  auto speaker = try_parse_speaker(require_string(rec, "target_speaker"));
  if (!speaker) throw SchemaError("bad target_speaker");
  w.target_speaker = *speaker;
  for (const auto& uj : require_array(rec, "utterances")) {
    auto s = try_parse_speaker(require_string(uj, "speaker"));
    if (!s) throw SchemaError("bad utterance speaker");
    const json& idx = require(uj, "index");
    if (!idx.is_number_unsigned()) throw SchemaError("utterance index must be unsigned");
    w.utterances.push_back(Utterance{*s, idx.get<size_t>(), require_string(uj, "text")});
  }
  if (w.utterances.empty()) throw SchemaError("window has no utterances");
  return w;
}

std::vector<DialogueWindow> extract_windows(const Dialogue& dialogue,
                                            int window_size) {
  if (window_size < 1 || window_size % 2 == 0)
    throw std::invalid_argument("window_size must be odd and >= 1");
  std::vector<DialogueWindow> windows;
  const size_t n = dialogue.utterances.size();
  const size_t half = static_cast<size_t>(window_size / 2);
  windows.reserve(n);
  for (size_t t = 0; t < n; ++t) {
    const size_t first = t >= half ? t - half : 0;
    const size_t last = std::min(n - 1, t + half);
    DialogueWindow w;
    w.dialogue_id = dialogue.dialogue_id;
    w.target_index = t;
    w.target_speaker = dialogue.utterances[t].speaker;
    w.utterances.assign(dialogue.utterances.begin() + static_cast<std::ptrdiff_t>(first),
                        dialogue.utterances.begin() + static_cast<std::ptrdiff_t>(last + 1));
    windows.push_back(std::move(w));
  }
  return windows;
}

std::string serialize_context(const DialogueWindow& window) {
  std::string out;
  for (size_t i = 0; i < window.utterances.size(); ++i) {
    const Utterance& u = window.utterances[i];
    std::string line = std::string(speaker_prefix(u.speaker)) + ": ";
    for (char c : u.text) line.push_back(c == '\n' || c == '\r' ? ' ' : c);
    if (i > 0) out.push_back('\n');
    if (u.index == window.target_index) {
      out += "<target>" + line + "</target>";
    } else {
      out += line;
    }
  }
  return out;
}

}  // namespace factforge
