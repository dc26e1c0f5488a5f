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

#include "factforge/pairing.hpp"

#include "factforge/digest.hpp"
#include "factforge/errors.hpp"
#include "factforge/io.hpp"
#include "factforge/text.hpp"

namespace factforge {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kYes: return "yes";
    case Verdict::kNo: return "no";
    case Verdict::kAbstain: return "abstain";
  }
  return "abstain";
}

std::optional<Verdict> try_parse_verdict(std::string_view text) {
  const std::string key = normalize_text(text);
  if (key == "yes") return Verdict::kYes;
  if (key == "no") return Verdict::kNo;
  if (key == "abstain") return Verdict::kAbstain;
  return std::nullopt;
}

SharedFactPolicy parse_shared_fact_policy(std::string_view text) {
  const std::string key = normalize_text(text);
  if (key == "exclude" || key == "exclude_from_negatives")
    return SharedFactPolicy::kExcludeFromNegatives;
  if (key == "keep") return SharedFactPolicy::kKeep;
  throw ConfigError("unknown shared fact policy '" + std::string(text) + "'");
}

std::string make_candidate_id(std::string_view dialogue_id, size_t target_index,
                              const PersonaFact& fact, FactSource source) {
  const PersonaFact n = normalize_fact(fact);
  json key = json::array({dialogue_id, target_index, n.head,
                          relation_name(n.relation), n.tail,
                          source == FactSource::kOwnSpeaker ? "own" : "other"});
  return sha256_hex(key.dump()).substr(0, 32);
}

std::set<PersonaFact> detect_shared_facts(const PersonaProfile& profile_a,
                                          const PersonaProfile& profile_b) {
  std::set<PersonaFact> a;
  for (const auto& f : profile_a.facts) a.insert(normalize_fact(f));
  std::set<PersonaFact> shared;
  for (const auto& f : profile_b.facts) {
    PersonaFact n = normalize_fact(f);
    if (a.contains(n)) shared.insert(std::move(n));
  }
  return shared;
}

std::vector<CandidateExample> build_candidates(
    const Dialogue& dialogue, std::span<const DialogueWindow> windows,
    const PairingPolicy& policy) {
  const std::set<PersonaFact> shared =
      detect_shared_facts(dialogue.profiles[0], dialogue.profiles[1]);
  std::vector<CandidateExample> out;

  auto make = [&](const DialogueWindow& w, const PersonaFact& fact, FactSource source) {
    CandidateExample c;
    c.window = w;
    c.fact = fact;
    c.source = source;
    c.heuristic_label = source == FactSource::kOwnSpeaker;
    c.shared_fact = shared.contains(fact);
    c.candidate_id = make_candidate_id(w.dialogue_id, w.target_index, fact, source);
    return c;
  };

  for (const auto& w : windows) {
    const PersonaProfile& own = dialogue.profile(w.target_speaker);
    const PersonaProfile& other = dialogue.profile(other_speaker(w.target_speaker));
    std::set<PersonaFact> emitted;
    for (const auto& f : own.facts) {
      if (!emitted.insert(f).second) continue;
      out.push_back(make(w, f, FactSource::kOwnSpeaker));
    }
    size_t negatives = 0;
    std::set<PersonaFact> emitted_other;
    for (const auto& f : other.facts) {
      if (policy.max_negatives_per_window > 0 &&
          negatives >= policy.max_negatives_per_window)
        break;
      if (shared.contains(f) &&
          policy.shared_facts == SharedFactPolicy::kExcludeFromNegatives)
        continue;
      if (!emitted_other.insert(f).second) continue;
      out.push_back(make(w, f, FactSource::kOtherSpeaker));
      ++negatives;
    }
  }
  return out;
}

namespace {

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json optional_verdict(const std::optional<Verdict>& v) {
  return v ? json(verdict_name(*v)) : json(nullptr);
}

std::optional<double> read_optional_score(const json& rec, const char* key) {
  if (!rec.contains(key) || rec.at(key).is_null()) return std::nullopt;
  if (!rec.at(key).is_number()) throw SchemaError(std::string(key) + " must be a number");
  return rec.at(key).get<double>();
}

std::optional<bool> read_optional_bool(const json& rec, const char* key) {
  if (!rec.contains(key) || rec.at(key).is_null()) return std::nullopt;
  if (!rec.at(key).is_boolean()) throw SchemaError(std::string(key) + " must be a boolean");
  return rec.at(key).get<bool>();
}

std::optional<Verdict> read_optional_verdict(const json& rec, const char* key) {
  if (!rec.contains(key) || rec.at(key).is_null()) return std::nullopt;
  if (!rec.at(key).is_string()) throw SchemaError(std::string(key) + " must be a string");
  auto v = try_parse_verdict(rec.at(key).get<std::string>());
  if (!v) throw SchemaError(std::string("bad verdict in ") + key);
  return v;
}

bool read_flag(const json& rec, const char* key) {
  if (!rec.contains(key)) return false;
  if (!rec.at(key).is_boolean()) throw SchemaError(std::string(key) + " must be a boolean");
  return rec.at(key).get<bool>();
}

}  // namespace

ordered_json candidate_to_json(const CandidateExample& c) {
  ordered_json rec;
  rec["schema_version"] = kCandidateSchemaVersion;
  rec["candidate_id"] = c.candidate_id;
  rec["window"] = window_to_json(c.window);
  rec["fact"] = {{"head", c.fact.head},
                 {"relation", relation_name(c.fact.relation)},
                 {"tail", c.fact.tail}};
  rec["source"] = c.source == FactSource::kOwnSpeaker ? "own_speaker" : "other_speaker";
  rec["heuristic_label"] = c.heuristic_label;
  rec["shared_fact"] = c.shared_fact;
  rec["filter_head_score"] = optional_json(c.filter_head_score);
  rec["filter_tail_score"] = optional_json(c.filter_tail_score);
  rec["scoring_failed"] = c.scoring_failed;
  rec["soft_label"] = optional_json(c.soft_label);
  rec["soft_label_error"] = c.soft_label_error;
  rec["llm_head_label"] = optional_verdict(c.llm_head_label);
  rec["llm_tail_label"] = optional_verdict(c.llm_tail_label);
  rec["final_label"] = optional_json(c.final_label);
  return rec;
}

CandidateExample candidate_from_json(const json& rec) {
  if (!rec.is_object()) throw SchemaError("candidate record is not an object");
  if (!rec.contains("schema_version") || rec.at("schema_version") != kCandidateSchemaVersion)
    throw SchemaError("unsupported candidate schema_version");
  CandidateExample c;
  try {
    c.candidate_id = rec.at("candidate_id").get<std::string>();
    c.window = window_from_json(rec.at("window"));
    const json& f = rec.at("fact");
    c.fact = normalize_fact(f.at("head").get<std::string>(),
                            f.at("relation").get<std::string>(),
                            f.at("tail").get<std::string>());
    const std::string source = rec.at("source").get<std::string>();
    if (source == "own_speaker") {
      c.source = FactSource::kOwnSpeaker;
    } else if (source == "other_speaker") {
      c.source = FactSource::kOtherSpeaker;
    } else {
      throw SchemaError("unknown candidate source '" + source + "'");
    }
    c.heuristic_label = rec.at("heuristic_label").get<bool>();
    c.shared_fact = rec.at("shared_fact").get<bool>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("candidate record: ") + e.what());
  } catch (const NormalizationError& e) {
    throw SchemaError(e.what());
  }
  if (c.heuristic_label != (c.source == FactSource::kOwnSpeaker))
    throw SchemaError("heuristic_label disagrees with source");
  c.filter_head_score = read_optional_score(rec, "filter_head_score");
  c.filter_tail_score = read_optional_score(rec, "filter_tail_score");
  c.scoring_failed = read_flag(rec, "scoring_failed");
  c.soft_label = read_optional_bool(rec, "soft_label");
  c.soft_label_error = read_flag(rec, "soft_label_error");
  c.llm_head_label = read_optional_verdict(rec, "llm_head_label");
  c.llm_tail_label = read_optional_verdict(rec, "llm_tail_label");
  c.final_label = read_optional_bool(rec, "final_label");
  return c;
}

std::string serialize_candidates(std::span<const CandidateExample> candidates) {
  std::string out;
  for (const auto& c : candidates) {
    out += candidate_to_json(c).dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<CandidateExample> parse_candidates(std::string_view contents) {
  std::vector<CandidateExample> out;
  for (const auto& line : read_record_lines(contents)) {
    json rec = json::parse(line.text, nullptr, false);
    if (rec.is_discarded())
      throw SchemaError("candidate store line " + std::to_string(line.line_number) +
                        ": malformed json");
    try {
      out.push_back(candidate_from_json(rec));
    } catch (const SchemaError& e) {
      throw SchemaError("candidate store line " + std::to_string(line.line_number) +
                        ": " + e.what());
    }
  }
  return out;
}

}  // namespace factforge
