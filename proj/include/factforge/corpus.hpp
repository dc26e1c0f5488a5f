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

#include <array>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace factforge {

enum class Relation {
  kCharacteristic,
  kRoutineHabit,
  kGoalPlan,
  kExperience,
  kRelationship,
};

inline constexpr std::array<Relation, 5> kAllRelations = {
    Relation::kCharacteristic, Relation::kRoutineHabit, Relation::kGoalPlan,
    Relation::kExperience, Relation::kRelationship};

// Canonical snake_case name, e.g. "routine_habit".
std::string_view relation_name(Relation relation);

// Accepts mixed case and space/underscore/hyphen separators, plus the long
// forms "routine or habit" and "goal or plan".
std::optional<Relation> try_parse_relation(std::string_view text);
Relation parse_relation(std::string_view text);

// A (head, relation, tail) triple. head and tail are stored normalized, so
// the defaulted comparisons implement normalized equality.
struct PersonaFact {
  std::string head;
  Relation relation = Relation::kCharacteristic;
  std::string tail;

  auto operator<=>(const PersonaFact&) const = default;
};

PersonaFact normalize_fact(std::string_view raw_head,
                           std::string_view raw_relation,
                           std::string_view raw_tail);
PersonaFact normalize_fact(const PersonaFact& fact);

enum class Speaker { kA, kB };

inline Speaker other_speaker(Speaker s) {
  return s == Speaker::kA ? Speaker::kB : Speaker::kA;
}
std::string_view speaker_id(Speaker s);      // "speaker_a" / "speaker_b"
std::string_view speaker_prefix(Speaker s);  // "A" / "B"
std::optional<Speaker> try_parse_speaker(std::string_view text);

struct Utterance {
  Speaker speaker = Speaker::kA;
  size_t index = 0;
  std::string text;

  bool operator==(const Utterance&) const = default;
};

struct PersonaProfile {
  Speaker speaker = Speaker::kA;
  std::vector<PersonaFact> facts;
  std::vector<std::string> raw_persona_lines;  // provenance only

  bool operator==(const PersonaProfile&) const = default;
};

struct Dialogue {
  std::string dialogue_id;
  std::vector<Utterance> utterances;
  std::array<PersonaProfile, 2> profiles{PersonaProfile{Speaker::kA, {}, {}},
                                         PersonaProfile{Speaker::kB, {}, {}}};

  const PersonaProfile& profile(Speaker s) const {
    return profiles[s == Speaker::kA ? 0 : 1];
  }
  bool operator==(const Dialogue&) const = default;
};

struct DialogueWindow {
  std::string dialogue_id;
  std::vector<Utterance> utterances;
  size_t target_index = 0;
  Speaker target_speaker = Speaker::kA;

  bool operator==(const DialogueWindow&) const = default;
};

enum class CorpusFormat {
  kPeacokRelease,  // JSON array of release records
  kCanonical,      // one dialogue per line
};
CorpusFormat parse_corpus_format(std::string_view text);

struct Reject {
  std::string source_locator;
  std::string reason;
};

struct ParsedCorpus {
  std::vector<Dialogue> dialogues;
  std::vector<Reject> rejects;
};

// Record-level problems go to `rejects`; a document that cannot be read at
// all (release format that is not a JSON array) throws SchemaError.
ParsedCorpus parse_corpus(std::string_view contents, CorpusFormat format,
                          std::string_view source_name = "<memory>");
// Throws IoError if the file cannot be read.
ParsedCorpus parse_corpus_file(const std::filesystem::path& path,
                               CorpusFormat format);

nlohmann::ordered_json dialogue_to_json(const Dialogue& dialogue);
// Throws SchemaError describing the first violation.
Dialogue dialogue_from_json(const nlohmann::json& record);

// Canonical newline-delimited serialization; parse_corpus(kCanonical)
// inverts it.
std::string serialize_corpus(std::span<const Dialogue> dialogues);
std::string serialize_rejects(std::span<const Reject> rejects);

nlohmann::ordered_json window_to_json(const DialogueWindow& window);
DialogueWindow window_from_json(const nlohmann::json& record);

// One window per utterance, spanning [t - w/2, t + w/2] clipped to the
// dialogue. window_size must be odd and >= 1.
std::vector<DialogueWindow> extract_windows(const Dialogue& dialogue,
                                            int window_size = 5);

inline constexpr std::string_view kContextFormat = "v1";

// "A: ..." / "B: ..." lines joined by '\n'; the target line is wrapped as
// "<target>A: ...</target>".
std::string serialize_context(const DialogueWindow& window);

}  // namespace factforge
