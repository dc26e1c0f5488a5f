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
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "factforge/corpus.hpp"
#include "json.hpp"

namespace factforge {

enum class FactSource { kOwnSpeaker, kOtherSpeaker };

// LLM judgement for one fact part.
enum class Verdict { kYes, kNo, kAbstain };

std::string_view verdict_name(Verdict v);
std::optional<Verdict> try_parse_verdict(std::string_view text);

// A (window, fact) pair that accumulates labels as it moves through the
// pipeline stages.
struct CandidateExample {
  std::string candidate_id;
  DialogueWindow window;
  PersonaFact fact;
  FactSource source = FactSource::kOwnSpeaker;
  bool heuristic_label = false;  // true iff source == kOwnSpeaker
  bool shared_fact = false;

  std::optional<double> filter_head_score;
  std::optional<double> filter_tail_score;
  bool scoring_failed = false;
  std::optional<bool> soft_label;
  bool soft_label_error = false;

  std::optional<Verdict> llm_head_label;
  std::optional<Verdict> llm_tail_label;
  std::optional<bool> final_label;

  bool operator==(const CandidateExample&) const = default;
};

enum class SharedFactPolicy {
  kExcludeFromNegatives,  // shared facts only appear as own-speaker positives
  kKeep,                  // shared facts also appear as flagged negatives
};

struct PairingPolicy {
  SharedFactPolicy shared_facts = SharedFactPolicy::kExcludeFromNegatives;
  // 0 keeps every other-speaker fact; otherwise the first N in profile order.
  size_t max_negatives_per_window = 0;
};

SharedFactPolicy parse_shared_fact_policy(std::string_view text);

// Stable content hash of (dialogue_id, target_index, normalized fact, source).
std::string make_candidate_id(std::string_view dialogue_id, size_t target_index,
                              const PersonaFact& fact, FactSource source);

std::set<PersonaFact> detect_shared_facts(const PersonaProfile& profile_a,
                                          const PersonaProfile& profile_b);

std::vector<CandidateExample> build_candidates(
    const Dialogue& dialogue, std::span<const DialogueWindow> windows,
    const PairingPolicy& policy = {});

inline constexpr int kCandidateSchemaVersion = 1;

nlohmann::ordered_json candidate_to_json(const CandidateExample& c);
CandidateExample candidate_from_json(const nlohmann::json& record);

std::string serialize_candidates(std::span<const CandidateExample> candidates);
// Throws SchemaError naming the offending line.
std::vector<CandidateExample> parse_candidates(std::string_view contents);

}  // namespace factforge
