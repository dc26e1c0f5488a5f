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

#include <set>

#include "doctest.h"
#include "factforge/corpus.hpp"
#include "factforge/errors.hpp"
#include "factforge/pairing.hpp"
#include "support.hpp"

using namespace factforge;
using testing::fact;
using testing::make_dialogue;

namespace {

std::vector<PersonaFact> facts(const std::string& prefix, int n) {
  std::vector<PersonaFact> out;
  for (int i = 0; i < n; ++i)
    out.push_back(fact(prefix + " head " + std::to_string(i), Relation::kCharacteristic,
                       prefix + " tail " + std::to_string(i)));
  return out;
}

}  // namespace

TEST_CASE("one window, four facts per profile") {
  const Dialogue d = make_dialogue("d", 1, facts("a", 4), facts("b", 4));
  const auto ws = extract_windows(d, 5);
  const auto cs = build_candidates(d, ws);
  REQUIRE(cs.size() == 8);
  size_t pos = 0;
  for (const auto& c : cs) {
    pos += c.heuristic_label;
    CHECK(c.heuristic_label == (c.source == FactSource::kOwnSpeaker));
    CHECK_FALSE(c.shared_fact);
  }
  CHECK(pos == 4);
}

TEST_CASE("shared fact never becomes a heuristic negative by default") {
  auto a = facts("a", 3);
  auto b = facts("b", 3);
  const PersonaFact dog = fact("a dog owner", Relation::kRelationship, "has a dog");
  a.push_back(dog);
  b.push_back(fact("  A Dog Owner", Relation::kRelationship, "has a  dog"));
  const Dialogue d = make_dialogue("d", 4, a, b);
  const auto cs = build_candidates(d, extract_windows(d, 5));
  for (const auto& c : cs) {
    if (c.fact == dog) {
      CHECK(c.shared_fact);
      CHECK(c.source == FactSource::kOwnSpeaker);
    }
  }
  CHECK(cs.size() == 4 * (4 + 3));

  SUBCASE("keep policy emits it as a flagged negative with a distinct id") {
    PairingPolicy keep;
    keep.shared_facts = SharedFactPolicy::kKeep;
    const auto kept = build_candidates(d, extract_windows(d, 5), keep);
    CHECK(kept.size() == 4 * 8);
    std::set<std::string> ids;
    size_t flagged_negatives = 0;
    for (const auto& c : kept) {
      ids.insert(c.candidate_id);
      flagged_negatives += c.shared_fact && !c.heuristic_label;
    }
    CHECK(ids.size() == kept.size());
    CHECK(flagged_negatives == 4);
  }
}

TEST_CASE("profile with no facts") {
  const Dialogue d = make_dialogue("d", 2, facts("a", 2), {});
  const auto cs = build_candidates(d, extract_windows(d, 5));
  CHECK(cs.size() == 4);
  for (const auto& c : cs) CHECK(c.fact.head.rfind("a head", 0) == 0);
}

TEST_CASE("negative cap") {
  const Dialogue d = make_dialogue("d", 1, facts("a", 2), facts("b", 5));
  PairingPolicy p;
  p.max_negatives_per_window = 2;
  const auto cs = build_candidates(d, extract_windows(d, 5), p);
  CHECK(cs.size() == 4);
}

TEST_CASE("shared fact detection") {
  PersonaProfile a{Speaker::kA, facts("a", 4), {}};
  PersonaProfile b{Speaker::kB, facts("b", 4), {}};
  CHECK(detect_shared_facts(a, b).empty());

  b.facts[0] = normalize_fact(" A HEAD 0", "characteristic", "a   tail 0");
  CHECK(detect_shared_facts(a, b).size() == 1);

  b.facts[2] = a.facts[3];
  const auto shared = detect_shared_facts(a, b);
  CHECK(shared.size() == 2);
  // Independent recount of the intersection.
  size_t count = 0;
  for (const auto& x : a.facts)
    for (const auto& y : b.facts) count += x == y;
  CHECK(count == shared.size());
}

TEST_CASE("candidate ids are stable and JSON round-trips") {
  const Dialogue d = make_dialogue("d", 3, facts("a", 2), facts("b", 2));
  auto cs = build_candidates(d, extract_windows(d, 5));
  CHECK(build_candidates(d, extract_windows(d, 5))[0].candidate_id == cs[0].candidate_id);
  cs[0].filter_head_score = 0.25;
  cs[0].llm_tail_label = Verdict::kAbstain;
  cs[1].final_label = true;
  const auto back = parse_candidates(serialize_candidates(cs));
  REQUIRE(back.size() == cs.size());
  CHECK(serialize_candidates(back) == serialize_candidates(cs));
  CHECK(back[0].filter_head_score == 0.25);
  CHECK(back[0].llm_tail_label == Verdict::kAbstain);
}

TEST_CASE("heuristic label must agree with source") {
  const Dialogue d = make_dialogue("d", 1, facts("a", 1), {});
  auto j = candidate_to_json(build_candidates(d, extract_windows(d, 5))[0]);
  j["heuristic_label"] = false;
  CHECK_THROWS_AS(candidate_from_json(j), SchemaError);
}
