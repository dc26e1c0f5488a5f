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

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "factforge/corpus.hpp"
#include "factforge/dataset.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "ff") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline fs::path source_dir() { return fs::path(FACTFORGE_SOURCE_DIR); }

inline factforge::PersonaFact fact(const std::string& head, factforge::Relation r,
                                   const std::string& tail) {
  return factforge::normalize_fact(factforge::PersonaFact{head, r, tail});
}

// Dialogue with n alternating utterances "u0", "u1", ...
inline factforge::Dialogue make_dialogue(const std::string& id, size_t n,
                                         std::vector<factforge::PersonaFact> a = {},
                                         std::vector<factforge::PersonaFact> b = {}) {
  factforge::Dialogue d;
  d.dialogue_id = id;
  for (size_t i = 0; i < n; ++i)
    d.utterances.push_back({i % 2 == 0 ? factforge::Speaker::kA : factforge::Speaker::kB, i,
                            "u" + std::to_string(i)});
  d.profiles[0].speaker = factforge::Speaker::kA;
  d.profiles[0].facts = std::move(a);
  d.profiles[1].speaker = factforge::Speaker::kB;
  d.profiles[1].facts = std::move(b);
  return d;
}

// Example with awkward text: quotes, unicode, newlines in provenance-free fields.
inline factforge::LinkExample random_example(std::mt19937_64& rng, size_t i) {
  static const char* words[] = {"sing", "dive", "tea", "\"quoted\"", "caf\u00e9", "tab\tbed",
                                "mermaid", "sister", "\u65e5\u672c", "back\\slash"};
  auto phrase = [&](int n) {
    std::string s;
    for (int k = 0; k < n; ++k) s += std::string(k ? " " : "") + words[rng() % 10];
    return s;
  };
  factforge::LinkExample e;
  e.example_id = "ex-" + std::to_string(i);
  e.dialogue_id = "dlg-" + std::to_string(rng() % 40);
  e.context = "A: " + phrase(4) + "\n<target>B: " + phrase(5) + "</target>";
  e.head = "personx " + phrase(2);
  e.relation = factforge::kAllRelations[rng() % factforge::kAllRelations.size()];
  e.tail = phrase(3);
  e.label = rng() % 3 == 0;
  e.variant = factforge::DatasetVariant::kCombined;
  e.provenance.template_id = "cot_v1_head+cot_v1_tail";
  e.provenance.model_id = "gpt-3.5-turbo";
  if (rng() % 2) e.provenance.filter_head_score = (rng() % 1000) / 999.0;
  if (rng() % 2) e.provenance.filter_tail_score = (rng() % 1000) / 999.0;
  if (rng() % 2) e.provenance.soft_label = rng() % 2 == 0;
  e.provenance.pipeline_version = std::string(factforge::kPipelineVersion);
  e.provenance.context_format = std::string(factforge::kContextFormat);
  return e;
}

// Positives repeat the fact's words in the target line; negatives use
// words the fact never contains.
inline std::vector<factforge::LinkExample> separable_examples(size_t n, std::uint64_t seed,
                                                              const std::string& prefix) {
  static const std::vector<std::string> vocab = {
      "guitar", "ocean", "garden", "pilot",  "coffee", "painting", "chess",  "marathon",
      "tokyo",  "beagle", "nurse", "choir",  "farm",   "hospital", "camera", "mountain",
      "tennis", "violin", "bakery", "poetry", "sailing", "cycling", "pottery", "salsa"};
  std::mt19937_64 rng(seed);
  std::vector<factforge::LinkExample> out;
  for (size_t i = 0; i < n; ++i) {
    const std::string h = vocab[rng() % vocab.size()];
    std::string t = vocab[rng() % vocab.size()];
    while (t == h) t = vocab[rng() % vocab.size()];
    factforge::LinkExample e;
    e.example_id = prefix + std::to_string(i);
    e.dialogue_id = prefix + "d" + std::to_string(i);
    e.head = "a " + h + " fan";
    e.relation = factforge::kAllRelations[rng() % factforge::kAllRelations.size()];
    e.tail = "enjoys " + t;
    e.label = i % 2 == 0;
    std::string said;
    if (e.label) {
      said = "i love " + h + " and " + t + " every day";
    } else {
      std::string a = vocab[rng() % vocab.size()], b = vocab[rng() % vocab.size()];
      while (a == h || a == t) a = vocab[rng() % vocab.size()];
      while (b == h || b == t) b = vocab[rng() % vocab.size()];
      said = "i love " + a + " and " + b + " every day";
    }
    e.context = "A: hello there\n<target>B: " + said + "</target>\nA: nice";
    e.provenance.pipeline_version = std::string(factforge::kPipelineVersion);
    e.provenance.context_format = std::string(factforge::kContextFormat);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace testing
