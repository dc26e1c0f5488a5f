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
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "factforge/corpus.hpp"
#include "factforge/labeler.hpp"
#include "factforge/pairing.hpp"
#include "json.hpp"

namespace factforge {

enum class DatasetVariant { kHead, kTail, kCombined };

std::string_view dataset_variant_name(DatasetVariant v);  // head_variant, ...
DatasetVariant parse_dataset_variant(std::string_view text);

struct Provenance {
  std::string template_id;
  std::string model_id;
  std::optional<double> filter_head_score;
  std::optional<double> filter_tail_score;
  std::optional<bool> soft_label;
  std::string pipeline_version;
  std::string context_format;

  bool operator==(const Provenance&) const = default;
};

// One finished dataset row. example_id equals the candidate id, so the same
// (window, fact) pair carries the same id in every variant.
struct LinkExample {
  std::string example_id;
  std::string dialogue_id;
  std::string context;
  std::string head;
  Relation relation = Relation::kCharacteristic;
  std::string tail;
  bool label = false;
  DatasetVariant variant = DatasetVariant::kCombined;
  Provenance provenance;

  bool operator==(const LinkExample&) const = default;
};

enum class AbstainPolicy { kExclude, kNegative };

AbstainPolicy parse_abstain_policy(std::string_view text);

inline constexpr std::string_view kPipelineVersion = "factforge-1";

struct AssembleOptions {
  AbstainPolicy abstain = AbstainPolicy::kExclude;
  std::string pipeline_version = std::string(kPipelineVersion);
};

struct AssembledDataset {
  std::vector<LinkExample> examples;
  size_t abstain_excluded = 0;
};

// Projects annotated candidates onto one variant: head_variant from head
// verdicts, tail_variant from tail verdicts, combined from combine_labels().
// Candidates lacking a usable verdict are dropped and counted.
AssembledDataset assemble(std::span<const CandidateExample> candidates,
                          std::span<const AnnotationResult> head_annotations,
                          std::span<const AnnotationResult> tail_annotations,
                          DatasetVariant variant, const AssembleOptions& options = {});

inline constexpr int kDatasetSchemaVersion = 1;

nlohmann::ordered_json example_to_json(const LinkExample& e);
LinkExample example_from_json(const nlohmann::json& j);

// Throws SchemaError if an example breaks the row schema.
void validate_example(const LinkExample& e);

struct DatasetManifest {
  int schema_version = kDatasetSchemaVersion;
  size_t count = 0;
  std::string content_digest;  // sha256 of the data file bytes
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();
};

std::filesystem::path manifest_path_for(const std::filesystem::path& data_path);

// Writes <name>.jsonl and <name>.manifest.json atomically. Throws SchemaError
// naming the first offending record index (duplicate ids included).
DatasetManifest write_dataset(std::span<const LinkExample> examples,
                              const std::filesystem::path& data_path,
                              const nlohmann::ordered_json& metadata = nlohmann::ordered_json::object());

DatasetManifest read_manifest(const std::filesystem::path& data_path);

// Verifies the manifest digest (CorruptionError on mismatch) and the schema.
std::vector<LinkExample> read_dataset(const std::filesystem::path& data_path);

struct SplitFractions {
  double train = 0.8;
  double validation = 0.2;
};

// Seeded, platform-independent assignment of dialogues to the train side.
// Throws std::invalid_argument unless both fractions are in [0, 1] and sum
// to 1.
std::set<std::string> split_dialogues(std::vector<std::string> dialogue_ids,
                                      const SplitFractions& fractions,
                                      std::uint64_t seed);

struct SplitResult {
  std::vector<LinkExample> train;
  std::vector<LinkExample> validation;
};

SplitResult apply_split(std::span<const LinkExample> examples,
                        const std::set<std::string>& train_dialogues);

// Dialogue-level split: every window of a dialogue lands on one side.
SplitResult split(std::span<const LinkExample> examples, const SplitFractions& fractions,
                  std::uint64_t seed);

struct RelationCounts {
  size_t positives = 0;
  size_t negatives = 0;
};

struct DatasetStats {
  size_t example_count = 0;
  size_t positive_count = 0;
  double positive_rate = 0.0;  // 0 for an empty dataset
  std::map<Relation, RelationCounts> per_relation;
  size_t abstain_excluded = 0;
};

DatasetStats stats(std::span<const LinkExample> examples, size_t abstain_excluded = 0);
nlohmann::ordered_json stats_to_json(const DatasetStats& s);

}  // namespace factforge
