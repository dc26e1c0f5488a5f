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

#include "factforge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "factforge/digest.hpp"
#include "factforge/errors.hpp"
#include "factforge/io.hpp"
#include "factforge/rng.hpp"
#include "factforge/text.hpp"

namespace factforge {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view dataset_variant_name(DatasetVariant v) {
  switch (v) {
    case DatasetVariant::kHead: return "head_variant";
    case DatasetVariant::kTail: return "tail_variant";
    case DatasetVariant::kCombined: return "combined";
  }
  return "combined";
}

DatasetVariant parse_dataset_variant(std::string_view text) {
  const std::string key = normalize_text(text);
  if (key == "head_variant" || key == "head") return DatasetVariant::kHead;
  if (key == "tail_variant" || key == "tail") return DatasetVariant::kTail;
  if (key == "combined") return DatasetVariant::kCombined;
  throw SchemaError("unknown dataset variant '" + std::string(text) + "'");
}

AbstainPolicy parse_abstain_policy(std::string_view text) {
  const std::string key = normalize_text(text);
  if (key == "exclude") return AbstainPolicy::kExclude;
  if (key == "negative") return AbstainPolicy::kNegative;
  throw ConfigError("unknown abstain policy '" + std::string(text) + "'");
}

namespace {

std::map<std::string, const AnnotationResult*> index_by_candidate(
    std::span<const AnnotationResult> annotations) {
  std::map<std::string, const AnnotationResult*> index;
  for (const auto& a : annotations) index.emplace(a.candidate_id, &a);
  return index;
}

std::optional<bool> project(const AnnotationResult* a, AbstainPolicy policy) {
  if (a == nullptr) return std::nullopt;
  if (a->verdict == Verdict::kAbstain) {
    if (policy == AbstainPolicy::kNegative) return false;
    return std::nullopt;
  }
  return a->verdict == Verdict::kYes;
}

}  // namespace

AssembledDataset assemble(std::span<const CandidateExample> candidates,
                          std::span<const AnnotationResult> head_annotations,
                          std::span<const AnnotationResult> tail_annotations,
                          DatasetVariant variant, const AssembleOptions& options) {
  const auto heads = index_by_candidate(head_annotations);
  const auto tails = index_by_candidate(tail_annotations);
  auto lookup = [](const auto& index, const std::string& id) -> const AnnotationResult* {
    auto it = index.find(id);
    return it == index.end() ? nullptr : it->second;
  };

  AssembledDataset out;
  std::set<std::string> seen;
  for (const auto& c : candidates) {
    if (!seen.insert(c.candidate_id).second) continue;
    const AnnotationResult* h = lookup(heads, c.candidate_id);
    const AnnotationResult* t = lookup(tails, c.candidate_id);

    std::optional<bool> label;
    std::string template_id;
    std::string model_id;
    switch (variant) {
      case DatasetVariant::kHead:
        label = project(h, options.abstain);
        if (h) template_id = h->template_id, model_id = h->model_id;
        break;
      case DatasetVariant::kTail:
        label = project(t, options.abstain);
        if (t) template_id = t->template_id, model_id = t->model_id;
        break;
      case DatasetVariant::kCombined:
        if (h && t) {
          const CombinedLabel combined = combine_labels(h->verdict, t->verdict);
          if (combined.decided || options.abstain == AbstainPolicy::kNegative)
            label = combined.final_label;
          template_id = h->template_id == t->template_id
                            ? h->template_id
                            : h->template_id + "+" + t->template_id;
          model_id = h->model_id == t->model_id ? h->model_id
                                                : h->model_id + "+" + t->model_id;
        }
        break;
    }
    if (!label) {
      ++out.abstain_excluded;
      continue;
    }
    LinkExample e;
    e.example_id = c.candidate_id;
    e.dialogue_id = c.window.dialogue_id;
    e.context = serialize_context(c.window);
    e.head = c.fact.head;
    e.relation = c.fact.relation;
    e.tail = c.fact.tail;
    e.label = *label;
    e.variant = variant;
    e.provenance.template_id = template_id;
    e.provenance.model_id = model_id;
    e.provenance.filter_head_score = c.filter_head_score;
    e.provenance.filter_tail_score = c.filter_tail_score;
    e.provenance.soft_label = c.soft_label;
    e.provenance.pipeline_version = options.pipeline_version;
    e.provenance.context_format = std::string(kContextFormat);
    out.examples.push_back(std::move(e));
  }
  return out;
}

namespace {

template <typename T>
json nullable(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> read_nullable(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

}  // namespace

ordered_json example_to_json(const LinkExample& e) {
  ordered_json j;
  j["example_id"] = e.example_id;
  j["dialogue_id"] = e.dialogue_id;
  j["context"] = e.context;
  j["head"] = e.head;
  j["relation"] = relation_name(e.relation);
  j["tail"] = e.tail;
  j["label"] = e.label;
  j["variant"] = dataset_variant_name(e.variant);
  ordered_json prov;
  prov["template_id"] = e.provenance.template_id;
  prov["model_id"] = e.provenance.model_id;
  prov["filter_scores"] = {{"head", nullable(e.provenance.filter_head_score)},
                           {"tail", nullable(e.provenance.filter_tail_score)}};
  prov["soft_label"] = nullable(e.provenance.soft_label);
  prov["pipeline_version"] = e.provenance.pipeline_version;
  prov["context_format"] = e.provenance.context_format;
  j["provenance"] = std::move(prov);
  return j;
}

LinkExample example_from_json(const json& j) {
  LinkExample e;
  try {
    e.example_id = j.at("example_id").get<std::string>();
    e.dialogue_id = j.at("dialogue_id").get<std::string>();
    e.context = j.at("context").get<std::string>();
    e.head = j.at("head").get<std::string>();
    auto relation = try_parse_relation(j.at("relation").get<std::string>());
    if (!relation) throw SchemaError("unknown relation");
    e.relation = *relation;
    e.tail = j.at("tail").get<std::string>();
    e.label = j.at("label").get<bool>();
    e.variant = parse_dataset_variant(j.at("variant").get<std::string>());
    const json& prov = j.at("provenance");
    e.provenance.template_id = prov.at("template_id").get<std::string>();
    e.provenance.model_id = prov.at("model_id").get<std::string>();
    e.provenance.filter_head_score = read_nullable<double>(prov.at("filter_scores").at("head"));
    e.provenance.filter_tail_score = read_nullable<double>(prov.at("filter_scores").at("tail"));
    e.provenance.soft_label = read_nullable<bool>(prov.at("soft_label"));
    e.provenance.pipeline_version = prov.at("pipeline_version").get<std::string>();
    e.provenance.context_format = prov.at("context_format").get<std::string>();
  } catch (const json::exception& ex) {
    throw SchemaError(std::string("dataset record: ") + ex.what());
  }
  validate_example(e);
  return e;
}

void validate_example(const LinkExample& e) {
  if (trim(e.example_id).empty()) throw SchemaError("empty example_id");
  if (trim(e.dialogue_id).empty()) throw SchemaError("empty dialogue_id");
  if (trim(e.context).empty()) throw SchemaError("empty context");
  if (trim(e.head).empty()) throw SchemaError("empty head");
  if (trim(e.tail).empty()) throw SchemaError("empty tail");
  for (const auto& score : {e.provenance.filter_head_score, e.provenance.filter_tail_score}) {
    if (score && !(*score >= 0.0 && *score <= 1.0))
      throw SchemaError("filter score outside [0, 1]");
  }
}

std::filesystem::path manifest_path_for(const std::filesystem::path& data_path) {
  auto p = data_path;
  p.replace_extension(".manifest.json");
  return p;
}

DatasetManifest write_dataset(std::span<const LinkExample> examples,
                              const std::filesystem::path& data_path,
                              const ordered_json& metadata) {
  std::string contents;
  std::set<std::string> ids;
  for (size_t i = 0; i < examples.size(); ++i) {
    try {
      validate_example(examples[i]);
    } catch (const SchemaError& e) {
      throw SchemaError("record " + std::to_string(i) + ": " + e.what());
    }
    if (!ids.insert(examples[i].example_id).second)
      throw SchemaError("record " + std::to_string(i) + ": duplicate example_id " +
                        examples[i].example_id);
    contents += example_to_json(examples[i]).dump();
    contents.push_back('\n');
  }
  DatasetManifest manifest;
  manifest.count = examples.size();
  manifest.content_digest = sha256_hex(contents);
  manifest.metadata = metadata;

  ordered_json mj;
  mj["schema_version"] = manifest.schema_version;
  mj["count"] = manifest.count;
  mj["content_digest"] = manifest.content_digest;
  mj["data_file"] = data_path.filename().string();
  mj["metadata"] = metadata;
  atomic_write_file(data_path, contents);
  atomic_write_file(manifest_path_for(data_path), mj.dump(2) + "\n");
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& data_path) {
  const auto path = manifest_path_for(data_path);
  json mj = json::parse(read_file(path), nullptr, false);
  if (mj.is_discarded()) throw CorruptionError("unparseable manifest " + path.string());
  DatasetManifest m;
  try {
    m.schema_version = mj.at("schema_version").get<int>();
    m.count = mj.at("count").get<size_t>();
    m.content_digest = mj.at("content_digest").get<std::string>();
    if (mj.contains("metadata")) m.metadata = mj.at("metadata");
  } catch (const json::exception& e) {
    throw CorruptionError("malformed manifest " + path.string() + ": " + e.what());
  }
  if (m.schema_version != kDatasetSchemaVersion)
    throw SchemaError("unsupported dataset schema_version " +
                      std::to_string(m.schema_version));
  return m;
}

std::vector<LinkExample> read_dataset(const std::filesystem::path& data_path) {
  const DatasetManifest manifest = read_manifest(data_path);
  const std::string contents = read_file(data_path);
  if (sha256_hex(contents) != manifest.content_digest)
    throw CorruptionError("content digest mismatch for " + data_path.string());
  std::vector<LinkExample> out;
  for (const auto& line : read_record_lines(contents)) {
    json rec = json::parse(line.text, nullptr, false);
    if (rec.is_discarded())
      throw SchemaError(data_path.string() + ":" + std::to_string(line.line_number) +
                        ": malformed json");
    try {
      out.push_back(example_from_json(rec));
    } catch (const SchemaError& e) {
      throw SchemaError(data_path.string() + ":" + std::to_string(line.line_number) +
                        ": " + e.what());
    }
  }
  if (out.size() != manifest.count)
    throw CorruptionError("manifest count disagrees with " + data_path.string());
  return out;
}

std::set<std::string> split_dialogues(std::vector<std::string> dialogue_ids,
                                      const SplitFractions& fractions, std::uint64_t seed) {
  const bool in_range = fractions.train >= 0.0 && fractions.train <= 1.0 &&
                        fractions.validation >= 0.0 && fractions.validation <= 1.0;
  if (!in_range || std::abs(fractions.train + fractions.validation - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must lie in [0, 1] and sum to 1");
  std::sort(dialogue_ids.begin(), dialogue_ids.end());
  dialogue_ids.erase(std::unique(dialogue_ids.begin(), dialogue_ids.end()),
                     dialogue_ids.end());
  DeterministicRng rng(seed);
  rng.shuffle(dialogue_ids);
  const auto n_train = static_cast<size_t>(
      std::llround(fractions.train * static_cast<double>(dialogue_ids.size())));
  return {dialogue_ids.begin(),
          dialogue_ids.begin() + static_cast<std::ptrdiff_t>(n_train)};
}

SplitResult apply_split(std::span<const LinkExample> examples,
                        const std::set<std::string>& train_dialogues) {
  SplitResult out;
  for (const auto& e : examples) {
    (train_dialogues.contains(e.dialogue_id) ? out.train : out.validation).push_back(e);
  }
  return out;
}

SplitResult split(std::span<const LinkExample> examples, const SplitFractions& fractions,
                  std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(examples.size());
  for (const auto& e : examples) ids.push_back(e.dialogue_id);
  return apply_split(examples, split_dialogues(std::move(ids), fractions, seed));
}

DatasetStats stats(std::span<const LinkExample> examples, size_t abstain_excluded) {
  DatasetStats s;
  s.abstain_excluded = abstain_excluded;
  s.example_count = examples.size();
  for (const auto& e : examples) {
    RelationCounts& rc = s.per_relation[e.relation];
    if (e.label) {
      ++s.positive_count;
      ++rc.positives;
    } else {
      ++rc.negatives;
    }
  }
  s.positive_rate = static_cast<double>(s.positive_count) /
                    static_cast<double>(std::max<size_t>(s.example_count, 1));
  return s;
}

ordered_json stats_to_json(const DatasetStats& s) {
  ordered_json j;
  j["example_count"] = s.example_count;
  j["positive_count"] = s.positive_count;
  j["positive_rate"] = s.positive_rate;
  ordered_json per = ordered_json::object();
  for (const auto& [relation, counts] : s.per_relation) {
    per[std::string(relation_name(relation))] = {{"positives", counts.positives},
                                                 {"negatives", counts.negatives}};
  }
  j["per_relation"] = std::move(per);
  j["abstain_excluded"] = s.abstain_excluded;
  return j;
}

}  // namespace factforge
