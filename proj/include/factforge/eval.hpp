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
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "factforge/corpus.hpp"
#include "json.hpp"

namespace factforge {

struct ConfusionCounts {
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;
  size_t tn = 0;

  size_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

// The linked (true) class is positive. A zero denominator defines the ratio
// as 0, forces f1 to 0, and sets `degenerate`.
struct Metrics {
  ConfusionCounts confusion;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  bool degenerate = false;
};

Metrics metrics_from_confusion(const ConfusionCounts& counts);

// Throws std::invalid_argument on empty or mismatched inputs.
Metrics compute_metrics(const std::vector<bool>& predictions, const std::vector<bool>& gold);

// One evaluated example.
struct EvalRecord {
  std::string example_id;
  Relation relation = Relation::kCharacteristic;
  double probability = 0.0;
  bool predicted = false;
  bool gold = false;
  std::string context;
  std::string fact;
};

struct MetricsReport {
  std::string run_label;
  Metrics overall;
  std::map<Relation, Metrics> per_relation;  // empty partitions omitted
  std::vector<std::string> notices;
};

MetricsReport per_relation_metrics(std::span<const EvalRecord> records,
                                   std::string run_label = {});

nlohmann::ordered_json metrics_to_json(const Metrics& m);
nlohmann::ordered_json metrics_report_to_json(const MetricsReport& r);

// Prediction files: one {example_id, probability, predicted, gold} per line.
std::string serialize_predictions(std::span<const EvalRecord> records);

struct PredictionRow {
  std::string example_id;
  double probability = 0.0;
  bool predicted = false;
  bool gold = false;
};
std::vector<PredictionRow> parse_predictions(std::string_view contents);

// One row of the feature-configuration comparison table.
struct ComparisonRow {
  std::string version;
  std::string dataset;
  bool head = false;
  bool tail = false;
  bool relation = false;
  double f1 = 0.0;
  double accuracy = 0.0;
};

std::string render_feature_table(std::span<const ComparisonRow> rows);
// Relation rows, with an F1/Acc column pair per report.
std::string render_relation_table(std::span<const MetricsReport> reports);

enum class ErrorCategory {
  kOverRelianceHead,
  kImplicitHeadConditionalTail,
  kAmbiguousImplication,
  kDataQuality,
  kModelError,
};

inline constexpr std::array<ErrorCategory, 5> kAllErrorCategories = {
    ErrorCategory::kOverRelianceHead, ErrorCategory::kImplicitHeadConditionalTail,
    ErrorCategory::kAmbiguousImplication, ErrorCategory::kDataQuality,
    ErrorCategory::kModelError};

std::string_view error_category_name(ErrorCategory c);
std::optional<ErrorCategory> try_parse_error_category(std::string_view text);

struct ErrorSample {
  std::string example_id;
  std::string context;
  std::string fact;
  bool gold = false;
  bool predicted = false;
  std::optional<ErrorCategory> category;
  std::optional<std::string> annotator_note;

  bool operator==(const ErrorSample&) const = default;
};

// Uniform sample without replacement from the misclassified records,
// reproducible for a given seed. Returns every error when fewer than n exist.
std::vector<ErrorSample> sample_errors(std::span<const EvalRecord> records, size_t n,
                                       std::uint64_t seed);

// Review files are newline-delimited ErrorSample records with null
// category/annotator_note fields for a human to fill in.
std::string serialize_review(std::span<const ErrorSample> samples);
// Throws SchemaError on unknown categories or records where gold == predicted.
std::vector<ErrorSample> parse_review(std::string_view contents);

struct CategoryReport {
  size_t reviewed = 0;
  size_t uncategorized = 0;
  std::map<ErrorCategory, size_t> counts;
};

CategoryReport category_report(std::span<const ErrorSample> samples);
nlohmann::ordered_json category_report_to_json(const CategoryReport& r);
std::string render_category_report(const CategoryReport& r);

}  // namespace factforge
