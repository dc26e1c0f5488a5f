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

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "factforge/pairing.hpp"
#include "json.hpp"

namespace factforge {

// Scores the relevance of a fact text to a serialized dialogue context.
// Implementations return a probability in [0, 1] and may throw on failure;
// a failure marks the candidate instead of aborting the run.
class RelevanceScorer {
 public:
  virtual ~RelevanceScorer() = default;
  virtual double score(std::string_view context, std::string_view fact) = 0;
  // Whether score() may be called from several threads at once.
  virtual bool concurrent_safe() const { return false; }
  virtual std::string scorer_id() const = 0;
};

// Content-token overlap between the fact and the context, squashed through a
// logistic curve. Tokens on the target line count double.
class LexicalOverlapScorer : public RelevanceScorer {
 public:
  double score(std::string_view context, std::string_view fact) override;
  bool concurrent_safe() const override { return true; }
  std::string scorer_id() const override { return "lexical_overlap_v1"; }
};

struct HttpScorerOptions {
  std::string endpoint;  // e.g. http://127.0.0.1:8900/score
  int timeout_ms = 10000;
  int retries = 2;
};

// POSTs {"context": ..., "fact": ...} and reads {"score": number}.
class HttpScorer : public RelevanceScorer {
 public:
  explicit HttpScorer(HttpScorerOptions options);
  double score(std::string_view context, std::string_view fact) override;
  bool concurrent_safe() const override { return true; }
  std::string scorer_id() const override { return "http:" + options_.endpoint; }

 private:
  HttpScorerOptions options_;
};

struct ScoreOptions {
  bool head = true;
  bool tail = true;
  bool rescore = false;  // overwrite scores that are already populated
  size_t max_in_flight = 1;
};

struct ScoringSummary {
  size_t scored = 0;
  size_t failed = 0;
  size_t skipped = 0;
};

// Fills filter_head_score / filter_tail_score from serialize_context(window)
// and fact.head / fact.tail. A scorer exception flags the candidate with
// scoring_failed; an out-of-range score throws ContractViolation.
ScoringSummary score_candidates(std::vector<CandidateExample>& candidates,
                                RelevanceScorer& scorer,
                                const ScoreOptions& options = {});

struct CalibrationResult {
  double threshold = 0.0;
  double achieved_positive_rate = 0.0;
  double target_positive_rate = 0.0;
  size_t sample_size = 0;
};

// Picks the threshold among the observed scores whose positive rate
// (score >= threshold) lies nearest the target; ties go to the higher
// threshold. Throws std::invalid_argument on empty input or a target
// outside (0, 1).
CalibrationResult calibrate_threshold(std::span<const double> scores,
                                      double target_positive_rate);

nlohmann::ordered_json calibration_to_json(const CalibrationResult& c);
CalibrationResult calibration_from_json(const nlohmann::json& j);

enum class SoftLabelRule { kBothParts, kHeadOnly, kTailOnly, kMean };

SoftLabelRule parse_soft_label_rule(std::string_view text);
std::string_view soft_label_rule_name(SoftLabelRule rule);

// The value compared against the threshold under `rule`. For kBothParts this
// is min(head, tail), since both parts clear a threshold exactly when their
// minimum does.
std::optional<double> rule_statistic(const CandidateExample& c, SoftLabelRule rule);

struct SoftLabelSummary {
  size_t labeled = 0;
  size_t positives = 0;
  size_t errors = 0;
};

SoftLabelSummary apply_soft_labels(std::vector<CandidateExample>& candidates,
                                   const CalibrationResult& calibration,
                                   SoftLabelRule rule = SoftLabelRule::kBothParts);

}  // namespace factforge
