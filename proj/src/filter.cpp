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

#include "factforge/filter.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <stdexcept>
#include <thread>

#include "factforge/errors.hpp"
#include "factforge/parallel.hpp"
#include "factforge/text.hpp"
#include "http_endpoint.hpp"
#include "httplib.h"

namespace factforge {

using nlohmann::json;
using nlohmann::ordered_json;

double LexicalOverlapScorer::score(std::string_view context, std::string_view fact) {
  const auto fact_tokens = content_tokens(fact);
  if (fact_tokens.empty()) return 0.0;
  std::set<std::string> target_tokens;
  std::set<std::string> context_tokens;
  for (const auto& line : split_lines(context)) {
    const bool is_target = line.rfind("<target>", 0) == 0;
    for (auto& tok : content_tokens(line)) {
      if (tok == "target") continue;
      if (is_target) target_tokens.insert(tok);
      context_tokens.insert(std::move(tok));
    }
  }
  double hits = 0.0;
  for (const auto& tok : fact_tokens) {
    if (target_tokens.contains(tok)) {
      hits += 1.0;
    } else if (context_tokens.contains(tok)) {
      hits += 0.5;
    }
  }
  const double overlap = hits / static_cast<double>(fact_tokens.size());
  return 1.0 / (1.0 + std::exp(-6.0 * (overlap - 0.4)));
}

HttpScorer::HttpScorer(HttpScorerOptions options) : options_(std::move(options)) {
  detail::split_endpoint(options_.endpoint);
}

double HttpScorer::score(std::string_view context, std::string_view fact) {
  const auto endpoint = detail::split_endpoint(options_.endpoint);
  const std::string body = json{{"context", context}, {"fact", fact}}.dump();
  int last_status = 0;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    httplib::Client client(endpoint.base);
    const auto timeout = std::chrono::milliseconds(options_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    auto res = client.Post(endpoint.path, body, "application/json");
    if (res && res->status == 200) {
      json reply = json::parse(res->body, nullptr, false);
      if (reply.is_discarded() || !reply.contains("score") || !reply["score"].is_number())
        throw TransportError("scorer reply lacks a numeric score", res->status);
      return reply["score"].get<double>();
    }
    last_status = res ? res->status : 0;
    if (res && res->status >= 400 && res->status < 500 && res->status != 429) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50 << attempt));
  }
  throw TransportError("scorer request failed", last_status);
}

ScoringSummary score_candidates(std::vector<CandidateExample>& candidates,
                                RelevanceScorer& scorer, const ScoreOptions& options) {
  std::vector<int> outcome(candidates.size(), 0);  // 0 skipped, 1 scored, 2 failed
  auto checked = [&](std::string_view context, std::string_view fact) {
    const double s = scorer.score(context, fact);
    if (!std::isfinite(s) || s < 0.0 || s > 1.0)
      throw ContractViolation("scorer " + scorer.scorer_id() + " returned " +
                              std::to_string(s) + ", outside [0, 1]");
    return s;
  };
  auto work = [&](size_t i) {
    CandidateExample& c = candidates[i];
    const bool need_head = options.head && (options.rescore || !c.filter_head_score);
    const bool need_tail = options.tail && (options.rescore || !c.filter_tail_score);
    if (!need_head && !need_tail) return;
    const std::string context = serialize_context(c.window);
    try {
      if (need_head) c.filter_head_score = checked(context, c.fact.head);
      if (need_tail) c.filter_tail_score = checked(context, c.fact.tail);
      c.scoring_failed = false;
      outcome[i] = 1;
    } catch (const ContractViolation&) {
      throw;
    } catch (const std::exception&) {
      c.scoring_failed = true;
      outcome[i] = 2;
    }
  };
  parallel_for(candidates.size(), scorer.concurrent_safe() ? options.max_in_flight : 1,
               work);
  ScoringSummary summary;
  for (int o : outcome) {
    if (o == 0) ++summary.skipped;
    if (o == 1) ++summary.scored;
    if (o == 2) ++summary.failed;
  }
  return summary;
}

CalibrationResult calibrate_threshold(std::span<const double> scores,
                                      double target_positive_rate) {
  if (scores.empty()) throw std::invalid_argument("cannot calibrate on zero scores");
  if (!(target_positive_rate > 0.0 && target_positive_rate < 1.0))
    throw std::invalid_argument("target positive rate must lie in (0, 1)");
  std::vector<double> sorted(scores.begin(), scores.end());
  for (double s : sorted) {
    if (!std::isfinite(s) || s < 0.0 || s > 1.0)
      throw std::invalid_argument("scores must be probabilities");
  }
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  const double n = static_cast<double>(sorted.size());
  CalibrationResult best;
  best.target_positive_rate = target_positive_rate;
  best.sample_size = sorted.size();
  double best_gap = 2.0;
  for (size_t i = 0; i < sorted.size(); ++i) {
    // Only the last position of a run of equal scores is a feasible count.
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    const double rate = static_cast<double>(i + 1) / n;
    const double gap = std::abs(rate - target_positive_rate);
    if (gap < best_gap) {
      best_gap = gap;
      best.threshold = sorted[i];
      best.achieved_positive_rate = rate;
    }
  }
  return best;
}

ordered_json calibration_to_json(const CalibrationResult& c) {
  ordered_json j;
  j["threshold"] = c.threshold;
  j["achieved_positive_rate"] = c.achieved_positive_rate;
  j["target_positive_rate"] = c.target_positive_rate;
  j["sample_size"] = c.sample_size;
  return j;
}

CalibrationResult calibration_from_json(const json& j) {
  CalibrationResult c;
  try {
    c.threshold = j.at("threshold").get<double>();
    c.achieved_positive_rate = j.at("achieved_positive_rate").get<double>();
    c.target_positive_rate = j.at("target_positive_rate").get<double>();
    c.sample_size = j.at("sample_size").get<size_t>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("calibration record: ") + e.what());
  }
  if (c.threshold < 0.0 || c.threshold > 1.0 || c.achieved_positive_rate < 0.0 ||
      c.achieved_positive_rate > 1.0)
    throw SchemaError("calibration values outside [0, 1]");
  return c;
}

SoftLabelRule parse_soft_label_rule(std::string_view text) {
  const std::string key = normalize_text(text);
  if (key == "both_parts") return SoftLabelRule::kBothParts;
  if (key == "head_only") return SoftLabelRule::kHeadOnly;
  if (key == "tail_only") return SoftLabelRule::kTailOnly;
  if (key == "mean") return SoftLabelRule::kMean;
  throw ConfigError("unknown soft label rule '" + std::string(text) + "'");
}

std::string_view soft_label_rule_name(SoftLabelRule rule) {
  switch (rule) {
    case SoftLabelRule::kBothParts: return "both_parts";
    case SoftLabelRule::kHeadOnly: return "head_only";
    case SoftLabelRule::kTailOnly: return "tail_only";
    case SoftLabelRule::kMean: return "mean";
  }
  return "both_parts";
}

std::optional<double> rule_statistic(const CandidateExample& c, SoftLabelRule rule) {
  switch (rule) {
    case SoftLabelRule::kHeadOnly: return c.filter_head_score;
    case SoftLabelRule::kTailOnly: return c.filter_tail_score;
    case SoftLabelRule::kBothParts:
      if (!c.filter_head_score || !c.filter_tail_score) return std::nullopt;
      return std::min(*c.filter_head_score, *c.filter_tail_score);
    case SoftLabelRule::kMean:
      if (!c.filter_head_score || !c.filter_tail_score) return std::nullopt;
      return (*c.filter_head_score + *c.filter_tail_score) / 2.0;
  }
  return std::nullopt;
}

SoftLabelSummary apply_soft_labels(std::vector<CandidateExample>& candidates,
                                   const CalibrationResult& calibration,
                                   SoftLabelRule rule) {
  SoftLabelSummary summary;
  for (auto& c : candidates) {
    const auto h = c.filter_head_score;
    const auto t = c.filter_tail_score;
    std::optional<bool> label;
    switch (rule) {
      case SoftLabelRule::kBothParts:
        if (h && t) label = *h >= calibration.threshold && *t >= calibration.threshold;
        break;
      case SoftLabelRule::kHeadOnly:
        if (h) label = *h >= calibration.threshold;
        break;
      case SoftLabelRule::kTailOnly:
        if (t) label = *t >= calibration.threshold;
        break;
      case SoftLabelRule::kMean:
        if (h && t) label = (*h + *t) / 2.0 >= calibration.threshold;
        break;
    }
    c.soft_label = label;
    c.soft_label_error = !label.has_value();
    if (label) {
      ++summary.labeled;
      if (*label) ++summary.positives;
    } else {
      ++summary.errors;
    }
  }
  return summary;
}

}  // namespace factforge
