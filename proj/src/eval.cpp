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

#include "factforge/eval.hpp"

#include <cstdio>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "factforge/errors.hpp"
#include "factforge/io.hpp"
#include "factforge/rng.hpp"
#include "factforge/text.hpp"

namespace factforge {

using nlohmann::json;
using nlohmann::ordered_json;

Metrics metrics_from_confusion(const ConfusionCounts& c) {
  Metrics m;
  m.confusion = c;
  const size_t predicted_pos = c.tp + c.fp;
  const size_t gold_pos = c.tp + c.fn;
  if (predicted_pos == 0 || gold_pos == 0) m.degenerate = true;
  if (predicted_pos > 0) m.precision = static_cast<double>(c.tp) / predicted_pos;
  if (gold_pos > 0) m.recall = static_cast<double>(c.tp) / gold_pos;
  if (m.degenerate || m.precision + m.recall == 0.0) {
    m.f1 = 0.0;
    m.degenerate = true;
  } else {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  if (c.total() > 0) m.accuracy = static_cast<double>(c.tp + c.tn) / c.total();
  return m;
}

Metrics compute_metrics(const std::vector<bool>& predictions, const std::vector<bool>& gold) {
  if (predictions.size() != gold.size())
    throw std::invalid_argument("predictions and gold differ in length");
  if (predictions.empty()) throw std::invalid_argument("cannot score zero examples");
  ConfusionCounts c;
  for (size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i]) {
      gold[i] ? ++c.tp : ++c.fp;
    } else {
      gold[i] ? ++c.fn : ++c.tn;
    }
  }
  return metrics_from_confusion(c);
}

MetricsReport per_relation_metrics(std::span<const EvalRecord> records, std::string run_label) {
  MetricsReport report;
  report.run_label = std::move(run_label);
  std::map<Relation, std::pair<std::vector<bool>, std::vector<bool>>> parts;
  std::vector<bool> all_pred;
  std::vector<bool> all_gold;
  for (const auto& r : records) {
    parts[r.relation].first.push_back(r.predicted);
    parts[r.relation].second.push_back(r.gold);
    all_pred.push_back(r.predicted);
    all_gold.push_back(r.gold);
  }
  report.overall = compute_metrics(all_pred, all_gold);
  for (Relation rel : kAllRelations) {
    auto it = parts.find(rel);
    if (it == parts.end()) {
      report.notices.push_back("no examples for relation " + std::string(relation_name(rel)));
      continue;
    }
    report.per_relation[rel] = compute_metrics(it->second.first, it->second.second);
  }
  return report;
}

ordered_json metrics_to_json(const Metrics& m) {
  ordered_json j;
  j["confusion"] = {{"tp", m.confusion.tp},
                    {"fp", m.confusion.fp},
                    {"fn", m.confusion.fn},
                    {"tn", m.confusion.tn}};
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["accuracy"] = m.accuracy;
  j["degenerate"] = m.degenerate;
  return j;
}

ordered_json metrics_report_to_json(const MetricsReport& r) {
  ordered_json j;
  j["run_label"] = r.run_label;
  j["overall"] = metrics_to_json(r.overall);
  ordered_json per = ordered_json::object();
  for (const auto& [rel, m] : r.per_relation) per[std::string(relation_name(rel))] = metrics_to_json(m);
  j["per_relation"] = std::move(per);
  j["notices"] = r.notices;
  return j;
}

std::string serialize_predictions(std::span<const EvalRecord> records) {
  std::string out;
  for (const auto& r : records) {
    ordered_json j;
    j["example_id"] = r.example_id;
    j["probability"] = r.probability;
    j["predicted"] = r.predicted;
    j["gold"] = r.gold;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<PredictionRow> parse_predictions(std::string_view contents) {
  std::vector<PredictionRow> rows;
  for (const auto& line : read_record_lines(contents)) {
    json j = json::parse(line.text, nullptr, false);
    try {
      if (j.is_discarded()) throw SchemaError("malformed json");
      rows.push_back({j.at("example_id").get<std::string>(), j.at("probability").get<double>(),
                      j.at("predicted").get<bool>(), j.at("gold").get<bool>()});
    } catch (const std::exception& e) {
      throw SchemaError("prediction line " + std::to_string(line.line_number) + ": " +
                        e.what());
    }
  }
  return rows;
}

namespace {

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string pad(std::string s, size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string render_feature_table(std::span<const ComparisonRow> rows) {
  size_t version_w = 7;
  size_t dataset_w = 7;
  for (const auto& r : rows) {
    version_w = std::max(version_w, r.version.size());
    dataset_w = std::max(dataset_w, r.dataset.size());
  }
  auto mark = [](bool b) { return std::string(b ? "x" : "-"); };
  std::ostringstream out;
  out << pad("Version", version_w) << "  " << pad("Dataset", dataset_w)
      << "  H  T  R  F1     Acc\n";
  for (const auto& r : rows) {
    out << pad(r.version, version_w) << "  " << pad(r.dataset, dataset_w) << "  "
        << mark(r.head) << "  " << mark(r.tail) << "  " << mark(r.relation) << "  "
        << fixed3(r.f1) << "  " << fixed3(r.accuracy) << "\n";
  }
  return out.str();
}

std::string render_relation_table(std::span<const MetricsReport> reports) {
  std::vector<std::string> lines;
  std::string header = pad("Relation", 16);
  std::vector<size_t> widths;
  for (const auto& r : reports) {
    const size_t w = std::max<size_t>(7, r.run_label.size() + 6);
    widths.push_back(w);
    header += pad(r.run_label + " F1", w) + pad(r.run_label + " Acc", w);
  }
  lines.push_back(header);
  for (Relation rel : kAllRelations) {
    bool any = false;
    for (const auto& r : reports) any = any || r.per_relation.contains(rel);
    if (!any) continue;
    std::string line = pad(std::string(relation_name(rel)), 16);
    for (size_t i = 0; i < reports.size(); ++i) {
      auto it = reports[i].per_relation.find(rel);
      if (it == reports[i].per_relation.end()) {
        line += pad("n/a", widths[i]) + pad("n/a", widths[i]);
      } else {
        line += pad(fixed3(it->second.f1), widths[i]) + pad(fixed3(it->second.accuracy), widths[i]);
      }
    }
    lines.push_back(line);
  }
  std::string out;
  for (auto& l : lines) {
    while (!l.empty() && l.back() == ' ') l.pop_back();
    out += l + "\n";
  }
  return out;
}

std::string_view error_category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kOverRelianceHead: return "over_reliance_head";
    case ErrorCategory::kImplicitHeadConditionalTail: return "implicit_head_conditional_tail";
    case ErrorCategory::kAmbiguousImplication: return "ambiguous_implication";
    case ErrorCategory::kDataQuality: return "data_quality";
    case ErrorCategory::kModelError: return "model_error";
  }
  return "model_error";
}

std::optional<ErrorCategory> try_parse_error_category(std::string_view text) {
  const std::string key = normalize_text(text);
  for (ErrorCategory c : kAllErrorCategories) {
    if (error_category_name(c) == key) return c;
  }
  return std::nullopt;
}

std::vector<ErrorSample> sample_errors(std::span<const EvalRecord> records, size_t n,
                                       std::uint64_t seed) {
  std::vector<const EvalRecord*> errors;
  for (const auto& r : records) {
    if (r.predicted != r.gold) errors.push_back(&r);
  }
  DeterministicRng rng(seed);
  std::vector<ErrorSample> out;
  for (size_t idx : rng.sample_indices(errors.size(), n)) {
    const EvalRecord& r = *errors[idx];
    out.push_back({r.example_id, r.context, r.fact, r.gold, r.predicted, std::nullopt,
                   std::nullopt});
  }
  return out;
}

std::string serialize_review(std::span<const ErrorSample> samples) {
  std::string out;
  for (const auto& s : samples) {
    ordered_json j;
    j["example_id"] = s.example_id;
    j["context"] = s.context;
    j["fact"] = s.fact;
    j["gold"] = s.gold;
    j["predicted"] = s.predicted;
    j["category"] = s.category ? json(error_category_name(*s.category)) : json(nullptr);
    j["annotator_note"] = s.annotator_note ? json(*s.annotator_note) : json(nullptr);
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<ErrorSample> parse_review(std::string_view contents) {
  std::vector<ErrorSample> out;
  for (const auto& line : read_record_lines(contents)) {
    const std::string where = "review line " + std::to_string(line.line_number) + ": ";
    json j = json::parse(line.text, nullptr, false);
    if (j.is_discarded()) throw SchemaError(where + "malformed json");
    ErrorSample s;
    try {
      s.example_id = j.at("example_id").get<std::string>();
      s.context = j.at("context").get<std::string>();
      s.fact = j.at("fact").get<std::string>();
      s.gold = j.at("gold").get<bool>();
      s.predicted = j.at("predicted").get<bool>();
      if (j.contains("category") && !j["category"].is_null()) {
        const std::string name = j["category"].get<std::string>();
        s.category = try_parse_error_category(name);
        if (!s.category) throw SchemaError("unknown error category '" + name + "'");
      }
      if (j.contains("annotator_note") && !j["annotator_note"].is_null())
        s.annotator_note = j["annotator_note"].get<std::string>();
    } catch (const json::exception& e) {
      throw SchemaError(where + e.what());
    } catch (const SchemaError& e) {
      throw SchemaError(where + e.what());
    }
    if (s.gold == s.predicted) throw SchemaError(where + "record is not an error");
    out.push_back(std::move(s));
  }
  return out;
}

CategoryReport category_report(std::span<const ErrorSample> samples) {
  CategoryReport r;
  for (ErrorCategory c : kAllErrorCategories) r.counts[c] = 0;
  for (const auto& s : samples) {
    ++r.reviewed;
    if (s.category) {
      ++r.counts[*s.category];
    } else {
      ++r.uncategorized;
    }
  }
  return r;
}

ordered_json category_report_to_json(const CategoryReport& r) {
  ordered_json j;
  j["reviewed"] = r.reviewed;
  j["uncategorized"] = r.uncategorized;
  ordered_json cats = ordered_json::object();
  for (const auto& [c, n] : r.counts) {
    cats[std::string(error_category_name(c))] = {
        {"count", n},
        {"fraction", r.reviewed == 0 ? 0.0 : static_cast<double>(n) / r.reviewed}};
  }
  j["categories"] = std::move(cats);
  return j;
}

std::string render_category_report(const CategoryReport& r) {
  std::ostringstream out;
  out << "reviewed " << r.reviewed << " errors (" << r.uncategorized << " uncategorized)\n";
  for (const auto& [c, n] : r.counts) {
    const double pct = r.reviewed == 0 ? 0.0 : 100.0 * static_cast<double>(n) / r.reviewed;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%5.1f%%", pct);
    out << pad(std::string(error_category_name(c)), 32) << std::setw(4) << n << "  " << buf
        << "\n";
  }
  return out.str();
}

}  // namespace factforge
