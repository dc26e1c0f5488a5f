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

#include <random>
#include <set>

#include "doctest.h"
#include "factforge/errors.hpp"
#include "factforge/eval.hpp"
#include "support.hpp"

using namespace factforge;

namespace {

// Straight from the definitions.
struct Oracle {
  double precision, recall, f1, accuracy;
  size_t tp, fp, fn, tn;
};

Oracle oracle(const std::vector<bool>& p, const std::vector<bool>& g) {
  Oracle o{};
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] && g[i]) ++o.tp;
    if (p[i] && !g[i]) ++o.fp;
    if (!p[i] && g[i]) ++o.fn;
    if (!p[i] && !g[i]) ++o.tn;
  }
  o.precision = o.tp + o.fp ? double(o.tp) / (o.tp + o.fp) : 0.0;
  o.recall = o.tp + o.fn ? double(o.tp) / (o.tp + o.fn) : 0.0;
  o.f1 = o.precision + o.recall > 0 ? 2 * o.precision * o.recall / (o.precision + o.recall) : 0.0;
  o.accuracy = double(o.tp + o.tn) / p.size();
  return o;
}

std::vector<EvalRecord> records_from(const std::vector<std::tuple<Relation, bool, bool>>& rows) {
  std::vector<EvalRecord> out;
  for (size_t i = 0; i < rows.size(); ++i) {
    EvalRecord r;
    r.example_id = "e" + std::to_string(i);
    r.relation = std::get<0>(rows[i]);
    r.predicted = std::get<1>(rows[i]);
    r.gold = std::get<2>(rows[i]);
    r.probability = r.predicted ? 0.9 : 0.1;
    r.context = "ctx " + std::to_string(i);
    r.fact = "fact " + std::to_string(i);
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("perfect predictions") {
  const std::vector<bool> all(4, true);
  const Metrics m = compute_metrics(all, all);
  CHECK(m.f1 == 1.0);
  CHECK(m.accuracy == 1.0);
}

TEST_CASE("hand-computed confusion") {
  ConfusionCounts c;
  c.tp = 2;
  c.fp = 1;
  c.fn = 1;
  c.tn = 6;
  const Metrics m = metrics_from_confusion(c);
  CHECK(m.precision == doctest::Approx(2.0 / 3.0));
  CHECK(m.recall == doctest::Approx(2.0 / 3.0));
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(m.accuracy == doctest::Approx(0.8));
}

TEST_CASE("no positives anywhere is degenerate") {
  const std::vector<bool> none(5, false);
  const Metrics m = compute_metrics(none, none);
  CHECK(m.f1 == 0.0);
  CHECK(m.degenerate);
  CHECK(m.accuracy == 1.0);
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(compute_metrics({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(compute_metrics({true}, {true, false}), std::invalid_argument);
}

TEST_CASE("compute_metrics equals the oracle on random inputs") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t n = 1 + rng() % 300;
    std::vector<bool> p(n), g(n);
    for (size_t i = 0; i < n; ++i) {
      p[i] = rng() % 2;
      g[i] = rng() % 3 == 0;
    }
    const Metrics m = compute_metrics(p, g);
    const Oracle o = oracle(p, g);
    CHECK(m.confusion.tp == o.tp);
    CHECK(m.confusion.fp == o.fp);
    CHECK(m.confusion.fn == o.fn);
    CHECK(m.confusion.tn == o.tn);
    CHECK(m.precision == o.precision);
    CHECK(m.recall == o.recall);
    CHECK(m.f1 == o.f1);
    CHECK(m.accuracy == o.accuracy);
  }
}

TEST_CASE("per-relation metrics") {
  const auto records = records_from({{Relation::kCharacteristic, true, true},
                                     {Relation::kCharacteristic, true, false},
                                     {Relation::kCharacteristic, false, true},
                                     {Relation::kExperience, true, true},
                                     {Relation::kExperience, false, false},
                                     {Relation::kExperience, false, false}});
  const auto report = per_relation_metrics(records, "run");
  REQUIRE(report.per_relation.size() == 2);
  const auto ch = oracle({true, true, false}, {true, false, true});
  const auto ex = oracle({true, false, false}, {true, false, false});
  CHECK(report.per_relation.at(Relation::kCharacteristic).f1 == ch.f1);
  CHECK(report.per_relation.at(Relation::kExperience).f1 == ex.f1);
  CHECK(report.notices.size() == 3);

  ConfusionCounts sum;
  for (const auto& [rel, m] : report.per_relation) {
    sum.tp += m.confusion.tp;
    sum.fp += m.confusion.fp;
    sum.fn += m.confusion.fn;
    sum.tn += m.confusion.tn;
  }
  CHECK(sum.tp == report.overall.confusion.tp);
  CHECK(sum.fp == report.overall.confusion.fp);
  CHECK(sum.fn == report.overall.confusion.fn);
  CHECK(sum.tn == report.overall.confusion.tn);

  const auto single = records_from({{Relation::kGoalPlan, true, true},
                                    {Relation::kGoalPlan, false, true},
                                    {Relation::kGoalPlan, true, false}});
  const auto sr = per_relation_metrics(single);
  CHECK(sr.per_relation.at(Relation::kGoalPlan).f1 == sr.overall.f1);
  CHECK(sr.per_relation.at(Relation::kGoalPlan).accuracy == sr.overall.accuracy);
}

TEST_CASE("predictions round trip") {
  const auto records = records_from({{Relation::kCharacteristic, true, false},
                                     {Relation::kRelationship, false, false}});
  const auto rows = parse_predictions(serialize_predictions(records));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].example_id == "e0");
  CHECK(rows[0].predicted);
  CHECK_FALSE(rows[0].gold);
  CHECK(rows[0].probability == 0.9);
}

TEST_CASE("error sampling") {
  const auto perfect = records_from({{Relation::kCharacteristic, true, true}});
  CHECK(sample_errors(perfect, 50, 1).empty());

  std::vector<std::tuple<Relation, bool, bool>> rows;
  for (int i = 0; i < 30; ++i) rows.emplace_back(Relation::kExperience, i < 10, false);
  const auto ten = records_from(rows);
  CHECK(sample_errors(ten, 50, 1).size() == 10);

  rows.clear();
  for (int i = 0; i < 400; ++i) rows.emplace_back(Relation::kExperience, i < 328, false);
  const auto pop = records_from(rows);
  const auto a = sample_errors(pop, 50, 42);
  const auto b = sample_errors(pop, 50, 42);
  CHECK(a.size() == 50);
  CHECK(a == b);
  std::set<std::string> ids;
  for (const auto& s : a) {
    ids.insert(s.example_id);
    CHECK(s.predicted != s.gold);
  }
  CHECK(ids.size() == 50);
  CHECK(sample_errors(pop, 50, 43) != a);
}

TEST_CASE("review files") {
  std::vector<std::tuple<Relation, bool, bool>> rows;
  for (int i = 0; i < 6; ++i) rows.emplace_back(Relation::kExperience, true, false);
  auto sample = sample_errors(records_from(rows), 6, 1);
  const auto blank = parse_review(serialize_review(sample));
  CHECK(blank == sample);

  sample[0].category = ErrorCategory::kDataQuality;
  sample[1].category = ErrorCategory::kDataQuality;
  sample[2].category = ErrorCategory::kOverRelianceHead;
  sample[2].annotator_note = "head matched, tail unrelated";
  const auto report = category_report(parse_review(serialize_review(sample)));
  CHECK(report.reviewed == 6);
  CHECK(report.uncategorized == 3);
  CHECK(report.counts.at(ErrorCategory::kDataQuality) == 2);
  CHECK(render_category_report(report).find("data_quality") != std::string::npos);

  sample[3].predicted = sample[3].gold;
  CHECK_THROWS_AS(parse_review(serialize_review(sample)), SchemaError);
}

TEST_CASE("tables") {
  std::vector<ComparisonRow> rows = {{"H", "head_variant", true, false, false, 0.5, 0.9},
                                     {"RHT", "combined", true, true, true, 0.72, 0.93}};
  const std::string table = render_feature_table(rows);
  CHECK(table.find("0.720") != std::string::npos);
  CHECK(table.find("Version") == 0);
  const auto report = per_relation_metrics(records_from({{Relation::kCharacteristic, true, true}}), "RHT");
  const std::string rel = render_relation_table(std::vector<MetricsReport>{report});
  CHECK(rel.find("characteristic") != std::string::npos);
  CHECK(rel.find("experience") == std::string::npos);
}
