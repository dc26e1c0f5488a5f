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

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <thread>

#include "doctest.h"
#include "factforge/errors.hpp"
#include "factforge/filter.hpp"
#include "httplib.h"
#include "json.hpp"
#include "support.hpp"

using namespace factforge;

namespace {

std::vector<CandidateExample> ten_candidates() {
  std::vector<PersonaFact> a;
  for (int i = 0; i < 10; ++i)
    a.push_back(testing::fact("head " + std::to_string(i), Relation::kExperience,
                              "tail " + std::to_string(i)));
  const Dialogue d = testing::make_dialogue("d", 1, a, {});
  return build_candidates(d, extract_windows(d, 5));
}

class ConstantScorer : public RelevanceScorer {
 public:
  explicit ConstantScorer(double v) : v_(v) {}
  double score(std::string_view, std::string_view) override { return v_; }
  std::string scorer_id() const override { return "constant"; }

 private:
  double v_;
};

class TableScorer : public RelevanceScorer {
 public:
  std::map<std::string, double, std::less<>> table;
  std::string poison;
  double score(std::string_view, std::string_view fact) override {
    if (fact == poison) throw std::runtime_error("boom");
    return table.find(fact)->second;
  }
  std::string scorer_id() const override { return "table"; }
};

// Brute force: every candidate threshold, rate = share of scores >= it,
// nearest to the target, ties toward the higher threshold.
std::pair<double, double> oracle(const std::vector<double>& scores, double target) {
  std::set<double> distinct(scores.begin(), scores.end());
  double best_t = 0, best_rate = 0, best_gap = 1e9;
  for (double t : distinct) {
    size_t k = 0;
    for (double s : scores) k += s >= t;
    const double rate = static_cast<double>(k) / scores.size();
    const double gap = std::abs(rate - target);
    if (gap < best_gap || (gap == best_gap && t > best_t)) {
      best_gap = gap;
      best_t = t;
      best_rate = rate;
    }
  }
  return {best_t, best_rate};
}

}  // namespace

TEST_CASE("constant scorer fills both parts") {
  auto cs = ten_candidates();
  ConstantScorer s(0.5);
  const auto summary = score_candidates(cs, s);
  CHECK(summary.scored == 10);
  for (const auto& c : cs) {
    CHECK(c.filter_head_score == 0.5);
    CHECK(c.filter_tail_score == 0.5);
  }
}

TEST_CASE("table scorer passes values through; one failure is flagged") {
  auto cs = ten_candidates();
  TableScorer s;
  for (int i = 0; i < 10; ++i) {
    s.table["head " + std::to_string(i)] = i / 10.0;
    s.table["tail " + std::to_string(i)] = 1.0 - i / 10.0;
  }
  s.poison = "head 3";
  const auto summary = score_candidates(cs, s);
  CHECK(summary.scored == 9);
  CHECK(summary.failed == 1);
  for (const auto& c : cs) {
    if (c.fact.head == "head 3") {
      CHECK(c.scoring_failed);
      continue;
    }
    CHECK(c.filter_head_score == s.table[c.fact.head]);
    CHECK(c.filter_tail_score == s.table[c.fact.tail]);
  }
  SUBCASE("already scored candidates are skipped without rescore") {
    s.poison.clear();
    const auto again = score_candidates(cs, s);
    CHECK(again.skipped == 9);
    CHECK(again.scored == 1);
  }
}

TEST_CASE("scores outside [0, 1] are a contract violation") {
  auto cs = ten_candidates();
  ConstantScorer s(1.5);
  CHECK_THROWS_AS(score_candidates(cs, s), ContractViolation);
}

TEST_CASE("calibration examples") {
  const std::vector<double> scores = {0.1, 0.4, 0.6, 0.9};
  auto c = calibrate_threshold(scores, 0.5);
  CHECK(c.threshold == 0.6);
  CHECK(c.achieved_positive_rate == 0.5);
  c = calibrate_threshold(scores, 0.25);
  CHECK(c.threshold == 0.9);
  CHECK(c.achieved_positive_rate == 0.25);
  const std::vector<double> flat(7, 0.7);
  for (double target : {0.1, 0.5, 0.9}) {
    c = calibrate_threshold(flat, target);
    CHECK(c.threshold == 0.7);
    CHECK(c.achieved_positive_rate == 1.0);
  }
  CHECK_THROWS_AS(calibrate_threshold(std::vector<double>{}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_threshold(scores, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_threshold(scores, 1.0), std::invalid_argument);
}

TEST_CASE("calibration matches the brute-force oracle on random lists with ties") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const size_t n = 1 + rng() % 40;
    std::vector<double> scores;
    for (size_t i = 0; i < n; ++i) scores.push_back((rng() % 11) / 10.0);
    const double target = 0.05 + (rng() % 90) / 100.0;
    const auto [t, rate] = oracle(scores, target);
    const auto c = calibrate_threshold(scores, target);
    CHECK(c.threshold == t);
    CHECK(c.achieved_positive_rate == rate);
    CHECK(c.sample_size == n);
  }
}

TEST_CASE("soft label rules") {
  CandidateExample c = ten_candidates()[0];
  c.filter_head_score = 0.8;
  c.filter_tail_score = 0.9;
  CalibrationResult cal;
  cal.threshold = 0.6;
  std::vector<CandidateExample> v = {c};
  apply_soft_labels(v, cal, SoftLabelRule::kBothParts);
  CHECK(v[0].soft_label == true);

  v[0].filter_tail_score = 0.3;
  apply_soft_labels(v, cal, SoftLabelRule::kBothParts);
  CHECK(v[0].soft_label == false);
  apply_soft_labels(v, cal, SoftLabelRule::kHeadOnly);
  CHECK(v[0].soft_label == true);
  apply_soft_labels(v, cal, SoftLabelRule::kTailOnly);
  CHECK(v[0].soft_label == false);

  v[0].filter_tail_score.reset();
  v[0].scoring_failed = true;
  const auto summary = apply_soft_labels(v, cal, SoftLabelRule::kBothParts);
  CHECK_FALSE(v[0].soft_label.has_value());
  CHECK(v[0].soft_label_error);
  CHECK(summary.errors == 1);
}

TEST_CASE("calibrating on the rule statistic reaches the target for both_parts") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto cs = ten_candidates();
  for (int rep = 0; rep < 9; ++rep) {
    auto more = ten_candidates();
    cs.insert(cs.end(), more.begin(), more.end());
  }
  for (auto& c : cs) {
    c.filter_head_score = u(rng);
    c.filter_tail_score = u(rng);
  }
  std::vector<double> stat;
  for (const auto& c : cs) stat.push_back(*rule_statistic(c, SoftLabelRule::kBothParts));
  const auto cal = calibrate_threshold(stat, 0.5);
  const auto summary = apply_soft_labels(cs, cal, SoftLabelRule::kBothParts);
  CHECK(static_cast<double>(summary.positives) / cs.size() ==
        doctest::Approx(cal.achieved_positive_rate));
  CHECK(std::abs(cal.achieved_positive_rate - 0.5) <= 1.0 / cs.size());
}

TEST_CASE("lexical scorer prefers overlapping facts") {
  LexicalOverlapScorer s;
  const std::string context = "A: hello\n<target>B: I love singing in my choir</target>";
  const double on = s.score(context, "good at singing");
  const double off = s.score(context, "collects stamps");
  CHECK(on > off);
  CHECK(on >= 0.0);
  CHECK(on <= 1.0);
  CHECK(s.score(context, "good at singing") == on);
}

TEST_CASE("http scorer talks to a scoring endpoint") {
  httplib::Server server;
  int calls = 0;
  server.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    if (calls == 1) {
      res.status = 503;
      return;
    }
    const auto body = nlohmann::json::parse(req.body);
    const double s = body["fact"] == "tail 0" ? 0.25 : 0.75;
    res.set_content(nlohmann::json{{"score", s}}.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpScorerOptions options;
  options.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/score";
  options.retries = 2;
  HttpScorer scorer(options);
  std::vector<CandidateExample> one = {ten_candidates()[0]};
  const auto summary = score_candidates(one, scorer);
  CHECK(summary.scored == 1);
  CHECK(one[0].filter_head_score == 0.75);
  CHECK(one[0].filter_tail_score == 0.25);
  server.stop();
  t.join();
}
