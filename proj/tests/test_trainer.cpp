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

#include "doctest.h"
#include "factforge/errors.hpp"
#include "factforge/io.hpp"
#include "factforge/trainer.hpp"
#include "support.hpp"

using namespace factforge;

namespace {

PersonaFact singer() { return testing::fact("a singer", Relation::kCharacteristic, "good at singing"); }

TrainRun train_on(FeatureConfig fc, const testing::TempDir& dir, const std::string& name,
                  std::vector<LinkExample>* validation_out = nullptr) {
  const auto train_set = testing::separable_examples(500, 1, "tr");
  const auto validation = testing::separable_examples(100, 2, "va");
  if (validation_out) *validation_out = validation;
  TrainConfig config;
  config.feature_config = fc;
  OverlapLogisticBackend backend;
  return train(train_set, validation, config, backend, dir / name);
}

}  // namespace

TEST_CASE("fact serialization") {
  CHECK(serialize_fact(singer(), FeatureConfig::kRHT) == "a singer | characteristic | good at singing");
  CHECK(serialize_fact(singer(), FeatureConfig::kH) == "a singer");
  CHECK(serialize_fact(singer(), FeatureConfig::kT) == "good at singing");
  CHECK(serialize_fact(singer(), FeatureConfig::kHT) == "a singer | good at singing");
}

TEST_CASE("feature config names") {
  CHECK(parse_feature_config("R,H,T") == FeatureConfig::kRHT);
  CHECK(parse_feature_config("ht") == FeatureConfig::kHT);
  CHECK_THROWS(parse_feature_config("X"));
}

TEST_CASE("training on a separable set") {
  testing::TempDir dir;
  std::vector<LinkExample> validation;
  const TrainRun run = train_on(FeatureConfig::kRHT, dir, "rht", &validation);
  REQUIRE(run.validation_metrics);
  CHECK(run.validation_metrics->f1 >= 0.9);
  CHECK(run.train_count == 500);

  const Predictor p(run);
  const auto train_set = testing::separable_examples(500, 1, "tr");
  for (size_t i = 0; i < 20; ++i) {
    const auto& e = train_set[i];
    const double prob = p.probability(e.context, PersonaFact{e.head, e.relation, e.tail});
    CHECK((prob >= 0.5) == e.label);
    CHECK(p.probability(e.context, PersonaFact{e.head, e.relation, e.tail}) == prob);
  }

  SUBCASE("saved run reloads to the same predictions") {
    const TrainRun loaded = load_train_run(dir / "rht" / "run.json");
    const Predictor q(loaded);
    const auto& e = validation[0];
    CHECK(q.probability(e.context, {e.head, e.relation, e.tail}) ==
          p.probability(e.context, {e.head, e.relation, e.tail}));
  }
}

TEST_CASE("training is deterministic") {
  testing::TempDir dir;
  train_on(FeatureConfig::kHT, dir, "a");
  train_on(FeatureConfig::kHT, dir, "b");
  CHECK(read_file(dir / "a" / "train_inputs.jsonl") == read_file(dir / "b" / "train_inputs.jsonl"));
  CHECK(read_file(dir / "a" / "model" / "model.json") ==
        read_file(dir / "b" / "model" / "model.json"));
}

TEST_CASE("empty training set is an error") {
  testing::TempDir dir;
  OverlapLogisticBackend backend;
  CHECK_THROWS(train({}, {}, TrainConfig{}, backend, dir / "x"));
}

TEST_CASE("probabilities stay in [0, 1] on random inputs") {
  testing::TempDir dir;
  const TrainRun run = train_on(FeatureConfig::kRHT, dir, "r");
  const Predictor p(run);
  std::mt19937_64 rng(11);
  for (size_t i = 0; i < 1000; ++i) {
    const auto e = testing::random_example(rng, i);
    const double prob = p.probability(e.context, {e.head, e.relation, e.tail});
    CHECK(prob >= 0.0);
    CHECK(prob <= 1.0);
  }
}

TEST_CASE("composed predictor is the AND of its parts") {
  testing::TempDir dir;
  std::vector<LinkExample> validation;
  const TrainRun h = train_on(FeatureConfig::kH, dir, "h", &validation);
  const TrainRun t = train_on(FeatureConfig::kT, dir, "t");
  const ComposedPredictor both = compose_and(h, t);
  for (const auto& e : validation) {
    const PersonaFact f{e.head, e.relation, e.tail};
    const double ph = both.head().probability(e.context, f);
    const double pt = both.tail().probability(e.context, f);
    CHECK(both.classify(e.context, f) == (both.head().classify(ph) && both.tail().classify(pt)));
    CHECK(both.probability(e.context, f) == std::min(ph, pt));
  }
  const TrainRun ht = train_on(FeatureConfig::kHT, dir, "ht");
  CHECK_THROWS_AS(compose_and(h, ht), std::invalid_argument);
}

TEST_CASE("backend registry") {
  CHECK(make_backend("overlap_logreg_v1")->backend_id() == "overlap_logreg_v1");
  CHECK_THROWS_AS(make_backend("deberta-v3-large"), BackendError);
  CHECK_THROWS_AS(make_backend("nope"), BackendError);
}

namespace {

class FixedModel : public LinkModel {
 public:
  explicit FixedModel(double p) : p_(p) {}
  double predict(std::string_view, std::string_view) const override { return p_; }

 private:
  double p_;
};

class FixedBackend : public ClassifierBackend {
 public:
  std::string backend_id() const override { return "fixed_probability"; }
  std::string train(std::span<const TrainingPair>, const TrainConfig&,
                    const std::filesystem::path&) override {
    return "0.5";
  }
  std::unique_ptr<LinkModel> load(std::string_view handle) const override {
    return std::make_unique<FixedModel>(std::stod(std::string(handle)));
  }
};

TrainRun fixed_run(FeatureConfig fc, const std::string& p) {
  TrainRun run;
  run.config.feature_config = fc;
  run.backend_id = "fixed_probability";
  run.model_handle = p;
  return run;
}

}  // namespace

TEST_CASE("composition examples with fixed component probabilities") {
  register_backend("fixed_probability", [] { return std::make_unique<FixedBackend>(); });
  const PersonaFact f = singer();
  const ComposedPredictor negative(fixed_run(FeatureConfig::kH, "0.9"),
                                   fixed_run(FeatureConfig::kT, "0.2"));
  CHECK_FALSE(negative.classify("ctx", f));
  const ComposedPredictor positive(fixed_run(FeatureConfig::kH, "0.9"),
                                   fixed_run(FeatureConfig::kT, "0.8"));
  CHECK(positive.classify("ctx", f));
  CHECK(positive.probability("ctx", f) == 0.8);
}

TEST_CASE("out-of-range backend output is a contract violation") {
  register_backend("fixed_probability", [] { return std::make_unique<FixedBackend>(); });
  const Predictor p(fixed_run(FeatureConfig::kH, "1.5"));
  CHECK_THROWS_AS(p.probability("ctx", singer()), ContractViolation);
}
