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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "factforge/corpus.hpp"
#include "factforge/dataset.hpp"
#include "factforge/eval.hpp"
#include "json.hpp"

namespace factforge {

// Which parts of the triple the classifier sees.
enum class FeatureConfig { kH, kT, kHT, kRHT };

std::string_view feature_config_name(FeatureConfig c);  // "H", "T", "HT", "RHT"
FeatureConfig parse_feature_config(std::string_view text);

// "routine or habit", "goal or plan", ...
std::string_view relation_verbalization(Relation relation);

inline constexpr std::string_view kFieldDelimiter = " | ";

std::string serialize_fact(const PersonaFact& fact, FeatureConfig config);

struct TrainingPair {
  std::string context;
  std::string fact_text;
  bool label = false;
};

std::vector<TrainingPair> make_training_pairs(std::span<const LinkExample> examples,
                                              FeatureConfig config);
std::string serialize_training_pairs(std::span<const TrainingPair> pairs);

struct Hyperparameters {
  int epochs = 40;
  size_t batch_size = 16;
  double learning_rate = 0.5;
  size_t max_sequence_length = 256;
};

struct TrainConfig {
  FeatureConfig feature_config = FeatureConfig::kRHT;
  std::uint64_t seed = 13;
  Hyperparameters hyper;
  double threshold = 0.5;
};

// A trained model; predict() must be deterministic and safe to call
// concurrently.
class LinkModel {
 public:
  virtual ~LinkModel() = default;
  virtual double predict(std::string_view context, std::string_view fact_text) const = 0;
};

class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;
  virtual std::string backend_id() const = 0;
  // Trains on the pairs, writes an artifact under artifact_dir and returns
  // the handle load() accepts.
  virtual std::string train(std::span<const TrainingPair> pairs, const TrainConfig& config,
                            const std::filesystem::path& artifact_dir) = 0;
  // Throws BackendError if the artifact is missing or unreadable.
  virtual std::unique_ptr<LinkModel> load(std::string_view model_handle) const = 0;
};

// Logistic regression over token-overlap features between the fact text
// (and each of its " | " fields) and the context. Trained with seeded
// mini-batch gradient descent.
class OverlapLogisticBackend : public ClassifierBackend {
 public:
  static constexpr std::string_view kId = "overlap_logreg_v1";

  std::string backend_id() const override { return std::string(kId); }
  std::string train(std::span<const TrainingPair> pairs, const TrainConfig& config,
                    const std::filesystem::path& artifact_dir) override;
  std::unique_ptr<LinkModel> load(std::string_view model_handle) const override;

  static std::vector<double> features(std::string_view context, std::string_view fact_text,
                                      size_t max_sequence_length);
};

using BackendFactory = std::function<std::unique_ptr<ClassifierBackend>()>;

// Backends are chosen by id. Encoder backends register themselves here;
// the ids "deberta-v3-large" and "deberta-v3-large-nli" are reserved and
// raise BackendError until such a backend is registered.
void register_backend(std::string backend_id, BackendFactory factory);
std::unique_ptr<ClassifierBackend> make_backend(std::string_view backend_id);

struct TrainRun {
  TrainConfig config;
  std::string dataset_manifest_digest;
  std::string validation_manifest_digest;
  std::string train_inputs_digest;  // sha256 of the serialized training pairs
  std::string backend_id;
  std::string model_handle;
  size_t train_count = 0;
  size_t validation_count = 0;
  std::optional<Metrics> validation_metrics;
};

nlohmann::ordered_json train_run_to_json(const TrainRun& run);
TrainRun train_run_from_json(const nlohmann::json& j);
void save_train_run(const TrainRun& run, const std::filesystem::path& path);
TrainRun load_train_run(const std::filesystem::path& path);

struct TrainInputs {
  std::string train_manifest_digest;
  std::string validation_manifest_digest;
};

// Writes <run_dir>/train_inputs.jsonl, the backend artifact under
// <run_dir>/model, and <run_dir>/run.json. Throws std::invalid_argument on an
// empty training set.
TrainRun train(std::span<const LinkExample> train_set,
               std::span<const LinkExample> validation_set, const TrainConfig& config,
               ClassifierBackend& backend, const std::filesystem::path& run_dir,
               const TrainInputs& inputs = {});

class Predictor {
 public:
  explicit Predictor(const TrainRun& run);
  Predictor(const TrainRun& run, const ClassifierBackend& backend);

  double probability(const DialogueWindow& window, const PersonaFact& fact) const;
  double probability(std::string_view context, const PersonaFact& fact) const;
  bool classify(double probability) const { return probability >= threshold_; }
  FeatureConfig feature_config() const { return config_; }

 private:
  FeatureConfig config_;
  double threshold_;
  std::unique_ptr<LinkModel> model_;
};

double predict(const TrainRun& run, const DialogueWindow& window, const PersonaFact& fact);

// Head-only AND tail-only classifiers. The boolean decision is the AND of
// the two thresholded outputs; probability() reports min(p_head, p_tail).
class ComposedPredictor {
 public:
  ComposedPredictor(const TrainRun& head_run, const TrainRun& tail_run);

  double probability(std::string_view context, const PersonaFact& fact) const;
  bool classify(std::string_view context, const PersonaFact& fact) const;
  const Predictor& head() const { return head_; }
  const Predictor& tail() const { return tail_; }

 private:
  Predictor head_;
  Predictor tail_;
};

// Throws std::invalid_argument unless head_run is H and tail_run is T.
ComposedPredictor compose_and(const TrainRun& head_run, const TrainRun& tail_run);

}  // namespace factforge
