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

#include "factforge/trainer.hpp"

#include <cctype>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <stdexcept>

#include "factforge/digest.hpp"
#include "factforge/errors.hpp"
#include "factforge/io.hpp"
#include "factforge/rng.hpp"
#include "factforge/text.hpp"

namespace factforge {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view feature_config_name(FeatureConfig c) {
  switch (c) {
    case FeatureConfig::kH: return "H";
    case FeatureConfig::kT: return "T";
    case FeatureConfig::kHT: return "HT";
    case FeatureConfig::kRHT: return "RHT";
  }
  return "RHT";
}

FeatureConfig parse_feature_config(std::string_view text) {
  std::string key;
  for (char c : text) {
    if (c != ',' && c != ' ') key.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  if (key == "H") return FeatureConfig::kH;
  if (key == "T") return FeatureConfig::kT;
  if (key == "HT") return FeatureConfig::kHT;
  if (key == "RHT") return FeatureConfig::kRHT;
  throw ConfigError("unknown feature config '" + std::string(text) +
                    "' (expected H, T, HT or RHT)");
}

std::string_view relation_verbalization(Relation relation) {
  switch (relation) {
    case Relation::kCharacteristic: return "characteristic";
    case Relation::kRoutineHabit: return "routine or habit";
    case Relation::kGoalPlan: return "goal or plan";
    case Relation::kExperience: return "experience";
    case Relation::kRelationship: return "relationship";
  }
  return "characteristic";
}

std::string serialize_fact(const PersonaFact& fact, FeatureConfig config) {
  const std::string delim(kFieldDelimiter);
  switch (config) {
    case FeatureConfig::kH: return fact.head;
    case FeatureConfig::kT: return fact.tail;
    case FeatureConfig::kHT: return fact.head + delim + fact.tail;
    case FeatureConfig::kRHT:
      return fact.head + delim + std::string(relation_verbalization(fact.relation)) + delim +
             fact.tail;
  }
  return fact.head;
}

namespace {

PersonaFact fact_of(const LinkExample& e) { return PersonaFact{e.head, e.relation, e.tail}; }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double ez = std::exp(z);
  return ez / (1.0 + ez);
}

}  // namespace

std::vector<TrainingPair> make_training_pairs(std::span<const LinkExample> examples,
                                              FeatureConfig config) {
  std::vector<TrainingPair> pairs;
  pairs.reserve(examples.size());
  for (const auto& e : examples)
    pairs.push_back({e.context, serialize_fact(fact_of(e), config), e.label});
  return pairs;
}

std::string serialize_training_pairs(std::span<const TrainingPair> pairs) {
  std::string out;
  for (const auto& p : pairs) {
    ordered_json j;
    j["context"] = p.context;
    j["fact"] = p.fact_text;
    j["label"] = p.label;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<double> OverlapLogisticBackend::features(std::string_view context,
                                                     std::string_view fact_text,
                                                     size_t max_sequence_length) {
  std::set<std::string> target;
  std::set<std::string> all;
  size_t budget = max_sequence_length;
  for (const auto& line : split_lines(context)) {
    const bool is_target = line.rfind("<target>", 0) == 0;
    for (auto& tok : content_tokens(line)) {
      if (budget == 0) break;
      --budget;
      if (tok == "target") continue;
      if (is_target) target.insert(tok);
      all.insert(std::move(tok));
    }
  }

  auto unique_tokens = [](std::string_view s) {
    auto v = content_tokens(s);
    return std::set<std::string>(v.begin(), v.end());
  };
  auto overlap = [](const std::set<std::string>& part, const std::set<std::string>& pool) {
    if (part.empty()) return 0.0;
    size_t hits = 0;
    for (const auto& t : part) hits += pool.contains(t) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(part.size());
  };

  std::vector<std::string> segments;
  size_t start = 0;
  while (true) {
    const size_t pos = fact_text.find(kFieldDelimiter, start);
    segments.emplace_back(fact_text.substr(start, pos == std::string_view::npos
                                                      ? std::string_view::npos
                                                      : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + kFieldDelimiter.size();
  }
  const auto whole = unique_tokens(fact_text);
  const auto first = unique_tokens(segments.front());
  const auto last = unique_tokens(segments.back());

  const double first_ctx = overlap(first, all);
  const double last_ctx = overlap(last, all);
  return {
      1.0,
      overlap(whole, target),
      overlap(whole, all),
      first_ctx,
      last_ctx,
      std::min(first_ctx, last_ctx),
      overlap(first, target),
      overlap(last, target),
      overlap(whole, target) > 0.0 ? 1.0 : 0.0,
  };
}

namespace {

class OverlapLogisticModel : public LinkModel {
 public:
  OverlapLogisticModel(std::vector<double> weights, size_t max_sequence_length)
      : weights_(std::move(weights)), max_sequence_length_(max_sequence_length) {}

  double predict(std::string_view context, std::string_view fact_text) const override {
    const auto x = OverlapLogisticBackend::features(context, fact_text, max_sequence_length_);
    double z = 0.0;
    for (size_t i = 0; i < x.size(); ++i) z += weights_[i] * x[i];
    return sigmoid(z);
  }

 private:
  std::vector<double> weights_;
  size_t max_sequence_length_;
};

constexpr double kL2 = 1e-4;

}  // namespace

std::string OverlapLogisticBackend::train(std::span<const TrainingPair> pairs,
                                          const TrainConfig& config,
                                          const std::filesystem::path& artifact_dir) {
  if (pairs.empty()) throw std::invalid_argument("empty training set");
  const auto& hp = config.hyper;
  if (hp.epochs < 1 || hp.batch_size == 0 || !(hp.learning_rate > 0.0))
    throw BackendError("invalid hyperparameters for " + backend_id());

  std::vector<std::vector<double>> xs;
  xs.reserve(pairs.size());
  for (const auto& p : pairs) xs.push_back(features(p.context, p.fact_text, hp.max_sequence_length));
  const size_t dim = xs.front().size();
  std::vector<double> w(dim, 0.0);

  DeterministicRng rng(config.seed);
  std::vector<size_t> order(pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> grad(dim);
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t b = 0; b < order.size(); b += hp.batch_size) {
      const size_t end = std::min(order.size(), b + hp.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (size_t k = b; k < end; ++k) {
        const auto& x = xs[order[k]];
        double z = 0.0;
        for (size_t i = 0; i < dim; ++i) z += w[i] * x[i];
        const double err = sigmoid(z) - (pairs[order[k]].label ? 1.0 : 0.0);
        for (size_t i = 0; i < dim; ++i) grad[i] += err * x[i];
      }
      const double scale = 1.0 / static_cast<double>(end - b);
      for (size_t i = 0; i < dim; ++i)
        w[i] -= hp.learning_rate * (grad[i] * scale + kL2 * w[i]);
    }
  }

  ordered_json artifact;
  artifact["backend_id"] = backend_id();
  artifact["feature_version"] = 1;
  artifact["max_sequence_length"] = hp.max_sequence_length;
  artifact["weights"] = w;
  const auto path = std::filesystem::absolute(artifact_dir / "model.json");
  atomic_write_file(path, artifact.dump(2) + "\n");
  return path.string();
}

std::unique_ptr<LinkModel> OverlapLogisticBackend::load(std::string_view model_handle) const {
  const std::filesystem::path path{std::string(model_handle)};
  if (!std::filesystem::exists(path))
    throw BackendError("model artifact missing: " + path.string());
  json artifact = json::parse(read_file(path), nullptr, false);
  try {
    if (artifact.is_discarded()) throw BackendError("unparseable model artifact");
    if (artifact.at("backend_id").get<std::string>() != kId)
      throw BackendError("artifact " + path.string() + " belongs to another backend");
    auto weights = artifact.at("weights").get<std::vector<double>>();
    if (weights.size() != features("", "", 1).size())
      throw BackendError("artifact has the wrong feature dimension");
    return std::make_unique<OverlapLogisticModel>(
        std::move(weights), artifact.at("max_sequence_length").get<size_t>());
  } catch (const json::exception& e) {
    throw BackendError("malformed model artifact " + path.string() + ": " + e.what());
  }
}

namespace {

struct Registry {
  std::mutex mu;
  std::map<std::string, BackendFactory, std::less<>> factories;
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

void register_backend(std::string backend_id, BackendFactory factory) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  r.factories[std::move(backend_id)] = std::move(factory);
}

std::unique_ptr<ClassifierBackend> make_backend(std::string_view backend_id) {
  if (backend_id == OverlapLogisticBackend::kId) return std::make_unique<OverlapLogisticBackend>();
  auto& r = registry();
  {
    std::lock_guard lock(r.mu);
    auto it = r.factories.find(backend_id);
    if (it != r.factories.end()) return it->second();
  }
  if (backend_id == "deberta-v3-large" || backend_id == "deberta-v3-large-nli")
    throw BackendError("backend '" + std::string(backend_id) +
                       "' needs a pretrained-encoder backend, which is not linked into "
                       "this build; register one with register_backend()");
  throw BackendError("unknown backend_id '" + std::string(backend_id) + "'");
}

ordered_json train_run_to_json(const TrainRun& run) {
  ordered_json j;
  ordered_json cfg;
  cfg["feature_config"] = feature_config_name(run.config.feature_config);
  cfg["seed"] = run.config.seed;
  cfg["epochs"] = run.config.hyper.epochs;
  cfg["batch_size"] = run.config.hyper.batch_size;
  cfg["learning_rate"] = run.config.hyper.learning_rate;
  cfg["max_sequence_length"] = run.config.hyper.max_sequence_length;
  cfg["threshold"] = run.config.threshold;
  j["config"] = std::move(cfg);
  j["dataset_manifest_digest"] = run.dataset_manifest_digest;
  j["validation_manifest_digest"] = run.validation_manifest_digest;
  j["train_inputs_digest"] = run.train_inputs_digest;
  j["backend_id"] = run.backend_id;
  j["model_handle"] = run.model_handle;
  j["train_count"] = run.train_count;
  j["validation_count"] = run.validation_count;
  j["metrics_on_validation"] =
      run.validation_metrics ? metrics_to_json(*run.validation_metrics) : ordered_json(nullptr);
  return j;
}

TrainRun train_run_from_json(const json& j) {
  TrainRun run;
  try {
    const json& cfg = j.at("config");
    run.config.feature_config = parse_feature_config(cfg.at("feature_config").get<std::string>());
    run.config.seed = cfg.at("seed").get<std::uint64_t>();
    run.config.hyper.epochs = cfg.at("epochs").get<int>();
    run.config.hyper.batch_size = cfg.at("batch_size").get<size_t>();
    run.config.hyper.learning_rate = cfg.at("learning_rate").get<double>();
    run.config.hyper.max_sequence_length = cfg.at("max_sequence_length").get<size_t>();
    run.config.threshold = cfg.value("threshold", 0.5);
    run.dataset_manifest_digest = j.at("dataset_manifest_digest").get<std::string>();
    run.validation_manifest_digest = j.value("validation_manifest_digest", std::string());
    run.train_inputs_digest = j.at("train_inputs_digest").get<std::string>();
    run.backend_id = j.at("backend_id").get<std::string>();
    run.model_handle = j.at("model_handle").get<std::string>();
    run.train_count = j.value("train_count", size_t{0});
    run.validation_count = j.value("validation_count", size_t{0});
    const json& m = j.at("metrics_on_validation");
    if (!m.is_null()) {
      ConfusionCounts c;
      c.tp = m.at("confusion").at("tp").get<size_t>();
      c.fp = m.at("confusion").at("fp").get<size_t>();
      c.fn = m.at("confusion").at("fn").get<size_t>();
      c.tn = m.at("confusion").at("tn").get<size_t>();
      run.validation_metrics = metrics_from_confusion(c);
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("train run record: ") + e.what());
  }
  return run;
}

void save_train_run(const TrainRun& run, const std::filesystem::path& path) {
  atomic_write_file(path, train_run_to_json(run).dump(2) + "\n");
}

TrainRun load_train_run(const std::filesystem::path& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw SchemaError("unparseable train run " + path.string());
  return train_run_from_json(j);
}

TrainRun train(std::span<const LinkExample> train_set,
               std::span<const LinkExample> validation_set, const TrainConfig& config,
               ClassifierBackend& backend, const std::filesystem::path& run_dir,
               const TrainInputs& inputs) {
  if (train_set.empty()) throw std::invalid_argument("empty training set");
  const auto pairs = make_training_pairs(train_set, config.feature_config);
  const std::string serialized = serialize_training_pairs(pairs);
  atomic_write_file(run_dir / "train_inputs.jsonl", serialized);

  TrainRun run;
  run.config = config;
  run.dataset_manifest_digest = inputs.train_manifest_digest;
  run.validation_manifest_digest = inputs.validation_manifest_digest;
  run.train_inputs_digest = sha256_hex(serialized);
  run.backend_id = backend.backend_id();
  run.train_count = train_set.size();
  run.validation_count = validation_set.size();
  try {
    run.model_handle = backend.train(pairs, config, run_dir / "model");
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendError("training aborted (" + run.backend_id + "): " + e.what());
  }

  if (!validation_set.empty()) {
    const Predictor predictor(run, backend);
    std::vector<bool> predicted;
    std::vector<bool> gold;
    for (const auto& e : validation_set) {
      predicted.push_back(predictor.classify(predictor.probability(e.context, fact_of(e))));
      gold.push_back(e.label);
    }
    run.validation_metrics = compute_metrics(predicted, gold);
  }
  save_train_run(run, run_dir / "run.json");
  return run;
}

Predictor::Predictor(const TrainRun& run)
    : Predictor(run, *make_backend(run.backend_id)) {}

Predictor::Predictor(const TrainRun& run, const ClassifierBackend& backend)
    : config_(run.config.feature_config),
      threshold_(run.config.threshold),
      model_(backend.load(run.model_handle)) {}

double Predictor::probability(const DialogueWindow& window, const PersonaFact& fact) const {
  return probability(serialize_context(window), fact);
}

double Predictor::probability(std::string_view context, const PersonaFact& fact) const {
  const double p = model_->predict(context, serialize_fact(fact, config_));
  if (!std::isfinite(p) || p < 0.0 || p > 1.0)
    throw ContractViolation("backend produced a probability outside [0, 1]");
  return p;
}

double predict(const TrainRun& run, const DialogueWindow& window, const PersonaFact& fact) {
  return Predictor(run).probability(window, fact);
}

ComposedPredictor::ComposedPredictor(const TrainRun& head_run, const TrainRun& tail_run)
    : head_(head_run), tail_(tail_run) {}

double ComposedPredictor::probability(std::string_view context, const PersonaFact& fact) const {
  return std::min(head_.probability(context, fact), tail_.probability(context, fact));
}

bool ComposedPredictor::classify(std::string_view context, const PersonaFact& fact) const {
  return head_.classify(head_.probability(context, fact)) &&
         tail_.classify(tail_.probability(context, fact));
}

ComposedPredictor compose_and(const TrainRun& head_run, const TrainRun& tail_run) {
  if (head_run.config.feature_config != FeatureConfig::kH)
    throw std::invalid_argument("compose_and needs a head-only (H) run first");
  if (tail_run.config.feature_config != FeatureConfig::kT)
    throw std::invalid_argument("compose_and needs a tail-only (T) run second");
  return ComposedPredictor(head_run, tail_run);
}

}  // namespace factforge
