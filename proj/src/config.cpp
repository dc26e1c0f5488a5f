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

#include "factforge/config.hpp"

#include <sstream>

#include "factforge/errors.hpp"
#include "factforge/io.hpp"

namespace factforge {

using nlohmann::json;

json default_config_json() {
  return json::parse(R"({
    "paths": {"corpus": "", "corpus_format": "peacok_release", "work_dir": "work"},
    "pairing": {"window_size": 5, "shared_fact_policy": "exclude",
                "max_negatives_per_window": 0},
    "filter": {"scorer": "lexical", "endpoint": "", "timeout_ms": 10000, "retries": 2,
               "target_positive_rate": 0.5, "rule": "both_parts",
               "drop_soft_negatives": false, "max_in_flight": 4},
    "labeler": {"template_dir": "templates", "head_template": "cot_v1_head.txt",
                "tail_template": "cot_v1_tail.txt", "retry_max": 3,
                "client_mode": "replay", "fixture_dir": "fixtures/llm",
                "model_id": "gpt-3.5-turbo", "temperature": 0.0, "max_tokens": 512,
                "max_attempts": 5, "initial_backoff_ms": 500, "max_in_flight": 4},
    "dataset": {"train_fraction": 0.8, "validation_fraction": 0.2, "seed": 7,
                "abstain_policy": "exclude"},
    "trainer": {"feature_configs": ["H", "T", "HT", "RHT"],
                "backend_id": "overlap_logreg_v1", "seed": 13, "epochs": 40,
                "batch_size": 16, "learning_rate": 0.5, "max_sequence_length": 256,
                "threshold": 0.5},
    "eval": {"error_samples": 50, "seed": 11, "error_model": "RHT"}
  })");
}

namespace {

bool same_kind(const json& expected, const json& actual) {
  if (expected.is_number()) return actual.is_number();
  if (expected.is_string()) return actual.is_string();
  if (expected.is_boolean()) return actual.is_boolean();
  if (expected.is_array()) return actual.is_array();
  if (expected.is_object()) return actual.is_object();
  return true;
}

void merge_into(json& base, const json& user, const std::string& prefix,
                std::vector<std::string>& errors) {
  if (!user.is_object()) {
    errors.push_back((prefix.empty() ? std::string("config") : prefix) + ": expected an object");
    return;
  }
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) {
      errors.push_back(path + ": unknown key");
      continue;
    }
    json& slot = base[key];
    if (slot.is_object()) {
      merge_into(slot, value, path, errors);
    } else if (!same_kind(slot, value)) {
      errors.push_back(path + ": expected " + std::string(slot.type_name()) + ", got " +
                       value.type_name());
    } else {
      slot = value;
    }
  }
}

void apply_override(json& config, const std::string& override_text,
                    std::vector<std::string>& errors) {
  const size_t eq = override_text.find('=');
  if (eq == std::string::npos || eq == 0) {
    errors.push_back("override '" + override_text + "': expected key=value");
    return;
  }
  const std::string key = override_text.substr(0, eq);
  const std::string raw = override_text.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json user = json::object();
  json* cursor = &user;
  std::istringstream parts(key);
  std::string part;
  std::vector<std::string> segments;
  while (std::getline(parts, part, '.')) segments.push_back(part);
  for (size_t i = 0; i + 1 < segments.size(); ++i) cursor = &(*cursor)[segments[i]];
  (*cursor)[segments.back()] = value;
  merge_into(config, user, "", errors);
}

template <typename Fn>
void check(std::vector<std::string>& errors, const std::string& path, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    errors.push_back(path + ": " + e.what());
  }
}

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

}  // namespace

PipelineConfig resolve_config(const json& user, const std::vector<std::string>& overrides,
                              const std::filesystem::path& base_dir) {
  std::vector<std::string> errors;
  json cfg = default_config_json();
  merge_into(cfg, user, "", errors);
  for (const auto& o : overrides) apply_override(cfg, o, errors);

  PipelineConfig out;
  const auto base = std::filesystem::absolute(base_dir);

  const json& paths = cfg["paths"];
  if (paths["corpus"].get<std::string>().empty()) errors.push_back("paths.corpus: required");
  out.paths.corpus = resolve_path(base, paths["corpus"].get<std::string>());
  check(errors, "paths.corpus_format", [&] {
    out.paths.corpus_format = parse_corpus_format(paths["corpus_format"].get<std::string>());
  });
  if (paths["work_dir"].get<std::string>().empty()) errors.push_back("paths.work_dir: required");
  out.paths.work_dir = resolve_path(base, paths["work_dir"].get<std::string>());

  const json& pairing = cfg["pairing"];
  out.pairing.window_size = pairing["window_size"].get<int>();
  if (out.pairing.window_size < 1 || out.pairing.window_size % 2 == 0)
    errors.push_back("pairing.window_size: must be odd and >= 1");
  check(errors, "pairing.shared_fact_policy", [&] {
    out.pairing.policy.shared_facts =
        parse_shared_fact_policy(pairing["shared_fact_policy"].get<std::string>());
  });
  if (pairing["max_negatives_per_window"].get<double>() < 0)
    errors.push_back("pairing.max_negatives_per_window: must be >= 0");
  else
    out.pairing.policy.max_negatives_per_window =
        pairing["max_negatives_per_window"].get<size_t>();

  const json& filter = cfg["filter"];
  out.filter.scorer = filter["scorer"].get<std::string>();
  if (out.filter.scorer != "lexical" && out.filter.scorer != "http")
    errors.push_back("filter.scorer: expected lexical or http");
  out.filter.http.endpoint = filter["endpoint"].get<std::string>();
  if (out.filter.scorer == "http" && out.filter.http.endpoint.empty())
    errors.push_back("filter.endpoint: required when filter.scorer is http");
  out.filter.http.timeout_ms = filter["timeout_ms"].get<int>();
  out.filter.http.retries = filter["retries"].get<int>();
  if (out.filter.http.retries < 0) errors.push_back("filter.retries: must be >= 0");
  out.filter.target_positive_rate = filter["target_positive_rate"].get<double>();
  if (!(out.filter.target_positive_rate > 0.0 && out.filter.target_positive_rate < 1.0))
    errors.push_back("filter.target_positive_rate: must lie in (0, 1)");
  check(errors, "filter.rule",
        [&] { out.filter.rule = parse_soft_label_rule(filter["rule"].get<std::string>()); });
  out.filter.drop_soft_negatives = filter["drop_soft_negatives"].get<bool>();
  if (filter["max_in_flight"].get<double>() < 1)
    errors.push_back("filter.max_in_flight: must be >= 1");
  else
    out.filter.max_in_flight = filter["max_in_flight"].get<size_t>();

  const json& labeler = cfg["labeler"];
  const auto template_dir = resolve_path(base, labeler["template_dir"].get<std::string>());
  out.labeler.head_template = template_dir / labeler["head_template"].get<std::string>();
  out.labeler.tail_template = template_dir / labeler["tail_template"].get<std::string>();
  out.labeler.retry_max = labeler["retry_max"].get<int>();
  if (out.labeler.retry_max < 1) errors.push_back("labeler.retry_max: must be >= 1");
  check(errors, "labeler.client_mode", [&] {
    out.labeler.client_mode = parse_client_mode(labeler["client_mode"].get<std::string>());
  });
  out.labeler.fixture_dir = resolve_path(base, labeler["fixture_dir"].get<std::string>());
  out.labeler.render.model_id = labeler["model_id"].get<std::string>();
  if (out.labeler.render.model_id.empty()) errors.push_back("labeler.model_id: required");
  out.labeler.render.temperature = labeler["temperature"].get<double>();
  if (out.labeler.render.temperature < 0) errors.push_back("labeler.temperature: must be >= 0");
  out.labeler.render.max_tokens = labeler["max_tokens"].get<int>();
  if (out.labeler.render.max_tokens < 1) errors.push_back("labeler.max_tokens: must be >= 1");
  out.labeler.retry.max_attempts = labeler["max_attempts"].get<int>();
  if (out.labeler.retry.max_attempts < 1) errors.push_back("labeler.max_attempts: must be >= 1");
  out.labeler.retry.initial_backoff_ms = labeler["initial_backoff_ms"].get<int>();
  if (labeler["max_in_flight"].get<double>() < 1)
    errors.push_back("labeler.max_in_flight: must be >= 1");
  else
    out.labeler.max_in_flight = labeler["max_in_flight"].get<size_t>();

  const json& dataset = cfg["dataset"];
  out.dataset.fractions.train = dataset["train_fraction"].get<double>();
  out.dataset.fractions.validation = dataset["validation_fraction"].get<double>();
  check(errors, "dataset.*_fraction",
        [&] { split_dialogues({}, out.dataset.fractions, 0); });
  out.dataset.seed = dataset["seed"].get<std::uint64_t>();
  check(errors, "dataset.abstain_policy", [&] {
    out.dataset.abstain = parse_abstain_policy(dataset["abstain_policy"].get<std::string>());
  });

  const json& trainer = cfg["trainer"];
  for (const auto& fc : trainer["feature_configs"]) {
    check(errors, "trainer.feature_configs", [&] {
      if (!fc.is_string()) throw ConfigError("entries must be strings");
      out.trainer.feature_configs.push_back(parse_feature_config(fc.get<std::string>()));
    });
  }
  out.trainer.backend_id = trainer["backend_id"].get<std::string>();
  check(errors, "trainer.backend_id", [&] { make_backend(out.trainer.backend_id); });
  out.trainer.train.seed = trainer["seed"].get<std::uint64_t>();
  out.trainer.train.hyper.epochs = trainer["epochs"].get<int>();
  if (out.trainer.train.hyper.epochs < 1) errors.push_back("trainer.epochs: must be >= 1");
  if (trainer["batch_size"].get<double>() < 1)
    errors.push_back("trainer.batch_size: must be >= 1");
  else
    out.trainer.train.hyper.batch_size = trainer["batch_size"].get<size_t>();
  out.trainer.train.hyper.learning_rate = trainer["learning_rate"].get<double>();
  if (!(out.trainer.train.hyper.learning_rate > 0))
    errors.push_back("trainer.learning_rate: must be > 0");
  if (trainer["max_sequence_length"].get<double>() < 1)
    errors.push_back("trainer.max_sequence_length: must be >= 1");
  else
    out.trainer.train.hyper.max_sequence_length = trainer["max_sequence_length"].get<size_t>();
  out.trainer.train.threshold = trainer["threshold"].get<double>();
  if (!(out.trainer.train.threshold > 0 && out.trainer.train.threshold < 1))
    errors.push_back("trainer.threshold: must lie in (0, 1)");

  const json& eval = cfg["eval"];
  if (eval["error_samples"].get<double>() < 0)
    errors.push_back("eval.error_samples: must be >= 0");
  else
    out.eval.error_samples = eval["error_samples"].get<size_t>();
  out.eval.seed = eval["seed"].get<std::uint64_t>();
  out.eval.error_model = eval["error_model"].get<std::string>();

  if (!errors.empty()) {
    std::string message = "invalid configuration (" + std::to_string(errors.size()) + " problem" +
                          (errors.size() == 1 ? "" : "s") + "):";
    for (const auto& e : errors) message += "\n  - " + e;
    throw ConfigError(message);
  }

  cfg["paths"]["corpus"] = out.paths.corpus.string();
  cfg["paths"]["work_dir"] = out.paths.work_dir.string();
  cfg["labeler"]["template_dir"] = template_dir.string();
  cfg["labeler"]["fixture_dir"] = out.labeler.fixture_dir.string();
  out.resolved = std::move(cfg);
  return out;
}

PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::string>& overrides) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  json user = json::parse(text, nullptr, /*allow_exceptions=*/false, /*ignore_comments=*/true);
  if (user.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  return resolve_config(user, overrides, path.parent_path().empty() ? "." : path.parent_path());
}

}  // namespace factforge
