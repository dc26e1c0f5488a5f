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
#include <string>
#include <string_view>
#include <vector>

#include "factforge/dataset.hpp"
#include "factforge/filter.hpp"
#include "factforge/llm_client.hpp"
#include "factforge/pairing.hpp"
#include "factforge/trainer.hpp"
#include "json.hpp"

namespace factforge {

// Typed view of a resolved pipeline configuration. Build one with
// load_config() or resolve_config(); both apply defaults, overrides and
// validation.
struct PipelineConfig {
  struct Paths {
    std::filesystem::path corpus;
    CorpusFormat corpus_format = CorpusFormat::kPeacokRelease;
    std::filesystem::path work_dir;
  } paths;

  struct Pairing {
    int window_size = 5;
    PairingPolicy policy;
  } pairing;

  struct Filter {
    std::string scorer = "lexical";  // "lexical" or "http"
    HttpScorerOptions http;
    double target_positive_rate = 0.5;
    SoftLabelRule rule = SoftLabelRule::kBothParts;
    bool drop_soft_negatives = false;
    size_t max_in_flight = 4;
  } filter;

  struct Labeler {
    std::filesystem::path head_template;
    std::filesystem::path tail_template;
    int retry_max = 3;
    ClientMode client_mode = ClientMode::kReplay;
    std::filesystem::path fixture_dir;
    RenderOptions render;
    RetryPolicy retry;
    size_t max_in_flight = 4;
  } labeler;

  struct Dataset {
    SplitFractions fractions;
    std::uint64_t seed = 7;
    AbstainPolicy abstain = AbstainPolicy::kExclude;
  } dataset;

  struct Trainer {
    std::vector<FeatureConfig> feature_configs;
    std::string backend_id;
    TrainConfig train;
  } trainer;

  struct Eval {
    size_t error_samples = 50;
    std::uint64_t seed = 11;
    std::string error_model = "RHT";
  } eval;

  // Defaults merged with the file and overrides; relative paths resolved
  // against the config file's directory.
  nlohmann::json resolved;
};

// The complete default configuration as JSON.
nlohmann::json default_config_json();

// Merges `user` over the defaults, applies "dotted.key=value" overrides, and
// validates. Throws ConfigError listing every violation.
PipelineConfig resolve_config(const nlohmann::json& user,
                              const std::vector<std::string>& overrides,
                              const std::filesystem::path& base_dir);

// Reads a JSON config file; // and /* */ comments are allowed.
PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::string>& overrides = {});

}  // namespace factforge
