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

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "factforge/config.hpp"
#include "factforge/eval.hpp"
#include "factforge/llm_client.hpp"
#include "json.hpp"

namespace factforge {

enum class Stage { kIngest, kPair, kFilter, kLabel, kBuild, kTrain, kEvaluate, kErrors };

inline constexpr Stage kAllStages[] = {Stage::kIngest, Stage::kPair,  Stage::kFilter,
                                       Stage::kLabel,  Stage::kBuild, Stage::kTrain,
                                       Stage::kEvaluate, Stage::kErrors};

std::string_view stage_name(Stage stage);
std::optional<Stage> try_parse_stage(std::string_view text);

// One JSON object per line: {"stage":..,"event":..,...}.
class Logger {
 public:
  explicit Logger(std::ostream* sink = nullptr) : sink_(sink) {}
  void emit(std::string_view stage, std::string_view event,
            const nlohmann::ordered_json& fields = nlohmann::ordered_json::object()) const;

 private:
  std::ostream* sink_;
};

// Digest of the config sections a stage consumes (work_dir excluded).
std::string stage_config_digest(const nlohmann::json& resolved, Stage stage);

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config, Logger logger = Logger{});

  void run(Stage stage);
  void run_all();

  // Dataset statistics for every built variant; requires `build`.
  nlohmann::ordered_json dataset_stats();

  // Reads an annotated review file and writes errors/category_report.json.
  CategoryReport ingest_review(const std::filesystem::path& review_file);

  std::filesystem::path stage_dir(Stage stage) const;
  const PipelineConfig& config() const { return config_; }

  // Overrides the chat transport used by `label` in live/record mode.
  void set_llm_transport(std::shared_ptr<ChatTransport> transport) {
    transport_ = std::move(transport);
  }

 private:
  void ingest();
  void pair();
  void filter();
  void label();
  void build();
  void train_models();
  void evaluate();
  void errors();

  void require(Stage predecessor) const;
  void write_manifest(Stage stage, const nlohmann::ordered_json& counts,
                      const std::vector<std::string>& files) const;

  PipelineConfig config_;
  Logger logger_;
  std::shared_ptr<ChatTransport> transport_;
};

}  // namespace factforge
