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

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "factforge/errors.hpp"
#include "factforge/pipeline.hpp"

using namespace factforge;

int main(int argc, char** argv) {
  CLI::App app{"factforge: persona fact linking data pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string review_file;
  bool quiet = false;

  std::vector<CLI::App*> commands;
  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "Pipeline config (JSON, comments allowed)")
        ->required();
    sub->add_option("--set", overrides, "Override a config value, e.g. labeler.retry_max=5");
    sub->add_flag("-q,--quiet", quiet, "Suppress structured logs on stderr");
    commands.push_back(sub);
    return sub;
  };
  for (Stage s : kAllStages) {
    CLI::App* sub = add(std::string(stage_name(s)), "Run the " + std::string(stage_name(s)) + " stage");
    if (s == Stage::kErrors)
      sub->add_option("--review", review_file,
                      "Ingest an annotated review file instead of sampling");
  }
  add("stats", "Print dataset statistics for the built variants");
  add("all", "Run every stage in order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::string command;
  for (CLI::App* sub : commands)
    if (sub->parsed()) command = sub->get_name();

  try {
    PipelineConfig config = load_config(config_path, overrides);
    Pipeline pipeline(std::move(config), Logger(quiet ? nullptr : &std::cerr));
    if (command == "all") {
      pipeline.run_all();
    } else if (command == "stats") {
      std::cout << pipeline.dataset_stats().dump(2) << "\n";
    } else if (command == "errors" && !review_file.empty()) {
      std::cout << render_category_report(pipeline.ingest_review(review_file));
    } else {
      pipeline.run(*try_parse_stage(command));
    }
  } catch (const Error& e) {
    std::cerr << "factforge " << command << ": " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "factforge " << command << ": " << e.what() << "\n";
    return 2;
  }
  return 0;
}
