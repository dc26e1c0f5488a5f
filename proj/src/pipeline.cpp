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

#include "factforge/pipeline.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <set>

#include "factforge/corpus.hpp"
#include "factforge/dataset.hpp"
#include "factforge/digest.hpp"
#include "factforge/errors.hpp"
#include "factforge/filter.hpp"
#include "factforge/io.hpp"
#include "factforge/labeler.hpp"
#include "factforge/pairing.hpp"
#include "factforge/trainer.hpp"

namespace factforge {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr int kStageManifestVersion = 1;
constexpr DatasetVariant kVariants[] = {DatasetVariant::kHead, DatasetVariant::kTail,
                                        DatasetVariant::kCombined};

std::string split_file(DatasetVariant v, std::string_view side) {
  return "splits/" + std::string(dataset_variant_name(v)) + "." + std::string(side) + ".jsonl";
}

std::string data_file(DatasetVariant v) {
  return std::string(dataset_variant_name(v)) + ".jsonl";
}

DatasetVariant variant_for(FeatureConfig c) {
  switch (c) {
    case FeatureConfig::kH: return DatasetVariant::kHead;
    case FeatureConfig::kT: return DatasetVariant::kTail;
    default: return DatasetVariant::kCombined;
  }
}

constexpr std::string_view kComposedLabel = "H&T";

std::string predictions_file(std::string_view run_label) {
  std::string name(run_label);
  if (name == kComposedLabel) name = "H_AND_T";
  return "predictions." + name + ".jsonl";
}

ComparisonRow comparison_row(std::string_view run_label, const Metrics& m) {
  ComparisonRow row;
  row.version = std::string(run_label);
  row.f1 = m.f1;
  row.accuracy = m.accuracy;
  if (run_label == "H") {
    row.dataset = "head_variant";
    row.head = true;
  } else if (run_label == "T") {
    row.dataset = "tail_variant";
    row.tail = true;
  } else if (run_label == kComposedLabel) {
    row.dataset = "head_variant + tail_variant";
    row.head = row.tail = true;
  } else {
    row.dataset = "combined";
    row.head = row.tail = true;
    row.relation = run_label == "RHT";
  }
  return row;
}

PersonaFact fact_of(const LinkExample& e) { return PersonaFact{e.head, e.relation, e.tail}; }

std::vector<CandidateExample> read_candidates(const fs::path& path) {
  return parse_candidates(read_file(path));
}

std::vector<AnnotationResult> read_annotations(const fs::path& path) {
  std::vector<AnnotationResult> out;
  const std::string contents = read_file(path);
  for (const auto& line : read_record_lines(contents)) {
    json j = json::parse(line.text, nullptr, false);
    if (j.is_discarded())
      throw SchemaError(path.string() + ":" + std::to_string(line.line_number) +
                        ": malformed json");
    out.push_back(annotation_from_json(j));
  }
  return out;
}

std::string serialize_annotations(std::vector<AnnotationResult> results) {
  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) {
    if (a.candidate_id != b.candidate_id) return a.candidate_id < b.candidate_id;
    return a.variant < b.variant;
  });
  std::string out;
  for (const auto& r : results) out += annotation_to_json(r).dump() + "\n";
  return out;
}

ordered_json verdict_counts(std::span<const AnnotationResult> results) {
  ordered_json counts = {{"yes", 0}, {"no", 0}, {"abstain", 0}};
  for (const auto& r : results) counts[std::string(verdict_name(r.verdict))] =
      counts[std::string(verdict_name(r.verdict))].get<int>() + 1;
  return counts;
}

}  // namespace

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::kIngest: return "ingest";
    case Stage::kPair: return "pair";
    case Stage::kFilter: return "filter";
    case Stage::kLabel: return "label";
    case Stage::kBuild: return "build";
    case Stage::kTrain: return "train";
    case Stage::kEvaluate: return "evaluate";
    case Stage::kErrors: return "errors";
  }
  return "?";
}

std::optional<Stage> try_parse_stage(std::string_view text) {
  for (Stage s : kAllStages)
    if (stage_name(s) == text) return s;
  return std::nullopt;
}

void Logger::emit(std::string_view stage, std::string_view event,
                  const ordered_json& fields) const {
  if (!sink_) return;
  ordered_json line = {{"stage", stage}, {"event", event}};
  for (const auto& [k, v] : fields.items()) line[k] = v;
  *sink_ << line.dump() << "\n" << std::flush;
}

std::string stage_config_digest(const json& resolved, Stage stage) {
  static constexpr const char* kSections[] = {"paths",   "pairing", "filter", "labeler",
                                              "dataset", "trainer", nullptr,  "eval"};
  json consumed = json::object();
  for (Stage s : kAllStages) {
    const char* section = kSections[static_cast<int>(s)];
    if (section && resolved.contains(section)) consumed[section] = resolved[section];
    if (s == stage) break;
  }
  if (consumed.contains("paths")) consumed["paths"].erase("work_dir");
  if (consumed.contains("labeler")) {
    consumed["labeler"].erase("client_mode");
    consumed["labeler"].erase("max_in_flight");
  }
  if (consumed.contains("filter")) consumed["filter"].erase("max_in_flight");
  return sha256_hex(consumed.dump());
}

Pipeline::Pipeline(PipelineConfig config, Logger logger)
    : config_(std::move(config)), logger_(logger) {}

fs::path Pipeline::stage_dir(Stage stage) const {
  return config_.paths.work_dir / std::string(stage_name(stage));
}

void Pipeline::write_manifest(Stage stage, const ordered_json& counts,
                              const std::vector<std::string>& files) const {
  const fs::path dir = stage_dir(stage);
  ordered_json digests = ordered_json::object();
  for (const auto& f : files) digests[f] = sha256_hex(read_file(dir / f));
  ordered_json manifest = {
      {"stage", stage_name(stage)},
      {"schema_version", kStageManifestVersion},
      {"pipeline_version", kPipelineVersion},
      {"config_digest", stage_config_digest(config_.resolved, stage)},
      {"counts", counts},
      {"files", digests},
      {"resolved_config", config_.resolved},
  };
  atomic_write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  logger_.emit(stage_name(stage), "complete", {{"counts", counts}});
}

void Pipeline::require(Stage predecessor) const {
  const std::string name(stage_name(predecessor));
  const fs::path dir = stage_dir(predecessor);
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path))
    throw Error("missing outputs of stage '" + name + "'; run `factforge " + name + "` first");
  json manifest = json::parse(read_file(manifest_path), nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("config_digest") ||
      !manifest.contains("files"))
    throw CorruptionError("unreadable manifest " + manifest_path.string());
  if (manifest["config_digest"] != stage_config_digest(config_.resolved, predecessor))
    throw Error("outputs of stage '" + name +
                "' were produced under a different configuration; re-run `factforge " + name +
                "`");
  for (const auto& [file, digest] : manifest["files"].items()) {
    if (!fs::exists(dir / file))
      throw CorruptionError("stage '" + name + "' output missing: " + (dir / file).string());
    if (sha256_hex(read_file(dir / file)) != digest.get<std::string>())
      throw CorruptionError("stage '" + name + "' output digest mismatch: " +
                            (dir / file).string());
  }
}

void Pipeline::run(Stage stage) {
  logger_.emit(stage_name(stage), "start");
  try {
    switch (stage) {
      case Stage::kIngest: ingest(); break;
      case Stage::kPair: pair(); break;
      case Stage::kFilter: filter(); break;
      case Stage::kLabel: label(); break;
      case Stage::kBuild: build(); break;
      case Stage::kTrain: train_models(); break;
      case Stage::kEvaluate: evaluate(); break;
      case Stage::kErrors: errors(); break;
    }
  } catch (const std::exception& e) {
    logger_.emit(stage_name(stage), "failed", {{"error", e.what()}});
    throw;
  }
}

void Pipeline::run_all() {
  for (Stage s : kAllStages) run(s);
}

void Pipeline::ingest() {
  if (!fs::exists(config_.paths.corpus))
    throw ConfigError("paths.corpus: no such file " + config_.paths.corpus.string());
  const ParsedCorpus parsed = parse_corpus_file(config_.paths.corpus, config_.paths.corpus_format);
  const fs::path dir = stage_dir(Stage::kIngest);
  atomic_write_file(dir / "dialogues.jsonl", serialize_corpus(parsed.dialogues));
  atomic_write_file(dir / "rejects.jsonl", serialize_rejects(parsed.rejects));
  size_t utterances = 0;
  for (const auto& d : parsed.dialogues) utterances += d.utterances.size();
  for (const auto& r : parsed.rejects)
    logger_.emit("ingest", "reject", {{"locator", r.source_locator}, {"reason", r.reason}});
  write_manifest(Stage::kIngest,
                 {{"dialogues", parsed.dialogues.size()},
                  {"utterances", utterances},
                  {"rejects", parsed.rejects.size()}},
                 {"dialogues.jsonl", "rejects.jsonl"});
}

void Pipeline::pair() {
  require(Stage::kIngest);
  const fs::path in = stage_dir(Stage::kIngest) / "dialogues.jsonl";
  const ParsedCorpus parsed = parse_corpus(read_file(in), CorpusFormat::kCanonical, in.string());
  if (!parsed.rejects.empty())
    throw CorruptionError("ingest store holds an invalid record at " +
                          parsed.rejects.front().source_locator);

  std::vector<CandidateExample> candidates;
  size_t windows = 0;
  for (const auto& d : parsed.dialogues) {
    const auto ws = extract_windows(d, config_.pairing.window_size);
    windows += ws.size();
    auto cs = build_candidates(d, ws, config_.pairing.policy);
    candidates.insert(candidates.end(), std::make_move_iterator(cs.begin()),
                      std::make_move_iterator(cs.end()));
  }
  size_t positives = 0;
  size_t shared = 0;
  for (const auto& c : candidates) {
    positives += c.heuristic_label;
    shared += c.shared_fact;
  }
  atomic_write_file(stage_dir(Stage::kPair) / "candidates.jsonl",
                    serialize_candidates(candidates));
  write_manifest(Stage::kPair,
                 {{"windows", windows},
                  {"candidates", candidates.size()},
                  {"heuristic_positives", positives},
                  {"heuristic_negatives", candidates.size() - positives},
                  {"shared_fact_candidates", shared}},
                 {"candidates.jsonl"});
}

void Pipeline::filter() {
  require(Stage::kPair);
  auto candidates = read_candidates(stage_dir(Stage::kPair) / "candidates.jsonl");
  const auto& fc = config_.filter;

  std::unique_ptr<RelevanceScorer> scorer;
  if (fc.scorer == "http")
    scorer = std::make_unique<HttpScorer>(fc.http);
  else
    scorer = std::make_unique<LexicalOverlapScorer>();

  ScoreOptions options;
  options.rescore = true;
  options.max_in_flight = fc.max_in_flight;
  const ScoringSummary scored = score_candidates(candidates, *scorer, options);

  std::vector<double> statistics;
  for (const auto& c : candidates)
    if (auto s = rule_statistic(c, fc.rule)) statistics.push_back(*s);

  CalibrationResult calibration;
  calibration.target_positive_rate = fc.target_positive_rate;
  SoftLabelSummary soft;
  if (!statistics.empty()) {
    calibration = calibrate_threshold(statistics, fc.target_positive_rate);
    soft = apply_soft_labels(candidates, calibration, fc.rule);
  }
  size_t dropped = 0;
  if (fc.drop_soft_negatives) {
    const size_t before = candidates.size();
    std::erase_if(candidates, [](const CandidateExample& c) { return c.soft_label == false; });
    dropped = before - candidates.size();
  }

  const fs::path dir = stage_dir(Stage::kFilter);
  ordered_json cal = calibration_to_json(calibration);
  cal["rule"] = soft_label_rule_name(fc.rule);
  cal["scorer_id"] = scorer->scorer_id();
  atomic_write_file(dir / "calibration.json", cal.dump(2) + "\n");
  atomic_write_file(dir / "candidates.jsonl", serialize_candidates(candidates));
  write_manifest(Stage::kFilter,
                 {{"scored", scored.scored},
                  {"scoring_failed", scored.failed},
                  {"threshold", calibration.threshold},
                  {"achieved_positive_rate", calibration.achieved_positive_rate},
                  {"soft_positives", soft.positives},
                  {"soft_label_errors", soft.errors},
                  {"dropped_soft_negatives", dropped},
                  {"candidates", candidates.size()}},
                 {"calibration.json", "candidates.jsonl"});
}

void Pipeline::label() {
  require(Stage::kFilter);
  auto candidates = read_candidates(stage_dir(Stage::kFilter) / "candidates.jsonl");
  const auto& lc = config_.labeler;
  const PromptTemplate head_tmpl = load_template(lc.head_template);
  const PromptTemplate tail_tmpl = load_template(lc.tail_template);
  if (head_tmpl.variant != FactPart::kHead)
    throw ConfigError("labeler.head_template: " + head_tmpl.template_id + " is a " +
                      std::string(fact_part_name(head_tmpl.variant)) + " template");
  if (tail_tmpl.variant != FactPart::kTail)
    throw ConfigError("labeler.tail_template: " + tail_tmpl.template_id + " is a " +
                      std::string(fact_part_name(tail_tmpl.variant)) + " template");

  const fs::path dir = stage_dir(Stage::kLabel);
  fs::create_directories(dir);
  // A checkpoint is resumed only under the configuration that started it.
  const std::string digest = stage_config_digest(config_.resolved, Stage::kLabel);
  const fs::path checkpoint_path = dir / "checkpoint.jsonl";
  const fs::path checkpoint_meta = dir / "checkpoint.meta.json";
  bool resumable = false;
  if (fs::exists(checkpoint_meta)) {
    json meta = json::parse(read_file(checkpoint_meta), nullptr, false);
    resumable = !meta.is_discarded() && meta.value("config_digest", "") == digest;
  }
  if (!resumable) {
    fs::remove(checkpoint_path);
    atomic_write_file(checkpoint_meta, ordered_json{{"config_digest", digest}}.dump(2) + "\n");
  }
  AnnotationCheckpoint checkpoint(checkpoint_path);
  const size_t resumed = checkpoint.size();

  std::shared_ptr<ChatTransport> transport = transport_;
  if (!transport && lc.client_mode != ClientMode::kReplay)
    transport = std::make_shared<HttpChatTransport>(HttpTransportOptions::from_environment());
  LlmClient client(lc.client_mode, lc.fixture_dir, transport, lc.retry, lc.max_in_flight);

  AnnotateOptions options;
  options.retry_max = lc.retry_max;
  options.max_in_flight = lc.max_in_flight;
  options.render = lc.render;
  const auto head = annotate(candidates, client, head_tmpl, options, &checkpoint);
  const auto tail = annotate(candidates, client, tail_tmpl, options, &checkpoint);

  std::map<std::string, Verdict> head_by_id;
  std::map<std::string, Verdict> tail_by_id;
  for (const auto& r : head) head_by_id[r.candidate_id] = r.verdict;
  for (const auto& r : tail) tail_by_id[r.candidate_id] = r.verdict;
  size_t decided = 0;
  size_t positives = 0;
  for (auto& c : candidates) {
    c.llm_head_label = head_by_id.at(c.candidate_id);
    c.llm_tail_label = tail_by_id.at(c.candidate_id);
    const CombinedLabel combined = combine_labels(*c.llm_head_label, *c.llm_tail_label);
    c.final_label = combined.decided ? std::optional<bool>(combined.final_label) : std::nullopt;
    decided += combined.decided;
    positives += combined.decided && combined.final_label;
  }

  std::vector<AnnotationResult> all(head.begin(), head.end());
  all.insert(all.end(), tail.begin(), tail.end());
  const CostReport cost = cost_report(client.log());
  atomic_write_file(dir / "annotations.jsonl", serialize_annotations(all));
  atomic_write_file(dir / "candidates.jsonl", serialize_candidates(candidates));
  atomic_write_file(dir / "cost.json", cost_report_to_json(cost).dump(2) + "\n");
  write_manifest(Stage::kLabel,
                 {{"candidates", candidates.size()},
                  {"head", verdict_counts(head)},
                  {"tail", verdict_counts(tail)},
                  {"decided", decided},
                  {"final_positives", positives},
                  {"resumed_from_checkpoint", resumed},
                  {"client_requests", cost.total_requests},
                  {"cache_hits", cost.cache_hits}},
                 {"annotations.jsonl", "candidates.jsonl"});
}

void Pipeline::build() {
  require(Stage::kLabel);
  const fs::path label_dir = stage_dir(Stage::kLabel);
  const auto candidates = read_candidates(label_dir / "candidates.jsonl");
  std::vector<AnnotationResult> head;
  std::vector<AnnotationResult> tail;
  for (auto& r : read_annotations(label_dir / "annotations.jsonl"))
    (r.variant == FactPart::kHead ? head : tail).push_back(std::move(r));

  std::vector<std::string> dialogue_ids;
  for (const auto& c : candidates) dialogue_ids.push_back(c.window.dialogue_id);
  const auto train_ids =
      split_dialogues(dialogue_ids, config_.dataset.fractions, config_.dataset.seed);

  AssembleOptions options;
  options.abstain = config_.dataset.abstain;
  const fs::path dir = stage_dir(Stage::kBuild);
  const std::string digest = stage_config_digest(config_.resolved, Stage::kBuild);
  std::vector<std::string> files;
  ordered_json all_stats = ordered_json::object();
  ordered_json counts = ordered_json::object();
  for (DatasetVariant v : kVariants) {
    const std::string name(dataset_variant_name(v));
    const AssembledDataset assembled = assemble(candidates, head, tail, v, options);
    const ordered_json metadata = {{"variant", name}, {"config_digest", digest},
                                   {"abstain_excluded", assembled.abstain_excluded}};
    write_dataset(assembled.examples, dir / data_file(v), metadata);
    const SplitResult parts = apply_split(assembled.examples, train_ids);
    ordered_json train_meta = metadata;
    train_meta["split"] = "train";
    ordered_json validation_meta = metadata;
    validation_meta["split"] = "validation";
    write_dataset(parts.train, dir / split_file(v, "train"), train_meta);
    write_dataset(parts.validation, dir / split_file(v, "validation"), validation_meta);
    for (const std::string& f :
         {data_file(v), split_file(v, "train"), split_file(v, "validation")}) {
      files.push_back(f);
      files.push_back(manifest_path_for(f).string());
    }
    all_stats[name] = stats_to_json(stats(assembled.examples, assembled.abstain_excluded));
    counts[name] = {{"examples", assembled.examples.size()},
                    {"train", parts.train.size()},
                    {"validation", parts.validation.size()},
                    {"abstain_excluded", assembled.abstain_excluded}};
  }
  atomic_write_file(dir / "stats.json", all_stats.dump(2) + "\n");
  files.push_back("stats.json");
  counts["train_dialogues"] = train_ids.size();
  write_manifest(Stage::kBuild, counts, files);
}

void Pipeline::train_models() {
  require(Stage::kBuild);
  const fs::path build_dir = stage_dir(Stage::kBuild);
  const fs::path dir = stage_dir(Stage::kTrain);
  std::vector<std::string> files;
  ordered_json counts = ordered_json::object();
  for (FeatureConfig fc : config_.trainer.feature_configs) {
    const std::string name(feature_config_name(fc));
    const DatasetVariant v = variant_for(fc);
    const fs::path train_path = build_dir / split_file(v, "train");
    const fs::path validation_path = build_dir / split_file(v, "validation");
    const auto train_set = read_dataset(train_path);
    const auto validation_set = read_dataset(validation_path);
    if (train_set.empty())
      throw Error("training split of " + std::string(dataset_variant_name(v)) +
                  " is empty; cannot train " + name);
    TrainInputs inputs;
    inputs.train_manifest_digest = sha256_hex(read_file(manifest_path_for(train_path)));
    inputs.validation_manifest_digest = sha256_hex(read_file(manifest_path_for(validation_path)));
    TrainConfig tc = config_.trainer.train;
    tc.feature_config = fc;
    auto backend = make_backend(config_.trainer.backend_id);
    const TrainRun run = train(train_set, validation_set, tc, *backend, dir / name, inputs);
    for (const auto& entry : fs::recursive_directory_iterator(dir / name))
      if (entry.is_regular_file()) files.push_back(entry.path().lexically_relative(dir).string());
    ordered_json c = {{"train", run.train_count}, {"validation", run.validation_count}};
    if (run.validation_metrics) c["validation_f1"] = run.validation_metrics->f1;
    counts[name] = c;
  }
  std::sort(files.begin(), files.end());
  write_manifest(Stage::kTrain, counts, files);
}

void Pipeline::evaluate() {
  require(Stage::kTrain);
  const auto test_set =
      read_dataset(stage_dir(Stage::kBuild) / split_file(DatasetVariant::kCombined, "validation"));
  if (test_set.empty())
    throw Error("combined validation split is empty; nothing to evaluate");
  const fs::path train_dir = stage_dir(Stage::kTrain);
  const fs::path dir = stage_dir(Stage::kEvaluate);

  std::map<FeatureConfig, TrainRun> runs;
  for (FeatureConfig fc : config_.trainer.feature_configs)
    runs.emplace(fc, load_train_run(train_dir / std::string(feature_config_name(fc)) / "run.json"));

  std::vector<std::pair<std::string, std::vector<EvalRecord>>> evaluated;
  auto record_for = [](const LinkExample& e, double p, bool predicted) {
    EvalRecord r;
    r.example_id = e.example_id;
    r.relation = e.relation;
    r.probability = p;
    r.predicted = predicted;
    r.gold = e.label;
    r.context = e.context;
    r.fact = serialize_fact(fact_of(e), FeatureConfig::kRHT);
    return r;
  };
  auto run_single = [&](FeatureConfig fc) {
    const Predictor predictor(runs.at(fc));
    std::vector<EvalRecord> records;
    for (const auto& e : test_set) {
      const double p = predictor.probability(e.context, fact_of(e));
      records.push_back(record_for(e, p, predictor.classify(p)));
    }
    evaluated.emplace_back(std::string(feature_config_name(fc)), std::move(records));
  };
  // Table order: H, T, H&T, HT, RHT.
  for (FeatureConfig fc : {FeatureConfig::kH, FeatureConfig::kT})
    if (runs.count(fc)) run_single(fc);
  if (runs.count(FeatureConfig::kH) && runs.count(FeatureConfig::kT)) {
    const ComposedPredictor composed =
        compose_and(runs.at(FeatureConfig::kH), runs.at(FeatureConfig::kT));
    std::vector<EvalRecord> records;
    for (const auto& e : test_set) {
      const double p = composed.probability(e.context, fact_of(e));
      records.push_back(record_for(e, p, composed.classify(e.context, fact_of(e))));
    }
    evaluated.emplace_back(std::string(kComposedLabel), std::move(records));
  }
  for (FeatureConfig fc : {FeatureConfig::kHT, FeatureConfig::kRHT})
    if (runs.count(fc)) run_single(fc);

  std::vector<MetricsReport> reports;
  std::vector<ComparisonRow> rows;
  std::vector<std::string> files;
  ordered_json runs_json = ordered_json::array();
  ordered_json counts = ordered_json::object();
  for (const auto& [run_label, records] : evaluated) {
    const std::string file = predictions_file(run_label);
    atomic_write_file(dir / file, serialize_predictions(records));
    files.push_back(file);
    MetricsReport report = per_relation_metrics(records, run_label);
    rows.push_back(comparison_row(run_label, report.overall));
    ordered_json rj = metrics_report_to_json(report);
    rj["predictions_file"] = file;
    runs_json.push_back(rj);
    counts[run_label] = {{"f1", report.overall.f1}, {"accuracy", report.overall.accuracy}};
    reports.push_back(std::move(report));
  }
  size_t positives = 0;
  for (const auto& e : test_set) positives += e.label;
  const ordered_json report_json = {
      {"test_set", {{"dataset", "combined.validation"},
                    {"examples", test_set.size()},
                    {"positives", positives}}},
      {"runs", runs_json}};
  atomic_write_file(dir / "report.json", report_json.dump(2) + "\n");
  std::string text = "Feature configurations (test set: combined validation split, " +
                     std::to_string(test_set.size()) + " examples)\n\n" +
                     render_feature_table(rows) + "\nPer-relation results\n\n" +
                     render_relation_table(reports);
  atomic_write_file(dir / "report.txt", text);
  files.push_back("report.json");
  files.push_back("report.txt");
  counts["test_examples"] = test_set.size();
  write_manifest(Stage::kEvaluate, counts, files);
}

void Pipeline::errors() {
  require(Stage::kEvaluate);
  const std::string& model = config_.eval.error_model;
  const fs::path predictions = stage_dir(Stage::kEvaluate) / predictions_file(model);
  if (!fs::exists(predictions))
    throw ConfigError("eval.error_model: run '" + model + "' was not evaluated");
  const auto test_set =
      read_dataset(stage_dir(Stage::kBuild) / split_file(DatasetVariant::kCombined, "validation"));
  std::map<std::string, const LinkExample*> by_id;
  for (const auto& e : test_set) by_id[e.example_id] = &e;

  std::vector<EvalRecord> records;
  for (const auto& row : parse_predictions(read_file(predictions))) {
    const auto it = by_id.find(row.example_id);
    if (it == by_id.end())
      throw CorruptionError("prediction for unknown example " + row.example_id);
    EvalRecord r;
    r.example_id = row.example_id;
    r.relation = it->second->relation;
    r.probability = row.probability;
    r.predicted = row.predicted;
    r.gold = row.gold;
    r.context = it->second->context;
    r.fact = serialize_fact(fact_of(*it->second), FeatureConfig::kRHT);
    records.push_back(std::move(r));
  }
  size_t population = 0;
  for (const auto& r : records) population += r.predicted != r.gold;
  const auto sample = sample_errors(records, config_.eval.error_samples, config_.eval.seed);
  atomic_write_file(stage_dir(Stage::kErrors) / "review.jsonl", serialize_review(sample));
  write_manifest(Stage::kErrors,
                 {{"model", model}, {"error_population", population}, {"sampled", sample.size()}},
                 {"review.jsonl"});
}

ordered_json Pipeline::dataset_stats() {
  require(Stage::kBuild);
  const fs::path dir = stage_dir(Stage::kBuild);
  ordered_json out = ordered_json::object();
  for (DatasetVariant v : kVariants) {
    const std::string name(dataset_variant_name(v));
    const DatasetManifest manifest = read_manifest(dir / data_file(v));
    const size_t excluded = manifest.metadata.value("abstain_excluded", size_t{0});
    ordered_json entry = stats_to_json(stats(read_dataset(dir / data_file(v)), excluded));
    entry["train"] = read_manifest(dir / split_file(v, "train")).count;
    entry["validation"] = read_manifest(dir / split_file(v, "validation")).count;
    out[name] = entry;
  }
  logger_.emit("stats", "complete", {{"variants", out.size()}});
  return out;
}

CategoryReport Pipeline::ingest_review(const fs::path& review_file) {
  const CategoryReport report = category_report(parse_review(read_file(review_file)));
  atomic_write_file(stage_dir(Stage::kErrors) / "category_report.json",
                    category_report_to_json(report).dump(2) + "\n");
  logger_.emit("errors", "review_ingested",
               {{"reviewed", report.reviewed}, {"uncategorized", report.uncategorized}});
  return report;
}

}  // namespace factforge
