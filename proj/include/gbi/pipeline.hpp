#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gbi/embedder.hpp"
#include "gbi/eval.hpp"
#include "gbi/intent.hpp"
#include "gbi/recommender.hpp"

namespace gbi {

struct PipelineConfig {
  std::uint64_t seed = 7;
  int folds = 5;
  Enrichment level = Enrichment::BI_MG_EM_DG_ED;
  ModelConfig model;
  TrainConfig train;
  std::size_t train_pairs = 2000;
  std::size_t eval_pairs = 1000;
  RFConfig forest;
  int k = 3;
  double w_s = 0.5;
  std::size_t exhaustive_top_n = 10;
  int svd_rank = 80;
  int svd_iterations = 200;
  /// Dimensions appended by co-occurrence refinement before pattern accuracy is scored.
  int n_inferred = 0;

  void validate() const;
};

nlohmann::json pipeline_config_to_json(const PipelineConfig& cfg);
/// Fields absent from `j` keep their defaults.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});

struct TrainTimings {
  double embedder_ms = 0.0;
  double intent_ms = 0.0;
  double index_ms = 0.0;
};

struct TrainedPipeline {
  Enrichment level = Enrichment::BI_MG_EM_DG_ED;
  EmbedderModel embedder;
  IntentModel intent;
  TaskIndex index;
  CooccurrenceStats cooccurrence;
};

/// Embedder on pairs of training states, forest on the transition examples,
/// index and co-occurrence over the training sessions.
TrainedPipeline train_pipeline(const Ontology& ont, const Workload& train, const PipelineConfig& cfg,
                               std::uint64_t seed, TrainTimings* timings = nullptr);

/// Trains an embedder only and returns it with the prepared training graphs.
EmbedderModel train_embedder_on(const Ontology& ont, const Workload& train, const PipelineConfig& cfg,
                                std::uint64_t seed);

/// Fraction of held-out pairs (sampled from `test` states) where cos > 0.5
/// agrees with the similarity label.
double pair_match_accuracy(const Ontology& ont, const Workload& test, const EmbedderModel& model, Enrichment level,
                           std::size_t n_pairs, std::uint64_t seed);

struct MethodScores {
  std::array<double, 3> pattern{};  // mean max-over-top-k Jaccard, k = 1..3
  std::array<double, 3> exact{};    // fraction with an exact match in the top k
};

struct FoldReport {
  int fold = 0;
  std::size_t train_sessions = 0;
  std::size_t test_sessions = 0;
  std::size_t queries = 0;
  MethodScores indexed;
  MethodScores exhaustive;
  MethodScores svd;
  std::optional<std::array<double, 3>> intent;  // empty when the fold has one intent class
  double element_op = 0.0;
  double element_measure = 0.0;
  double element_mg = 0.0;
  double element_dimension = 0.0;
  std::array<double, 4> dimension_by_inferred{};  // n_inferred = 0..3
  double pair_accuracy = 0.0;

  // Wall-clock, excluded from determinism comparisons.
  double predict_indexed_ms = 0.0;
  double predict_exhaustive_ms = 0.0;
  double filter_indexed_ms = 0.0;
  double filter_exhaustive_ms = 0.0;
  TrainTimings training;
};

struct EvalReport {
  PipelineConfig config;
  std::vector<FoldReport> folds;
  FoldReport aggregate;  // mean over folds (intent over folds that have it)
};

/// k-fold cross-validation over sessions.
EvalReport evaluate(const Ontology& ont, const Workload& w, const PipelineConfig& cfg);

/// Accuracy fields go under "metrics", wall-clock fields under "timing".
nlohmann::json report_to_json(const EvalReport& report);
std::string report_to_csv(const EvalReport& report);

struct LatencyRow {
  std::string method;
  std::size_t sessions = 0;
  double filter_ms = 0.0;   // median per trial over the query stream
  double predict_ms = 0.0;  // median per trial, intents + filter + transition search
};

struct BenchConfig {
  std::vector<std::size_t> sizes = {100, 250, 500, 1000};
  std::size_t queries = 200;
  int trials = 30;
  int warmup = 5;
  std::size_t train_sessions = 100;
  std::string preset = "hiw";
  bool ahi = true;
};

/// Both recommenders on an identical query stream for each corpus size. The
/// current-state embedding is computed once per query, outside the timed region.
std::vector<LatencyRow> latency_bench(const Ontology& ont, const PipelineConfig& cfg, const BenchConfig& bench);
std::string latency_to_csv(const std::vector<LatencyRow>& rows);

}  // namespace gbi
