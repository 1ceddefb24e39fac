#include <doctest.h>

#include "gbi/error.hpp"
#include "gbi/pipeline.hpp"

using namespace gbi;

namespace {

PipelineConfig quick_config() {
  PipelineConfig c;
  c.folds = 3;
  c.level = Enrichment::BI_MG_EM;
  c.model.output_dim = 16;
  c.train.epochs = 3;
  c.train_pairs = 300;
  c.eval_pairs = 100;
  c.forest.n_trees = 8;
  c.svd_rank = 10;
  c.svd_iterations = 50;
  return c;
}

}  // namespace

TEST_CASE("pipeline config json") {
  PipelineConfig c = quick_config();
  c.n_inferred = 2;
  c.model.activation = Activation::Tanh;
  const auto back = pipeline_config_from_json(pipeline_config_to_json(c));
  CHECK(pipeline_config_to_json(back) == pipeline_config_to_json(c));
  const auto partial = pipeline_config_from_json(nlohmann::json{{"folds", 4}});
  CHECK(partial.folds == 4);
  CHECK(partial.k == 3);
  CHECK_THROWS_AS(pipeline_config_from_json(nlohmann::json{{"folds", "many"}}), ParseError);
  PipelineConfig bad;
  bad.n_inferred = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = PipelineConfig{};
  bad.k = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("cross-validated evaluation") {
  const Ontology o = generate_synthetic_ontology(OntologyGenConfig::hi(), 1);
  auto wc = WorkloadConfig::preset("hiw");
  wc.n_sessions = 60;
  const Workload w = generate_workload(o, wc, 3);
  const PipelineConfig cfg = quick_config();
  const EvalReport r = evaluate(o, w, cfg);
  REQUIRE(r.folds.size() == 3);

  std::size_t tested = 0;
  double mean_top3 = 0.0;
  for (const auto& f : r.folds) {
    tested += f.test_sessions;
    CHECK(f.train_sessions + f.test_sessions == 60);
    mean_top3 += f.indexed.pattern[2] / 3.0;
    for (const auto* m : {&f.indexed, &f.exhaustive, &f.svd}) {
      CHECK(m->pattern[0] <= m->pattern[1] + 1e-12);
      CHECK(m->pattern[1] <= m->pattern[2] + 1e-12);
      CHECK(m->exact[2] <= m->pattern[2] + 1e-12);
    }
    CHECK(f.pair_accuracy >= 0.0);
    CHECK(f.pair_accuracy <= 1.0);
  }
  CHECK(tested == 60);
  CHECK(r.aggregate.indexed.pattern[2] == doctest::Approx(mean_top3));

  const auto j = report_to_json(r);
  CHECK(j.contains("config"));
  CHECK(j["folds"].size() == 3);
  CHECK(j["aggregate"]["metrics"]["indexed"]["pattern_top3"].get<double>() == doctest::Approx(mean_top3));
  CHECK(j["aggregate"].contains("timing"));
  const std::string csv = report_to_csv(r);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header, folds, aggregate
}

TEST_CASE("latency benchmark rows") {
  const Ontology o = generate_synthetic_ontology(OntologyGenConfig::hi(), 1);
  PipelineConfig cfg = quick_config();
  BenchConfig b;
  b.sizes = {40, 80};
  b.queries = 10;
  b.trials = 2;
  b.warmup = 1;
  b.train_sessions = 40;
  b.ahi = false;
  const auto rows = latency_bench(o, cfg, b);
  REQUIRE(rows.size() == 4);
  for (const auto& row : rows) {
    CHECK(row.filter_ms >= 0.0);
    CHECK(row.predict_ms > 0.0);
  }
  CHECK(latency_to_csv(rows).rfind("method,sessions,filter_ms,predict_ms\n", 0) == 0);
}
