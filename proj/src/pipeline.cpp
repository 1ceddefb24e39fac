#include "gbi/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <spdlog/spdlog.h>

#include "gbi/error.hpp"

namespace gbi {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

void PipelineConfig::validate() const {
  if (folds < 2) throw ConfigError("folds must be >= 2");
  model.validate();
  train.validate();
  forest.validate();
  if (train_pairs < 1) throw ConfigError("train_pairs must be >= 1");
  if (k < 1 || k > 3) throw ConfigError("k must lie in [1, 3]");
  if (!(w_s >= 0.0 && w_s <= 1.0)) throw ConfigError("w_s must lie in [0, 1]");
  if (exhaustive_top_n < 1) throw ConfigError("exhaustive_top_n must be >= 1");
  if (svd_rank < 1) throw ConfigError("svd_rank must be >= 1");
  if (svd_iterations < 0) throw ConfigError("svd_iterations must be >= 0");
  if (n_inferred < 0 || n_inferred > 3) throw ConfigError("n_inferred must lie in [0, 3]");
}

json pipeline_config_to_json(const PipelineConfig& c) {
  return {{"seed", c.seed},
          {"folds", c.folds},
          {"level", std::string(to_string(c.level))},
          {"model",
           {{"layers", c.model.layers},
            {"output_dim", c.model.output_dim},
            {"hidden_dim", c.model.hidden_dim},
            {"activation", to_string(c.model.activation)},
            {"input_dim", c.model.encoder.input_dim}}},
          {"train", {{"epochs", c.train.epochs}, {"batch_size", c.train.batch_size}, {"learning_rate", c.train.learning_rate}}},
          {"train_pairs", c.train_pairs},
          {"eval_pairs", c.eval_pairs},
          {"forest",
           {{"n_trees", c.forest.n_trees},
            {"max_depth", c.forest.max_depth},
            {"min_samples_split", c.forest.min_samples_split},
            {"max_features", c.forest.max_features},
            {"bootstrap_fraction", c.forest.bootstrap_fraction}}},
          {"k", c.k},
          {"w_s", c.w_s},
          {"exhaustive_top_n", c.exhaustive_top_n},
          {"svd_rank", c.svd_rank},
          {"svd_iterations", c.svd_iterations},
          {"n_inferred", c.n_inferred}};
}

PipelineConfig pipeline_config_from_json(const json& j, PipelineConfig c) {
  auto get = [](const json& obj, const char* name, auto& out, const std::string& prefix) {
    if (auto it = obj.find(name); it != obj.end()) {
      try {
        it->get_to(out);
      } catch (const json::exception& e) {
        throw ParseError(prefix + name, e.what());
      }
    }
  };
  if (!j.is_object()) throw ParseError("pipeline", "expected an object");
  get(j, "seed", c.seed, "");
  get(j, "folds", c.folds, "");
  if (auto it = j.find("level"); it != j.end()) c.level = parse_enrichment(it->get<std::string>());
  if (auto it = j.find("model"); it != j.end()) {
    get(*it, "layers", c.model.layers, "model.");
    get(*it, "output_dim", c.model.output_dim, "model.");
    get(*it, "hidden_dim", c.model.hidden_dim, "model.");
    get(*it, "input_dim", c.model.encoder.input_dim, "model.");
    if (auto a = it->find("activation"); a != it->end()) c.model.activation = parse_activation(a->get<std::string>());
  }
  if (auto it = j.find("train"); it != j.end()) {
    get(*it, "epochs", c.train.epochs, "train.");
    get(*it, "batch_size", c.train.batch_size, "train.");
    get(*it, "learning_rate", c.train.learning_rate, "train.");
  }
  get(j, "train_pairs", c.train_pairs, "");
  get(j, "eval_pairs", c.eval_pairs, "");
  if (auto it = j.find("forest"); it != j.end()) {
    get(*it, "n_trees", c.forest.n_trees, "forest.");
    get(*it, "max_depth", c.forest.max_depth, "forest.");
    get(*it, "min_samples_split", c.forest.min_samples_split, "forest.");
    get(*it, "max_features", c.forest.max_features, "forest.");
    get(*it, "bootstrap_fraction", c.forest.bootstrap_fraction, "forest.");
  }
  get(j, "k", c.k, "");
  get(j, "w_s", c.w_s, "");
  get(j, "exhaustive_top_n", c.exhaustive_top_n, "");
  get(j, "svd_rank", c.svd_rank, "");
  get(j, "svd_iterations", c.svd_iterations, "");
  get(j, "n_inferred", c.n_inferred, "");
  return c;
}

EmbedderModel train_embedder_on(const Ontology& ont, const Workload& train, const PipelineConfig& cfg,
                                std::uint64_t seed) {
  const auto states = annotate_states(ont, train);
  const std::uint64_t available = states.size() < 2 ? 0 : states.size() * (states.size() - 1) / 2;
  const std::size_t n_pairs = static_cast<std::size_t>(std::min<std::uint64_t>(cfg.train_pairs, available));
  const auto pairs = sample_pairs(states, n_pairs, derive_seed(seed, "pairs"));
  std::vector<PreparedGraph> graphs;
  graphs.reserve(states.size());
  for (const auto& s : states) graphs.push_back(prepare_graph(cfg.model.encoder, build_state_graph(ont, s.state, s.on, cfg.level)));
  std::vector<TrainingPair> training;
  training.reserve(pairs.size());
  for (const auto& p : pairs) training.push_back({p.a, p.b, p.similarity});
  TrainConfig tcfg = cfg.train;
  tcfg.seed = derive_seed(seed, "embedder");
  return train_embedder(graphs, training, tcfg, cfg.model);
}

TrainedPipeline train_pipeline(const Ontology& ont, const Workload& train, const PipelineConfig& cfg,
                               std::uint64_t seed, TrainTimings* timings) {
  cfg.validate();
  TrainedPipeline out;
  out.level = cfg.level;
  auto t0 = Clock::now();
  out.embedder = train_embedder_on(ont, train, cfg, seed);
  const double embedder_ms = ms_since(t0);

  t0 = Clock::now();
  const auto embeddings = embed_workload(ont, train, out.embedder, cfg.level);
  RFConfig rf = cfg.forest;
  rf.seed = derive_seed(seed, "forest");
  out.intent = IntentModel::train(build_intent_examples(ont, train, embeddings), rf);
  const double intent_ms = ms_since(t0);

  t0 = Clock::now();
  out.index = TaskIndex::build(ont, train, embeddings);
  out.cooccurrence = CooccurrenceStats::build(train);
  const double index_ms = ms_since(t0);
  if (timings) *timings = {embedder_ms, intent_ms, index_ms};
  return out;
}

double pair_match_accuracy(const Ontology& ont, const Workload& test, const EmbedderModel& model, Enrichment level,
                           std::size_t n_pairs, std::uint64_t seed) {
  const auto states = annotate_states(ont, test);
  const std::uint64_t available = states.size() < 2 ? 0 : states.size() * (states.size() - 1) / 2;
  n_pairs = static_cast<std::size_t>(std::min<std::uint64_t>(n_pairs, available));
  if (n_pairs == 0) return 0.0;
  const auto pairs = sample_pairs(states, n_pairs, seed);
  std::vector<Vec> emb;
  emb.reserve(states.size());
  for (const auto& s : states) emb.push_back(embed_graph(model, build_state_graph(ont, s.state, s.on, level)));
  std::size_t correct = 0;
  for (const auto& p : pairs) correct += (cosine(emb[p.a], emb[p.b]) > 0.5) == p.matching;
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

namespace {

void score_topk(MethodScores& scores, const BiPattern& expected, const std::vector<BiPattern>& predicted) {
  double best = 0.0;
  bool exact = false;
  for (std::size_t k = 0; k < 3; ++k) {
    if (k < predicted.size()) {
      best = std::max(best, pattern_jaccard(expected, predicted[k]));
      exact = exact || predicted[k] == expected;
    }
    scores.pattern[k] += best;
    scores.exact[k] += exact ? 1.0 : 0.0;
  }
}

void scale(MethodScores& s, double f) {
  for (auto& v : s.pattern) v *= f;
  for (auto& v : s.exact) v *= f;
}

double recall(const std::set<NodeId>& expected, const std::set<NodeId>& predicted) {
  if (expected.empty()) return 1.0;
  std::size_t hit = 0;
  for (const auto& e : expected) hit += predicted.contains(e);
  return static_cast<double>(hit) / static_cast<double>(expected.size());
}

std::set<NodeId> measure_groups_of(const Ontology& ont, const BiPattern& p) {
  std::set<NodeId> out;
  for (const auto& m : p.measures) out.insert(parent_measure_group(ont, m.id));
  return out;
}

std::vector<BiPattern> patterns_of(const std::vector<Recommendation>& recs) {
  std::vector<BiPattern> out;
  for (const auto& r : recs) out.push_back(r.pattern);
  return out;
}

std::vector<BiIntent> intents_of(const std::vector<ScoredIntent>& scored) {
  std::vector<BiIntent> out;
  for (const auto& s : scored) out.push_back(s.intent);
  return out;
}

FoldReport run_fold(const Ontology& ont, const Fold& fold, const PipelineConfig& cfg, int f) {
  FoldReport r;
  r.fold = f;
  r.train_sessions = fold.train.sessions.size();
  r.test_sessions = fold.test.sessions.size();
  const std::uint64_t seed = derive_seed(cfg.seed, "fold", static_cast<std::uint64_t>(f));
  const TrainedPipeline tp = train_pipeline(ont, fold.train, cfg, seed, &r.training);
  r.pair_accuracy = pair_match_accuracy(ont, fold.test, tp.embedder, cfg.level, cfg.eval_pairs, derive_seed(seed, "eval-pairs"));

  std::size_t distinct = 0;
  {
    std::set<std::string> keys;
    for (const auto& s : fold.train.sessions) {
      for (const auto& st : s.states) keys.insert(canonical_key(st.pattern));
    }
    distinct = keys.size();
  }
  const int rank = static_cast<int>(std::min<std::size_t>({static_cast<std::size_t>(cfg.svd_rank), distinct, fold.train.sessions.size()}));
  if (rank < cfg.svd_rank) spdlog::info("fold {}: factorization rank clamped to {}", f, rank);
  auto t0 = Clock::now();
  const FactorModel svd = FactorModel::train(fold.train, std::max(rank, 1), cfg.svd_iterations, derive_seed(seed, "svd"));
  (void)ms_since(t0);

  const bool intent_ok = !tp.intent.degenerate();
  if (!intent_ok) spdlog::warn("fold {}: single intent class, intent metrics skipped", f);
  std::array<double, 3> intent_sum{};

  const auto test_emb = embed_workload(ont, fold.test, tp.embedder, cfg.level, true);
  std::size_t q = 0;
  for (std::size_t s = 0; s < fold.test.sessions.size(); ++s) {
    const auto& sess = fold.test.sessions[s];
    std::vector<BiPattern> prefix_patterns;
    std::vector<Vec> prefix;
    for (std::size_t i = 0; i + 1 < sess.states.size(); ++i) {
      prefix_patterns.push_back(sess.states[i].pattern);
      prefix.push_back(test_emb[s][i]);
      const Vec& cur = test_emb[s][i];
      const BiPattern& expected = sess.states[i + 1].pattern;

      auto t = Clock::now();
      const auto scored = tp.intent.predict_topk(cur, cfg.k);
      const double intent_ms = ms_since(t);
      const auto intents = intents_of(scored);

      t = Clock::now();
      const auto posted = intents.empty() ? std::span<const std::size_t>{} : tp.index.postings(intents.front().mg);
      r.filter_indexed_ms += ms_since(t);
      (void)posted;
      t = Clock::now();
      const auto raw = recommend_indexed(cur, intents, tp.index, cfg.w_s);
      r.predict_indexed_ms += intent_ms + ms_since(t);

      t = Clock::now();
      const auto kept = filter_sessions_exhaustive(tp.index, prefix, cfg.exhaustive_top_n);
      r.filter_exhaustive_ms += ms_since(t);
      t = Clock::now();
      const auto base = recommend_exhaustive(prefix, intents, tp.index, cfg.w_s, cfg.exhaustive_top_n);
      r.predict_exhaustive_ms += intent_ms + ms_since(t);
      (void)kept;

      std::vector<BiPattern> refined;
      for (const auto& rec : raw) refined.push_back(refine(rec.pattern, tp.cooccurrence, cfg.n_inferred));
      score_topk(r.indexed, expected, refined);
      score_topk(r.exhaustive, expected, patterns_of(base));
      score_topk(r.svd, expected, patterns_of(svd.recommend(prefix_patterns, cfg.k)));

      if (intent_ok) {
        const auto truth = transition_intents(ont, expected);
        for (std::size_t k = 0; k < 3; ++k) {
          const std::vector<BiIntent> head(intents.begin(), intents.begin() + static_cast<std::ptrdiff_t>(std::min(k + 1, intents.size())));
          double best = 0.0;
          for (const auto& e : truth) best = std::max(best, intent_accuracy(e, head));
          intent_sum[k] += best;
        }
      }

      // Element breakdown and refinement sweep on the raw candidate closest to the truth.
      std::optional<BiPattern> closest;
      double closest_score = -1.0;
      for (std::size_t k = 0; k < raw.size() && k < 3; ++k) {
        const double j = pattern_jaccard(expected, raw[k].pattern);
        if (j > closest_score) {
          closest_score = j;
          closest = raw[k].pattern;
        }
      }
      if (closest) {
        r.element_op += closest->op == expected.op ? 1.0 : 0.0;
        r.element_measure += recall(expected.measure_ids(), closest->measure_ids());
        r.element_mg += recall(measure_groups_of(ont, expected), measure_groups_of(ont, *closest));
        r.element_dimension += recall(expected.dimension_ids(), closest->dimension_ids());
        for (int n = 0; n <= 3; ++n) {
          r.dimension_by_inferred[n] += recall(expected.dimension_ids(), refine(*closest, tp.cooccurrence, n).dimension_ids());
        }
      }
      ++q;
    }
  }
  r.queries = q;
  if (q > 0) {
    const double inv = 1.0 / static_cast<double>(q);
    scale(r.indexed, inv);
    scale(r.exhaustive, inv);
    scale(r.svd, inv);
    r.element_op *= inv;
    r.element_measure *= inv;
    r.element_mg *= inv;
    r.element_dimension *= inv;
    for (auto& v : r.dimension_by_inferred) v *= inv;
    r.predict_indexed_ms *= inv;
    r.predict_exhaustive_ms *= inv;
    r.filter_indexed_ms *= inv;
    r.filter_exhaustive_ms *= inv;
    if (intent_ok) {
      for (auto& v : intent_sum) v *= inv;
      r.intent = intent_sum;
    }
  }
  return r;
}

void accumulate(MethodScores& into, const MethodScores& x, double f) {
  for (std::size_t k = 0; k < 3; ++k) {
    into.pattern[k] += f * x.pattern[k];
    into.exact[k] += f * x.exact[k];
  }
}

FoldReport mean_of(const std::vector<FoldReport>& folds) {
  FoldReport a;
  a.fold = -1;
  if (folds.empty()) return a;
  const double f = 1.0 / static_cast<double>(folds.size());
  std::array<double, 3> intent{};
  std::size_t intent_folds = 0;
  for (const auto& r : folds) {
    a.train_sessions += r.train_sessions;
    a.test_sessions += r.test_sessions;
    a.queries += r.queries;
    accumulate(a.indexed, r.indexed, f);
    accumulate(a.exhaustive, r.exhaustive, f);
    accumulate(a.svd, r.svd, f);
    if (r.intent) {
      for (std::size_t k = 0; k < 3; ++k) intent[k] += (*r.intent)[k];
      ++intent_folds;
    }
    a.element_op += f * r.element_op;
    a.element_measure += f * r.element_measure;
    a.element_mg += f * r.element_mg;
    a.element_dimension += f * r.element_dimension;
    for (std::size_t n = 0; n < 4; ++n) a.dimension_by_inferred[n] += f * r.dimension_by_inferred[n];
    a.pair_accuracy += f * r.pair_accuracy;
    a.predict_indexed_ms += f * r.predict_indexed_ms;
    a.predict_exhaustive_ms += f * r.predict_exhaustive_ms;
    a.filter_indexed_ms += f * r.filter_indexed_ms;
    a.filter_exhaustive_ms += f * r.filter_exhaustive_ms;
    a.training.embedder_ms += f * r.training.embedder_ms;
    a.training.intent_ms += f * r.training.intent_ms;
    a.training.index_ms += f * r.training.index_ms;
  }
  if (intent_folds > 0) {
    for (auto& v : intent) v /= static_cast<double>(intent_folds);
    a.intent = intent;
  }
  return a;
}

json scores_json(const MethodScores& s) {
  return {{"pattern_top1", s.pattern[0]}, {"pattern_top2", s.pattern[1]}, {"pattern_top3", s.pattern[2]},
          {"exact_top1", s.exact[0]},     {"exact_top2", s.exact[1]},     {"exact_top3", s.exact[2]}};
}

json fold_json(const FoldReport& r) {
  json metrics = {{"indexed", scores_json(r.indexed)},
                  {"exhaustive", scores_json(r.exhaustive)},
                  {"svd", scores_json(r.svd)},
                  {"elements", {{"op", r.element_op}, {"measure", r.element_measure}, {"mg", r.element_mg}, {"dimension", r.element_dimension}}},
                  {"dimension_by_inferred", r.dimension_by_inferred},
                  {"pair_accuracy", r.pair_accuracy}};
  metrics["intent"] = r.intent ? json(*r.intent) : json(nullptr);
  json timing = {{"predict_indexed_ms", r.predict_indexed_ms},
                 {"predict_exhaustive_ms", r.predict_exhaustive_ms},
                 {"filter_indexed_ms", r.filter_indexed_ms},
                 {"filter_exhaustive_ms", r.filter_exhaustive_ms},
                 {"train_embedder_ms", r.training.embedder_ms},
                 {"train_intent_ms", r.training.intent_ms},
                 {"build_index_ms", r.training.index_ms}};
  json j = {{"train_sessions", r.train_sessions},
            {"test_sessions", r.test_sessions},
            {"queries", r.queries},
            {"metrics", std::move(metrics)},
            {"timing", std::move(timing)}};
  if (r.fold >= 0) j["fold"] = r.fold;
  return j;
}

}  // namespace

EvalReport evaluate(const Ontology& ont, const Workload& w, const PipelineConfig& cfg) {
  cfg.validate();
  EvalReport report;
  report.config = cfg;
  const auto folds = split_folds(w, cfg.folds, derive_seed(cfg.seed, "folds"));
  for (std::size_t f = 0; f < folds.size(); ++f) {
    spdlog::info("fold {}/{}: {} train / {} test sessions", f + 1, folds.size(), folds[f].train.sessions.size(),
                 folds[f].test.sessions.size());
    report.folds.push_back(run_fold(ont, folds[f], cfg, static_cast<int>(f)));
  }
  report.aggregate = mean_of(report.folds);
  return report;
}

json report_to_json(const EvalReport& report) {
  json folds = json::array();
  for (const auto& f : report.folds) folds.push_back(fold_json(f));
  return {{"config", pipeline_config_to_json(report.config)}, {"folds", std::move(folds)}, {"aggregate", fold_json(report.aggregate)}};
}

std::string report_to_csv(const EvalReport& report) {
  std::string out =
      "fold,queries,indexed_top1,indexed_top2,indexed_top3,exhaustive_top1,exhaustive_top2,exhaustive_top3,"
      "svd_top1,svd_top2,svd_top3,indexed_exact_top3,intent_top1,intent_top3,element_op,element_measure,element_mg,"
      "element_dimension,dim_n0,dim_n1,dim_n2,dim_n3,pair_accuracy,predict_indexed_ms,predict_exhaustive_ms,"
      "filter_indexed_ms,filter_exhaustive_ms\n";
  auto row = [&](const FoldReport& r, const std::string& label) {
    char buf[1024];
    const double i1 = r.intent ? (*r.intent)[0] : std::nan("");
    const double i3 = r.intent ? (*r.intent)[2] : std::nan("");
    std::snprintf(buf, sizeof buf,
                  "%s,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,"
                  "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  label.c_str(), r.queries, r.indexed.pattern[0], r.indexed.pattern[1], r.indexed.pattern[2],
                  r.exhaustive.pattern[0], r.exhaustive.pattern[1], r.exhaustive.pattern[2], r.svd.pattern[0],
                  r.svd.pattern[1], r.svd.pattern[2], r.indexed.exact[2], i1, i3, r.element_op, r.element_measure,
                  r.element_mg, r.element_dimension, r.dimension_by_inferred[0], r.dimension_by_inferred[1],
                  r.dimension_by_inferred[2], r.dimension_by_inferred[3], r.pair_accuracy, r.predict_indexed_ms,
                  r.predict_exhaustive_ms, r.filter_indexed_ms, r.filter_exhaustive_ms);
    out += buf;
  };
  for (const auto& f : report.folds) row(f, std::to_string(f.fold));
  row(report.aggregate, "mean");
  return out;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Query {
  Vec cur;
  std::vector<Vec> prefix;
};

}  // namespace

std::vector<LatencyRow> latency_bench(const Ontology& ont, const PipelineConfig& cfg, const BenchConfig& bench) {
  cfg.validate();
  if (bench.sizes.size() < 2) throw ConfigError("latency bench needs at least two corpus sizes");
  if (bench.trials < 1 || bench.warmup < 0 || bench.queries < 1) throw ConfigError("invalid trial counts");
  const std::size_t largest = *std::max_element(bench.sizes.begin(), bench.sizes.end());

  WorkloadConfig wc = WorkloadConfig::preset(bench.preset, bench.ahi);
  wc.n_sessions = static_cast<int>(largest);
  const Workload corpus = generate_workload(ont, wc, derive_seed(cfg.seed, "bench.corpus"));
  wc.n_sessions = static_cast<int>(std::max<std::size_t>(bench.queries / 2, 10));
  const Workload stream = generate_workload(ont, wc, derive_seed(cfg.seed, "bench.stream"));

  Workload train;
  train.sessions.assign(corpus.sessions.begin(),
                        corpus.sessions.begin() + static_cast<std::ptrdiff_t>(std::min(bench.train_sessions, largest)));
  const TrainedPipeline tp = train_pipeline(ont, train, cfg, derive_seed(cfg.seed, "bench.train"));
  const auto corpus_emb = embed_workload(ont, corpus, tp.embedder, cfg.level);
  const auto stream_emb = embed_workload(ont, stream, tp.embedder, cfg.level, true);

  std::vector<Query> queries;
  for (std::size_t s = 0; s < stream.sessions.size() && queries.size() < bench.queries; ++s) {
    std::vector<Vec> prefix;
    for (std::size_t i = 0; i + 1 < stream.sessions[s].states.size() && queries.size() < bench.queries; ++i) {
      prefix.push_back(stream_emb[s][i]);
      queries.push_back({stream_emb[s][i], prefix});
    }
  }

  // intents do not depend on the corpus, so the filter timings see lookups only
  std::vector<std::vector<BiIntent>> query_intents;
  for (const auto& q : queries) query_intents.push_back(intents_of(tp.intent.predict_topk(q.cur, cfg.k)));

  std::vector<LatencyRow> rows;
  volatile std::size_t sink = 0;
  for (std::size_t size : bench.sizes) {
    Workload sub;
    sub.sessions.assign(corpus.sessions.begin(), corpus.sessions.begin() + static_cast<std::ptrdiff_t>(size));
    const std::vector<std::vector<Vec>> emb(corpus_emb.begin(), corpus_emb.begin() + static_cast<std::ptrdiff_t>(size));
    const TaskIndex index = TaskIndex::build(ont, sub, emb);

    std::vector<double> fi, fe, pi, pe;
    for (int t = 0; t < bench.warmup + bench.trials; ++t) {
      const bool keep = t >= bench.warmup;
      auto t0 = Clock::now();
      for (const auto& intents : query_intents) {
        for (const auto& it : intents) sink = sink + index.postings(it.mg).size();
      }
      const double filter_in = ms_since(t0);

      t0 = Clock::now();
      for (const auto& q : queries) sink = sink + filter_sessions_exhaustive(index, q.prefix, cfg.exhaustive_top_n).size();
      const double filter_ex = ms_since(t0);

      t0 = Clock::now();
      for (const auto& q : queries) {
        const auto intents = intents_of(tp.intent.predict_topk(q.cur, cfg.k));
        sink = sink + recommend_indexed(q.cur, intents, index, cfg.w_s).size();
      }
      const double pred_in = ms_since(t0);
      t0 = Clock::now();
      for (const auto& q : queries) {
        const auto intents = intents_of(tp.intent.predict_topk(q.cur, cfg.k));
        sink = sink + recommend_exhaustive(q.prefix, intents, index, cfg.w_s, cfg.exhaustive_top_n).size();
      }
      const double pred_ex = ms_since(t0);
      if (!keep) continue;
      const double nq = static_cast<double>(queries.size());
      fi.push_back(filter_in / nq);
      fe.push_back(filter_ex / nq);
      pi.push_back(pred_in / nq);
      pe.push_back(pred_ex / nq);
    }
    rows.push_back({"indexed", size, median(fi), median(pi)});
    rows.push_back({"exhaustive", size, median(fe), median(pe)});
  }
  (void)sink;
  return rows;
}

std::string latency_to_csv(const std::vector<LatencyRow>& rows) {
  std::string out = "method,sessions,filter_ms,predict_ms\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.9f,%.9f\n", r.method.c_str(), r.sessions, r.filter_ms, r.predict_ms);
    out += buf;
  }
  return out;
}

}  // namespace gbi
