// gbi: command line driver for the guided analysis pipeline.

#include <atomic>
#include <chrono>
#include <csignal>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "gbi/http_server.hpp"
#include "gbi/json_io.hpp"
#include "gbi/pipeline.hpp"
#include "gbi/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gbi;

namespace {

/// Reads a JSON object as CLI11 config: top-level scalars and arrays apply to
/// every subcommand; an object keyed by the subcommand name applies to it only.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(std::string section) : section_(std::move(section)) {}

  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string& name = opt->get_lnames().front();
      if (opt->count() > 0) {
        const auto& r = opt->results();
        j[name] = r.size() == 1 ? json(r.front()) : json(r);
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    return j.dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config: expected a JSON object");
    std::vector<CLI::ConfigItem> items;
    flatten(j, items);
    if (auto it = j.find(section_); it != j.end() && it->is_object()) flatten(*it, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void flatten(const json& obj, std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, v] : obj.items()) {
      if (v.is_object()) continue;
      CLI::ConfigItem item;
      item.name = key;
      if (v.is_array()) {
        for (const auto& e : v) item.inputs.push_back(scalar(e));
      } else {
        item.inputs.push_back(scalar(v));
      }
      items.push_back(std::move(item));
    }
  }

  std::string section_;
};

std::string iso_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Options and manifest bookkeeping shared by every subcommand.
struct Common {
  std::uint64_t seed = 7;
  std::string out_dir = ".";
  std::string log_level = "info";
  std::string config_path;
  std::string command;
  std::string started;
  json seeds = json::object();
  std::vector<std::string> artifacts;

  std::string path(const std::string& name) const { return (fs::path(out_dir) / name).string(); }

  std::string write(const std::string& name, const std::string& content) {
    const std::string p = path(name);
    write_text_file(p, content);
    artifacts.push_back(p);
    spdlog::info("wrote {}", p);
    return p;
  }

  std::uint64_t stage_seed(const std::string& tag) {
    const std::uint64_t s = derive_seed(seed, tag);
    seeds[tag] = s;
    return s;
  }

  /// manifest.json keeps one entry per subcommand run in the output directory.
  void manifest() const {
    const std::string p = path("manifest.json");
    json all = json::object();
    if (fs::exists(p)) {
      try {
        all = json::parse(read_text_file(p));
      } catch (const json::exception&) {
        spdlog::warn("replacing unreadable {}", p);
      }
      if (!all.is_object()) all = json::object();
    }
    json m = {{"command", command},
              {"config_file", config_path.empty() ? json(nullptr) : json(config_path)},
              {"seed", seed},
              {"stage_seeds", seeds},
              {"artifacts", artifacts},
              {"started_at", started},
              {"finished_at", iso_now()}};
    all[command] = std::move(m);
    write_text_file(p, all.dump(2) + "\n");
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->config_formatter(std::make_shared<JsonConfig>(sub->get_name()));
  sub->set_config("--config", "", "JSON file mirroring the flags (flags win)");
  sub->allow_config_extras(CLI::config_extras_mode::ignore);
  sub->add_option("--seed", c.seed, "Master seed; every stage seed derives from it")->capture_default_str();
  sub->add_option("--out-dir", c.out_dir, "Directory for artifacts and manifest.json")->capture_default_str();
  sub->add_option("--log-level", c.log_level, "trace|debug|info|warn|error|off")->capture_default_str();
}

struct WorkloadOpts {
  std::string preset = "hiw";
  bool ahi = false;
  int sessions = 0;
  std::optional<double> skew;
  std::optional<double> persistence;
  std::optional<double> consistency;
  std::optional<int> min_length;
  std::optional<int> max_length;

  WorkloadConfig resolve() const {
    WorkloadConfig w = WorkloadConfig::preset(preset, ahi);
    if (sessions > 0) w.n_sessions = sessions;
    if (skew) w.cooccurrence_skew = *skew;
    if (persistence) w.state_persistence = *persistence;
    if (consistency) w.aggregation_consistency = *consistency;
    if (min_length) w.min_session_length = *min_length;
    if (max_length) w.max_session_length = *max_length;
    w.validate();
    return w;
  }
};

void add_workload_opts(CLI::App* sub, WorkloadOpts& o) {
  sub->add_option("--preset", o.preset, "Workload preset (hiw, bt-*, st-*)")->capture_default_str();
  sub->add_flag("--ahi", o.ahi, "Use the AHI sessions-per-task bounds");
  sub->add_option("--sessions", o.sessions, "Number of sessions (0 keeps the preset)");
  sub->add_option("--skew", o.skew, "Measure/dimension co-occurrence skew");
  sub->add_option("--persistence", o.persistence, "Probability a state carries over its predecessor")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--consistency", o.consistency, "Probability a measure uses its fixed aggregation")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--min-length", o.min_length, "Minimum session length");
  sub->add_option("--max-length", o.max_length, "Maximum session length");
}

struct ModelOpts {
  std::string level = "BI+MG+EM+DG+ED";
  std::string activation;
};

void add_model_opts(CLI::App* sub, PipelineConfig& p, ModelOpts& o) {
  sub->add_option("--level", o.level, "Enrichment level (BI, BI+MG+EM, BI+MG+EM+DG, BI+MG+EM+DG+ED)")->capture_default_str();
  sub->add_option("--dim", p.model.output_dim, "Embedding dimension")->capture_default_str();
  sub->add_option("--layers", p.model.layers, "Aggregation layers")->capture_default_str();
  sub->add_option("--hidden-dim", p.model.hidden_dim, "Hidden width (0 = --dim)")->capture_default_str();
  sub->add_option("--input-dim", p.model.encoder.input_dim, "Hashed label feature width")->capture_default_str();
  sub->add_option("--activation", o.activation, "relu|leaky_relu|tanh|identity");
  sub->add_option("--epochs", p.train.epochs, "Training epochs")->capture_default_str();
  sub->add_option("--batch-size", p.train.batch_size, "Pairs per minibatch")->capture_default_str();
  sub->add_option("--lr", p.train.learning_rate, "Adam learning rate")->capture_default_str();
  sub->add_option("--pairs", p.train_pairs, "Training state pairs")->capture_default_str();
}

void add_forest_opts(CLI::App* sub, PipelineConfig& p) {
  sub->add_option("--trees", p.forest.n_trees, "Random forest size")->capture_default_str();
  sub->add_option("--max-depth", p.forest.max_depth, "Maximum tree depth")->capture_default_str();
  sub->add_option("--min-samples-split", p.forest.min_samples_split, "Minimum samples to split")->capture_default_str();
}

void add_recommend_opts(CLI::App* sub, PipelineConfig& p) {
  sub->add_option("--k", p.k, "Recommendations per query")->check(CLI::Range(1, 3))->capture_default_str();
  sub->add_option("--w-s", p.w_s, "Weight of state similarity against op match")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  sub->add_option("--n-inferred", p.n_inferred, "Dimensions added by refinement")->check(CLI::Range(0, 3))->capture_default_str();
}

void apply(PipelineConfig& p, const ModelOpts& o) {
  p.level = parse_enrichment(o.level);
  if (!o.activation.empty()) p.model.activation = parse_activation(o.activation);
}

Workload load_workload(const std::string& path, const Ontology& ont) { return read_log(path, ont); }

std::atomic<HttpServer*> g_server{nullptr};

void on_signal(int) {
  if (HttpServer* s = g_server.load()) s->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Guided BI analysis: embeddings, intents and next-step recommendations"};
  app.require_subcommand(1);
  app.fallthrough(false);

  Common common;
  PipelineConfig pipe;
  ModelOpts model_opts;
  WorkloadOpts wopts;
  std::string ontology_path, workload_path, embedder_path, intent_path, index_path;

  auto* gen_ont = app.add_subcommand("gen-ontology", "Generate a synthetic ontology");
  std::string profile = "hi";
  add_common(gen_ont, common);
  gen_ont->add_option("--profile", profile, "hi or ahi")->check(CLI::IsMember({"hi", "ahi"}))->capture_default_str();

  auto* gen_wl = app.add_subcommand("gen-workload", "Generate a synthetic session log");
  add_common(gen_wl, common);
  gen_wl->add_option("--ontology", ontology_path, "Ontology JSON")->required()->check(CLI::ExistingFile);
  add_workload_opts(gen_wl, wopts);

  auto* train_emb = app.add_subcommand("train-embedder", "Train the state embedder");
  add_common(train_emb, common);
  train_emb->add_option("--ontology", ontology_path, "Ontology JSON")->required()->check(CLI::ExistingFile);
  train_emb->add_option("--workload", workload_path, "Session log (JSONL)")->required()->check(CLI::ExistingFile);
  add_model_opts(train_emb, pipe, model_opts);

  auto* train_int = app.add_subcommand("train-intent", "Train the intent classifier");
  add_common(train_int, common);
  train_int->add_option("--ontology", ontology_path, "Ontology JSON")->required()->check(CLI::ExistingFile);
  train_int->add_option("--workload", workload_path, "Session log (JSONL)")->required()->check(CLI::ExistingFile);
  train_int->add_option("--embedder", embedder_path, "Embedder model JSON")->required()->check(CLI::ExistingFile);
  train_int->add_option("--level", model_opts.level, "Enrichment level the embedder was trained at")->capture_default_str();
  add_forest_opts(train_int, pipe);

  auto* build_idx = app.add_subcommand("build-index", "Embed the log and build the task index");
  add_common(build_idx, common);
  build_idx->add_option("--ontology", ontology_path, "Ontology JSON")->required()->check(CLI::ExistingFile);
  build_idx->add_option("--workload", workload_path, "Session log (JSONL)")->required()->check(CLI::ExistingFile);
  build_idx->add_option("--embedder", embedder_path, "Embedder model JSON")->required()->check(CLI::ExistingFile);
  build_idx->add_option("--level", model_opts.level, "Enrichment level the embedder was trained at")->capture_default_str();

  auto* eval = app.add_subcommand("evaluate", "Cross-validate recommenders and embeddings");
  add_common(eval, common);
  eval->add_option("--ontology", ontology_path, "Ontology JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--workload", workload_path, "Session log (JSONL)")->required()->check(CLI::ExistingFile);
  eval->add_option("--folds", pipe.folds, "Cross-validation folds")->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--eval-pairs", pipe.eval_pairs, "Held-out pairs for pair-match accuracy")->capture_default_str();
  eval->add_option("--svd-rank", pipe.svd_rank, "Factorization rank")->capture_default_str();
  eval->add_option("--svd-iterations", pipe.svd_iterations, "Factorization updates")->capture_default_str();
  eval->add_option("--exhaustive-top-n", pipe.exhaustive_top_n, "Sessions kept by the exhaustive filter")->capture_default_str();
  add_model_opts(eval, pipe, model_opts);
  add_forest_opts(eval, pipe);
  add_recommend_opts(eval, pipe);

  auto* bench = app.add_subcommand("bench", "Latency sweep of indexed against exhaustive filtering");
  BenchConfig bcfg;
  add_common(bench, common);
  bench->add_option("--ontology", ontology_path, "Ontology JSON (default: generated AHI profile)")->check(CLI::ExistingFile);
  bench->add_option("--sizes", bcfg.sizes, "Corpus sizes")->capture_default_str();
  bench->add_option("--queries", bcfg.queries, "Queries per trial")->capture_default_str();
  bench->add_option("--trials", bcfg.trials, "Timed trials")->capture_default_str();
  bench->add_option("--warmup", bcfg.warmup, "Untimed warmup trials")->capture_default_str();
  bench->add_option("--train-sessions", bcfg.train_sessions, "Sessions used to train the models")->capture_default_str();
  bench->add_option("--preset", bcfg.preset, "Workload preset")->capture_default_str();
  add_model_opts(bench, pipe, model_opts);

  auto* serve = app.add_subcommand("serve", "Run the HTTP recommendation service");
  ServiceConfig scfg;
  std::string host = "127.0.0.1";
  int port = 8080;
  add_common(serve, common);
  serve->add_option("--ontology", ontology_path, "Ontology JSON")->required()->envname("GBI_ONTOLOGY")->check(CLI::ExistingFile);
  serve->add_option("--embedder", embedder_path, "Embedder model JSON")->required()->envname("GBI_EMBEDDER")->check(CLI::ExistingFile);
  serve->add_option("--intent", intent_path, "Intent model JSON")->required()->envname("GBI_INTENT")->check(CLI::ExistingFile);
  serve->add_option("--index", index_path, "Index bundle JSON")->required()->envname("GBI_INDEX")->check(CLI::ExistingFile);
  serve->add_option("--host", host, "Bind address")->envname("GBI_HOST")->capture_default_str();
  serve->add_option("--port", port, "Bind port (0 picks one)")->envname("GBI_PORT")->capture_default_str();
  serve->add_option("--k", scfg.k, "Recommendations per query")->envname("GBI_K")->check(CLI::Range(1, 3))->capture_default_str();
  serve->add_option("--w-s", scfg.w_s, "Weight of state similarity")->envname("GBI_W_S")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  serve->add_option("--n-inferred", scfg.n_inferred, "Dimensions added by refinement")->envname("GBI_N_INFERRED")->check(CLI::Range(0, 3))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  common.command = sub->get_name();
  common.started = iso_now();
  if (auto* opt = sub->get_option_no_throw("--config"); opt && opt->count() > 0) common.config_path = opt->as<std::string>();
  spdlog::set_level(spdlog::level::from_str(common.log_level));
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");

  try {
    fs::create_directories(common.out_dir);
    if (sub == gen_ont) {
      const auto cfg = profile == "ahi" ? OntologyGenConfig::ahi() : OntologyGenConfig::hi();
      const Ontology ont = generate_synthetic_ontology(cfg, common.stage_seed("ontology"));
      common.write("ontology.json", ontology_to_json(ont));
      spdlog::info("{} measures, {} dimensions, {} MGs, {} DGs", ont.measures().size(), ont.dimensions().size(),
                   ont.measure_groups().size(), ont.dimension_groups().size());
    } else if (sub == gen_wl) {
      const Ontology ont = load_ontology(ontology_path);
      const WorkloadConfig wc = wopts.resolve();
      const Workload w = generate_workload(ont, wc, common.stage_seed("workload"));
      common.write("workload.jsonl", log_to_jsonl(w, ont));
      common.write("workload_config.json", workload_config_to_json(wc).dump(2) + "\n");
      spdlog::info("{} sessions, {} states", w.sessions.size(), w.state_count());
    } else if (sub == train_emb) {
      apply(pipe, model_opts);
      pipe.validate();
      const Ontology ont = load_ontology(ontology_path);
      const Workload w = load_workload(workload_path, ont);
      const EmbedderModel m = train_embedder_on(ont, w, pipe, common.stage_seed("train"));
      common.write("embedder.json", model_to_json(m));
      common.write("loss_trace.csv", loss_trace_csv(m));
      if (!m.loss_trace.empty()) spdlog::info("loss {:.4f} -> {:.4f}", m.loss_trace.front(), m.loss_trace.back());
    } else if (sub == train_int) {
      apply(pipe, model_opts);
      pipe.forest.validate();
      const Ontology ont = load_ontology(ontology_path);
      const Workload w = load_workload(workload_path, ont);
      const EmbedderModel m = load_model(embedder_path);
      const auto emb = embed_workload(ont, w, m, pipe.level);
      RFConfig rf = pipe.forest;
      rf.seed = derive_seed(common.stage_seed("train"), "forest");
      const IntentModel im = IntentModel::train(build_intent_examples(ont, w, emb), rf);
      common.write("intent.json", im.to_json().dump() + "\n");
      spdlog::info("{} intent classes", im.classes().size());
    } else if (sub == build_idx) {
      apply(pipe, model_opts);
      const Ontology ont = load_ontology(ontology_path);
      const Workload w = load_workload(workload_path, ont);
      const EmbedderModel m = load_model(embedder_path);
      const TaskIndex idx = TaskIndex::build(ont, w, embed_workload(ont, w, m, pipe.level));
      common.write("index.json", index_bundle_to_json(idx, CooccurrenceStats::build(w), pipe.level).dump() + "\n");
      spdlog::info("{} sessions, {} transitions, {} MG keys", idx.sessions().size(), idx.transition_count(), idx.keys().size());
    } else if (sub == eval) {
      apply(pipe, model_opts);
      pipe.seed = common.stage_seed("evaluate");
      const Ontology ont = load_ontology(ontology_path);
      const Workload w = load_workload(workload_path, ont);
      const EvalReport r = evaluate(ont, w, pipe);
      common.write("report.json", report_to_json(r).dump(2) + "\n");
      common.write("report.csv", report_to_csv(r));
      const auto& a = r.aggregate;
      spdlog::info("top-3 pattern accuracy: indexed {:.3f}, exhaustive {:.3f}, svd {:.3f}; pair accuracy {:.3f}",
                   a.indexed.pattern[2], a.exhaustive.pattern[2], a.svd.pattern[2], a.pair_accuracy);
    } else if (sub == bench) {
      apply(pipe, model_opts);
      pipe.seed = common.stage_seed("bench");
      const Ontology ont = ontology_path.empty()
                               ? generate_synthetic_ontology(OntologyGenConfig::ahi(), common.stage_seed("ontology"))
                               : load_ontology(ontology_path);
      const auto rows = latency_bench(ont, pipe, bcfg);
      common.write("latency.csv", latency_to_csv(rows));
      for (const auto& row : rows) {
        spdlog::info("{:>10} {:>5} sessions: filter {:.4f} ms, predict {:.4f} ms", row.method, row.sessions, row.filter_ms,
                     row.predict_ms);
      }
    } else if (sub == serve) {
      RecommendationService service(scfg);
      service.load(std::make_shared<const ModelBundle>(load_bundle(ontology_path, embedder_path, intent_path, index_path)));
      HttpServer server(service);
      const int bound = server.bind(host, port);
      if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      common.manifest();
      spdlog::info("listening on http://{}:{}", host, bound);
      std::cout << "listening " << host << ":" << bound << std::endl;
      const bool ok = server.listen();
      g_server = nullptr;
      return ok ? 0 : 1;
    }
    common.manifest();
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
