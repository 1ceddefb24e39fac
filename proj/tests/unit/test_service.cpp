#include <doctest.h>

#include <thread>

#include "gbi/error.hpp"
#include "gbi/http_server.hpp"
#include "gbi/json_io.hpp"
#include "gbi/pipeline.hpp"
#include "gbi/service.hpp"

// after Eigen: resolv.h defines _res
#include <httplib.h>

using namespace gbi;
using nlohmann::json;

namespace {

struct Fixture {
  Workload train;
  Workload held_out;
  std::shared_ptr<const ModelBundle> bundle;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    const Ontology o = generate_synthetic_ontology(OntologyGenConfig::hi(), 1);
    auto wc = WorkloadConfig::preset("hiw");
    wc.n_sessions = 60;
    const Workload w = generate_workload(o, wc, 2);
    out.train.sessions.assign(w.sessions.begin(), w.sessions.begin() + 50);
    out.held_out.sessions.assign(w.sessions.begin() + 50, w.sessions.end());
    PipelineConfig cfg;
    cfg.level = Enrichment::BI_MG_EM;
    cfg.model.output_dim = 16;
    cfg.train.epochs = 3;
    cfg.train_pairs = 300;
    cfg.forest.n_trees = 8;
    TrainedPipeline tp = train_pipeline(o, out.train, cfg, 5);
    auto b = std::make_shared<ModelBundle>();
    b->ontology = o;
    b->embedder = std::move(tp.embedder);
    b->intent = std::move(tp.intent);
    b->index = std::move(tp.index);
    b->cooccurrence = std::move(tp.cooccurrence);
    b->level = cfg.level;
    out.bundle = b;
    return out;
  }();
  return f;
}

}  // namespace

TEST_CASE("service requires loaded models") {
  RecommendationService svc;
  CHECK_FALSE(svc.ready());
  CHECK_THROWS_AS(svc.create_session(), UnavailableError);
  CHECK_THROWS_AS(svc.ontology_summary(), UnavailableError);
  ServiceConfig bad;
  bad.k = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("session lifecycle") {
  const auto& fx = fixture();
  RecommendationService svc;
  svc.load(fx.bundle);
  REQUIRE(svc.ready());
  const std::string a = svc.create_session(), b = svc.create_session();
  CHECK(a == "sess0001");
  CHECK(b == "sess0002");
  CHECK_THROWS_AS(svc.get_session("sess9999"), NotFoundError);
  CHECK_THROWS_AS(svc.submit_feedback(a, {}), ValidationError);

  const auto& first = fx.held_out.sessions[0].states[0].pattern;
  const QueryResponse r = svc.submit_query(a, first);
  CHECK(r.query_id == a + "-q1");
  CHECK(r.echo == first);
  REQUIRE_FALSE(r.recommendations.empty());
  CHECK(r.recommendations.size() <= 3);
  for (std::size_t i = 0; i < r.recommendations.size(); ++i) {
    CHECK(r.recommendations[i].rank == static_cast<int>(i + 1));
    CHECK(r.recommendations[i].id == r.query_id + "-r" + std::to_string(i + 1));
  }
  CHECK(svc.get_session(a).pending.size() == r.recommendations.size());
  CHECK(svc.get_session(b).states.empty());

  SUBCASE("invalid feedback names the offending ranks") {
    try {
      svc.submit_feedback(a, {1, 1, 7});
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      REQUIRE(e.offenders().size() == 2);
      CHECK(e.offenders()[0].find("ranks[1]") == 0);
      CHECK(e.offenders()[1].find("ranks[2]") == 0);
    }
    CHECK(svc.get_session(a).pending.size() == r.recommendations.size());
  }
  SUBCASE("an empty selection is recorded") {
    svc.submit_feedback(a, {});
    const auto v = svc.get_session(a);
    REQUIRE(v.feedback.size() == 1);
    CHECK(v.feedback[0].votes.empty());
    CHECK(v.pending.empty());
    CHECK_THROWS_AS(svc.submit_feedback(a, {1}), ValidationError);
    CHECK(svc.counters().answered == 1);
    CHECK(svc.counters().with_selection == 0);
  }
  SUBCASE("invalid pattern") {
    BiPattern bad = first;
    bad.measures[0].id = "no_such_measure";
    CHECK_THROWS_AS(svc.submit_query(a, bad), ValidationError);
    CHECK(svc.get_session(a).states.size() == 1);
  }
}

TEST_CASE("online recommendations equal the offline path") {
  const auto& fx = fixture();
  const ModelBundle& m = *fx.bundle;
  RecommendationService svc;
  svc.load(fx.bundle);
  const ServiceConfig cfg = svc.config();
  const auto offline = embed_workload(m.ontology, fx.held_out, m.embedder, m.level, true);
  int compared = 0;
  for (std::size_t s = 0; s < fx.held_out.sessions.size(); ++s) {
    const std::string id = svc.create_session();
    const auto& states = fx.held_out.sessions[s].states;
    for (std::size_t i = 0; i < states.size(); ++i) {
      const auto online = svc.submit_query(id, states[i].pattern);
      std::vector<BiIntent> intents;
      for (const auto& si : m.intent.predict_topk(offline[s][i], cfg.k)) intents.push_back(si.intent);
      const auto expected = recommend_indexed(offline[s][i], intents, m.index, cfg.w_s);
      REQUIRE(online.recommendations.size() == expected.size());
      for (std::size_t r = 0; r < expected.size(); ++r) {
        CHECK(online.recommendations[r].rec.pattern == refine(expected[r].pattern, m.cooccurrence, cfg.n_inferred));
        CHECK(online.recommendations[r].rec.provenance == expected[r].provenance);
      }
      ++compared;
      std::vector<int> ranks;
      if (i % 3 == 1) ranks = {2};
      if (i % 3 == 2) ranks = {1, 3};
      if (static_cast<int>(online.recommendations.size()) < 3) ranks.clear();
      svc.submit_feedback(id, ranks);
    }
  }
  CHECK(compared > 30);

  // the export recounts to the running counters
  const FeedbackLog log = svc.export_feedback();
  const FeedbackCounters c = svc.counters();
  CHECK(log.size() == c.answered);
  std::size_t selected = 0;
  std::array<std::size_t, 3> votes{};
  for (const auto& rec : log) {
    selected += !rec.selected().empty();
    for (const auto& [rank, n] : rec.votes) votes[static_cast<std::size_t>(rank - 1)] += static_cast<std::size_t>(n);
  }
  CHECK(selected == c.with_selection);
  CHECK(votes == c.votes_by_rank);
  CHECK(mrr(log) * static_cast<double>(log.size()) == doctest::Approx(c.reciprocal_rank_sum));
}

TEST_CASE("ontology summary") {
  const auto& fx = fixture();
  RecommendationService svc;
  svc.load(fx.bundle);
  const json s = svc.ontology_summary();
  const Ontology& o = fx.bundle->ontology;
  CHECK(s["measures"].size() == o.measures().size());
  CHECK(s["dimensions"].size() == o.dimensions().size());
  CHECK(s["measure_groups"].size() == o.measure_groups().size());
  for (const auto& m : s["measures"]) {
    const auto dims = m["dimensions"].get<std::vector<std::string>>();
    CHECK(std::set<NodeId>(dims.begin(), dims.end()) == connected_dimensions(o, {m["id"].get<std::string>()}));
  }
}

TEST_CASE("http interface") {
  const auto& fx = fixture();
  RecommendationService svc;
  HttpServer server(svc);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread t([&] { server.listen(); });
  server.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);

  auto health = cli.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 503);
  auto early = cli.Post("/sessions", "", "application/json");
  REQUIRE(early);
  CHECK(early->status == 503);

  svc.load(fx.bundle);
  CHECK(cli.Get("/healthz")->status == 200);

  auto created = cli.Post("/sessions", "", "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const std::string id = json::parse(created->body)["id"];

  const auto& p = fx.held_out.sessions[0].states[0].pattern;
  auto q = cli.Post("/sessions/" + id + "/queries", json{{"pattern", pattern_to_json(p)}}.dump(), "application/json");
  REQUIRE(q);
  CHECK(q->status == 200);
  const json qr = json::parse(q->body);
  CHECK(qr["query_id"] == id + "-q1");
  CHECK_FALSE(qr["recommendations"].empty());

  auto bad = cli.Post("/sessions/" + id + "/queries", R"({"pattern": {"op": "ANALYSIS", "measures": [{"id": "zzz", "agg": "SUM"}], "dimensions": []}})",
                      "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body)["locus"].dump().find("measures[0]") != std::string::npos);

  auto garbled = cli.Post("/sessions/" + id + "/queries", "{not json", "application/json");
  REQUIRE(garbled);
  CHECK(garbled->status == 400);

  auto missing = cli.Get("/sessions/sess9999");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  auto dup = cli.Post("/sessions/" + id + "/feedback", R"({"ranks": [1, 1]})", "application/json");
  REQUIRE(dup);
  CHECK(dup->status == 400);
  auto fb = cli.Post("/sessions/" + id + "/feedback", R"({"ranks": [1]})", "application/json");
  REQUIRE(fb);
  CHECK(fb->status == 200);

  auto view = cli.Get("/sessions/" + id);
  REQUIRE(view);
  CHECK(view->status == 200);
  CHECK(json::parse(view->body)["states"].size() == 1);

  auto ont = cli.Get("/ontology");
  REQUIRE(ont);
  CHECK(json::parse(ont->body)["measures"].size() == fx.bundle->ontology.measures().size());

  auto exported = cli.Get("/feedback");
  REQUIRE(exported);
  const json ex = json::parse(exported->body);
  CHECK(ex["log"].size() == 1);
  CHECK(ex["precision_at_3"] == 1.0);
  CHECK(ex["mrr"] == 1.0);

  server.stop();
  t.join();
}
