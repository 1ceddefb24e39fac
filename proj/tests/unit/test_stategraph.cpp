#include <doctest.h>

#include <algorithm>

#include "gbi/error.hpp"
#include "gbi/stategraph.hpp"
#include "support.hpp"

using namespace gbi;
using test::simple;

namespace {

AnnotatedState annotated(const Ontology& o, const BiPattern& p, std::set<NodeId> task) {
  const State s{p, 1};
  return {s, ontology_neighborhood(o, s, task)};
}

std::set<std::string> keys(const StateGraph& g) {
  std::set<std::string> out;
  for (const auto& n : g.nodes) out.insert(n.key);
  return out;
}

}  // namespace

TEST_CASE("ontology neighborhood") {
  const Ontology o = test::health_ontology();
  const State s{simple(BiOp::Analysis, "acute_admits", "region"), 1};
  const auto on = ontology_neighborhood(o, s, {"utilization"});
  CHECK(on.task.contains("utilization"));
  CHECK(on.expanded_measures == std::set<NodeId>{"er_visits", "days_stay"});
  CHECK(on.expanded_dimensions == connected_dimensions(o, on.expanded_measures));

  Ontology lonely = test::health_ontology();
  lonely.add_measure_group("solo_mg", "Solo");
  lonely.add_measure("solo", "Solo Measure");
  lonely.add_isa("solo", "solo_mg");
  const auto on2 = ontology_neighborhood(lonely, State{simple(BiOp::Analysis, "solo"), 1}, {"solo_mg"});
  CHECK(on2.expanded_measures.empty());
  CHECK(on2.expanded_dimensions.empty());
}

TEST_CASE("EM equals a sibling scan over is-A edges") {
  const Ontology o = generate_synthetic_ontology(OntologyGenConfig::hi(), 5);
  for (const auto& m : o.measures()) {
    const auto on = ontology_neighborhood(o, State{simple(BiOp::Analysis, m), 1}, {});
    std::set<NodeId> oracle;
    for (const auto& [child, parent] : o.isa_edges()) {
      if (o.is_measure(child) && child != m && parent == o.parent(m)) oracle.insert(child);
    }
    CHECK(on.expanded_measures == oracle);
  }
}

TEST_CASE("BI graph of a one-measure one-dimension analysis state has six nodes") {
  const Ontology o = test::health_ontology();
  const auto a = annotated(o, simple(BiOp::Analysis, "acute_admits", "region"), {"utilization"});
  const StateGraph g = build_state_graph(o, a.state, a.on, Enrichment::BI);
  CHECK(keys(g) == std::set<std::string>{"root", "pattern", "op", "m:acute_admits", "agg:acute_admits:SUM", "d:region"});
  CHECK(g.edges.size() == 5);
  CHECK(g.nodes[g.find("op")].label == "ANALYSIS");
  CHECK(g.nodes[g.find("m:acute_admits")].label == "Acute Admits");
  CHECK(g.find("nope") == g.nodes.size());
}

TEST_CASE("graph invariants across enrichment levels") {
  const Ontology o = test::health_ontology();
  const auto a = annotated(o, test::pattern(BiOp::DrillDown, {{"acute_admits", Aggregation::Count}}, {{"region", ""}, {"admit_year", "2016"}}),
                           {"utilization"});
  std::set<std::string> previous;
  for (Enrichment level : {Enrichment::BI, Enrichment::BI_MG_EM, Enrichment::BI_MG_EM_DG, Enrichment::BI_MG_EM_DG_ED}) {
    const StateGraph g = build_state_graph(o, a.state, a.on, level);
    const auto k = keys(g);
    CHECK(std::includes(k.begin(), k.end(), previous.begin(), previous.end()));
    CHECK(k.size() > previous.size());
    CHECK(k.size() == g.nodes.size());
    previous = k;

    CHECK(std::count_if(g.nodes.begin(), g.nodes.end(), [](const GraphNode& n) { return n.kind == NodeKind::Root; }) == 1);
    CHECK(std::count_if(g.nodes.begin(), g.nodes.end(), [](const GraphNode& n) { return n.kind == NodeKind::Pattern; }) == 1);
    for (const auto& e : g.edges) {
      CHECK(e.src < g.nodes.size());
      CHECK(e.dst < g.nodes.size());
      const auto& s = g.nodes[e.src];
      if (s.kind == NodeKind::Agg) CHECK(g.nodes[e.dst].kind == NodeKind::Measure);
      if (s.kind == NodeKind::Filter) CHECK(g.nodes[e.dst].kind == NodeKind::Dimension);
    }
    CHECK(g.eccentricity_from_root() <= 3);
    if (level != Enrichment::BI) {
      const std::size_t mg = g.find("mg:utilization");
      REQUIRE(mg < g.nodes.size());
      CHECK(std::any_of(g.edges.begin(), g.edges.end(), [&](const GraphEdge& e) { return e.src == 0 && e.dst == mg; }));
    }
  }
  const StateGraph full = build_state_graph(o, a.state, a.on, Enrichment::BI_MG_EM_DG_ED);
  CHECK(full.find("dg:geo") < full.nodes.size());
  CHECK(full.find("em:er_visits") < full.nodes.size());
  CHECK(full.find("ed:state") < full.nodes.size());
  CHECK(full.to_dot().find("digraph") != std::string::npos);
}

TEST_CASE("root eccentricity stays within three on generated states") {
  const Ontology o = generate_synthetic_ontology(OntologyGenConfig::hi(), 2);
  auto cfg = WorkloadConfig::preset("bt-uniform");
  cfg.n_sessions = 160;
  const Workload w = generate_workload(o, cfg, 3);
  const auto states = annotate_states(o, w);
  REQUIRE(states.size() >= 1000);
  int worst = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    worst = std::max(worst, build_state_graph(o, states[i].state, states[i].on, Enrichment::BI_MG_EM_DG_ED).eccentricity_from_root());
  }
  CHECK(worst <= 3);
}

TEST_CASE("state similarity") {
  const Ontology o = test::health_ontology();
  const auto a = annotated(o, simple(BiOp::Analysis, "acute_admits", "region"), {"utilization"});
  CHECK(state_similarity(a, a) == 1.0);

  // same op and measure, disjoint dimensions, identical neighborhood
  const auto b = annotated(o, simple(BiOp::Analysis, "acute_admits", "provider"), {"utilization"});
  CHECK(state_similarity(a, b) == doctest::Approx(0.75));

  const auto c = annotated(o, test::pattern(BiOp::Trend, {{"copay", Aggregation::Max}}, {{"drug", ""}}), {"net_pay"});
  // nothing shared but the neighborhood
  std::set<std::string> na, nc;
  for (const auto* st : {&a, &c}) {
    auto& n = st == &a ? na : nc;
    for (const auto& t : st->on.task) n.insert("t" + t);
    for (const auto& m : st->on.expanded_measures) n.insert("m" + m);
    for (const auto& d : st->on.expanded_dimensions) n.insert("d" + d);
  }
  CHECK(state_similarity(a, c) == doctest::Approx(jaccard(na, nc) / 4.0));
  CHECK(state_similarity(a, c, false) == doctest::Approx(0.25));
  CHECK(state_similarity(a, c) == state_similarity(c, a));
}

TEST_CASE("pair sampling") {
  const Ontology o = generate_synthetic_ontology(OntologyGenConfig::hi(), 2);
  auto cfg = WorkloadConfig::preset("hiw");
  cfg.n_sessions = 40;
  const Workload w = generate_workload(o, cfg, 8);
  const auto states = annotate_states(o, w);
  const auto pairs = sample_pairs(states, 400, 12);
  CHECK(pairs.size() == 400);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::size_t matching = 0;
  for (const auto& p : pairs) {
    CHECK(p.a < p.b);
    CHECK(seen.insert({p.a, p.b}).second);
    const double oracle = state_similarity(states[p.a], states[p.b]);
    CHECK(p.similarity == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(p.matching == (oracle > 0.5));
    matching += p.matching;
  }
  CHECK(matching > 0);
  CHECK(matching <= 200);

  const auto again = sample_pairs(states, 400, 12);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(again[i].a == pairs[i].a);
    CHECK(again[i].b == pairs[i].b);
  }
  CHECK_THROWS_AS(sample_pairs(std::vector<AnnotatedState>(states.begin(), states.begin() + 3), 4, 1), ConfigError);
}

TEST_CASE("enrichment names") {
  for (Enrichment e : {Enrichment::BI, Enrichment::BI_MG_EM, Enrichment::BI_MG_EM_DG, Enrichment::BI_MG_EM_DG_ED}) {
    CHECK(parse_enrichment(to_string(e)) == e);
  }
  CHECK(std::string(to_string(Enrichment::BI_MG_EM)) == "BI+MG+EM");
  CHECK_THROWS(parse_enrichment("everything"));
}
