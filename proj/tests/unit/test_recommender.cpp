#include <doctest.h>

#include <tuple>

#include "gbi/error.hpp"
#include "gbi/random.hpp"
#include "gbi/recommender.hpp"
#include "support.hpp"

using namespace gbi;
using test::simple;

namespace {

std::vector<std::vector<Vec>> random_embeddings(const Workload& w, int dim, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::vector<Vec>> out;
  for (const auto& s : w.sessions) {
    auto& row = out.emplace_back();
    for (std::size_t i = 0; i < s.states.size(); ++i) {
      Vec v(dim);
      for (int j = 0; j < dim; ++j) v[j] = n(rng);
      row.push_back(v.normalized());
    }
  }
  return out;
}

struct Candidate {
  double score;
  std::string session;
  std::size_t position;
  std::string key;
};

// Argmax over every transition whose session passes `keep`, ties to the
// lower (session id, position).
template <typename Keep>
std::optional<Candidate> brute_force(const Workload& w, const std::vector<std::vector<Vec>>& emb, const Vec& cur,
                                     BiOp op, double w_s, Keep keep) {
  std::optional<Candidate> best;
  for (std::size_t s = 0; s < w.sessions.size(); ++s) {
    if (!keep(s)) continue;
    const auto& st = w.sessions[s].states;
    for (std::size_t i = 0; i + 1 < st.size(); ++i) {
      const double c = cur.dot(emb[s][i]) / (cur.norm() * emb[s][i].norm());
      const double score = w_s * std::max(0.0, c) + (1 - w_s) * (st[i + 1].pattern.op == op ? 1.0 : 0.0);
      const Candidate cand{score, w.sessions[s].id, i, canonical_key(st[i + 1].pattern)};
      if (!best || score > best->score + 1e-12 ||
          (std::abs(score - best->score) <= 1e-12 &&
           std::tie(cand.session, cand.position) < std::tie(best->session, best->position))) {
        best = cand;
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("task index postings") {
  const Ontology o = test::health_ontology();
  const auto two = test::pattern(BiOp::Comparison, {{"copay", Aggregation::Sum}, {"er_visits", Aggregation::Sum}});
  const Workload w = test::workload_of({
      {"s9", {simple(BiOp::Analysis, "acute_admits"), simple(BiOp::RollUp, "acute_admits", "region")}},
      {"s8", {simple(BiOp::Analysis, "er_visits"), simple(BiOp::DrillDown, "er_visits", "state")}},
      {"s30", {simple(BiOp::Analysis, "days_stay"), simple(BiOp::Pivot, "days_stay", "provider")}},
      {"s40", {simple(BiOp::Analysis, "acute_admits"), two}},
      {"s41", {simple(BiOp::Analysis, "copay")}},
  });
  const auto emb = random_embeddings(w, 4, 1);
  const TaskIndex idx = TaskIndex::build(o, w, emb);
  const auto util = idx.postings("utilization");
  CHECK(std::vector<std::size_t>(util.begin(), util.end()) == std::vector<std::size_t>{0, 1, 2, 3});
  const auto net = idx.postings("net_pay");
  CHECK(std::vector<std::size_t>(net.begin(), net.end()) == std::vector<std::size_t>{3, 4});
  CHECK(idx.postings("nowhere").empty());
  CHECK(idx.keys() == std::vector<NodeId>{"net_pay", "utilization"});
  CHECK(idx.transition_count() == 4);
  CHECK(idx.sessions()[3].task == std::set<NodeId>{"net_pay", "utilization"});
  CHECK(idx.sessions()[0].summary.isApprox((emb[0][0] + emb[0][1]) / 2.0));

  // union of postings covers every session with a multi-state task
  std::set<std::size_t> all(util.begin(), util.end());
  all.insert(net.begin(), net.end());
  CHECK(all.size() == 5);

  const TaskIndex back = TaskIndex::from_json(idx.to_json());
  CHECK(back.sessions().size() == 5);
  CHECK(back.keys() == idx.keys());
  for (std::size_t s = 0; s < 5; ++s) {
    CHECK(back.sessions()[s].patterns == idx.sessions()[s].patterns);
    CHECK(back.sessions()[s].embeddings == idx.sessions()[s].embeddings);
  }
}

TEST_CASE("transition similarity") {
  const Vec a = Vec::Unit(2, 0), b = Vec::Unit(2, 1);
  CHECK(transition_similarity(a, a, BiOp::Pivot, BiOp::Pivot, 0.5) == doctest::Approx(1.0));
  CHECK(transition_similarity(a, b, BiOp::Pivot, BiOp::Pivot, 0.5) == doctest::Approx(0.5));
  CHECK(transition_similarity(a, a, BiOp::Pivot, BiOp::Trend, 0.5) == doctest::Approx(0.5));
  CHECK(transition_similarity(a, -a, BiOp::Pivot, BiOp::Trend, 0.5) == 0.0);
  CHECK(transition_similarity(a, a, BiOp::Pivot, BiOp::Trend, 0.2) == doctest::Approx(0.2));
  CHECK(transition_similarity(a, b, BiOp::Pivot, BiOp::Pivot, 0.2) == doctest::Approx(0.8));
}

TEST_CASE("the successor of the closest logged state is recommended") {
  const Ontology o = test::health_ontology();
  // t7 -> t8 is a roll-up on acute admits; t1 -> t2 is a roll-up on days of stay
  const Workload w = test::workload_of({
      {"a", {simple(BiOp::Analysis, "days_stay"), simple(BiOp::RollUp, "days_stay", "provider")}},
      {"b", {simple(BiOp::Analysis, "acute_admits", "region"), simple(BiOp::RollUp, "acute_admits", "admit_year")}},
  });
  std::vector<std::vector<Vec>> emb = {{Vec::Unit(3, 0), Vec::Unit(3, 1)}, {Vec::Unit(3, 2), Vec::Unit(3, 1)}};
  const TaskIndex idx = TaskIndex::build(o, w, emb);
  Vec cur(3);
  cur << 0.1, 0.0, 1.0;
  const auto recs = recommend_indexed(cur.normalized(), {{BiOp::RollUp, "utilization"}}, idx);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].pattern == w.sessions[1].states[1].pattern);
  CHECK(recs[0].provenance == "b#0");
  CHECK(recs[0].score == doctest::Approx(0.5 * cur.normalized()[2] + 0.5));
  CHECK(recs[0].intent == BiIntent{BiOp::RollUp, "utilization"});

  SUBCASE("a repeated pattern falls back to the next best transition") {
    const auto two = recommend_indexed(cur.normalized(), {{BiOp::RollUp, "utilization"}, {BiOp::RollUp, "utilization"}}, idx);
    REQUIRE(two.size() == 2);
    CHECK(two[1].pattern == w.sessions[0].states[1].pattern);
  }
  SUBCASE("intents with no posting are skipped") {
    CHECK(recommend_indexed(cur, {{BiOp::RollUp, "nowhere"}}, idx).empty());
  }
}

TEST_CASE("indexed and exhaustive recommenders agree with brute force") {
  const Ontology o = generate_synthetic_ontology(OntologyGenConfig::hi(), 4);
  auto cfg = WorkloadConfig::preset("bt-uniform");
  cfg.n_sessions = 60;
  const Workload w = generate_workload(o, cfg, 6);
  const auto emb = random_embeddings(w, 8, 2);
  const TaskIndex idx = TaskIndex::build(o, w, emb);
  const auto tasks = [&] {
    std::vector<std::set<NodeId>> t;
    for (const auto& s : w.sessions) t.push_back(session_task(o, s));
    return t;
  }();
  const auto queries = random_embeddings(w, 8, 3);
  int checked = 0;
  for (std::size_t q = 0; q < 20; ++q) {
    const Vec& cur = queries[q][0];
    for (const auto& mg : o.measure_groups()) {
      for (BiOp op : {BiOp::RollUp, BiOp::Comparison, BiOp::Trend}) {
        const auto oracle = brute_force(w, emb, cur, op, 0.5, [&](std::size_t s) { return tasks[s].contains(mg); });
        const auto recs = recommend_indexed(cur, {{op, mg}}, idx);
        CHECK(recs.empty() == !oracle.has_value());
        if (!oracle || recs.empty()) continue;
        CHECK(recs[0].provenance == oracle->session + "#" + std::to_string(oracle->position));
        CHECK(recs[0].score == doctest::Approx(oracle->score));
        ++checked;
      }
    }
    const auto full = brute_force(w, emb, cur, BiOp::Pivot, 0.5, [](std::size_t) { return true; });
    const auto ex = recommend_exhaustive({cur}, {{BiOp::Pivot, *o.measure_groups().begin()}}, idx, 0.5, w.sessions.size());
    REQUIRE(ex.size() == 1);
    CHECK(ex[0].provenance == full->session + "#" + std::to_string(full->position));
  }
  CHECK(checked > 100);
}

TEST_CASE("exhaustive session filter") {
  const Ontology o = test::health_ontology();
  const Workload w = test::workload_of({
      {"x", {simple(BiOp::Analysis, "copay"), simple(BiOp::Trend, "copay", "admit_year")}},
      {"y", {simple(BiOp::Analysis, "copay"), simple(BiOp::Trend, "copay", "admit_year")}},
      {"z", {simple(BiOp::Analysis, "copay"), simple(BiOp::Trend, "copay", "admit_year")}},
  });
  std::vector<std::vector<Vec>> emb = {{Vec::Unit(2, 0), Vec::Unit(2, 0)},
                                       {Vec::Unit(2, 1), Vec::Unit(2, 1)},
                                       {Vec::Unit(2, 0), Vec::Unit(2, 1)}};
  const TaskIndex idx = TaskIndex::build(o, w, emb);
  CHECK(filter_sessions_exhaustive(idx, {Vec::Unit(2, 1)}, 2) == std::vector<std::size_t>{1, 2});
  CHECK(filter_sessions_exhaustive(idx, {Vec::Unit(2, 0), Vec::Unit(2, 1)}, 1) == std::vector<std::size_t>{2});
  CHECK(filter_sessions_exhaustive(idx, {}, 3).empty());
}

TEST_CASE("non-negative factorization") {
  const Ontology o = test::health_ontology();
  const BiPattern A = simple(BiOp::Analysis, "acute_admits"), B = simple(BiOp::RollUp, "acute_admits", "region"),
                  C = simple(BiOp::Trend, "copay", "admit_year");
  const Workload w = test::workload_of({{"1", {A, B}}, {"2", {A, B}}, {"3", {C, A}}, {"4", {C}}});
  const FactorModel f = FactorModel::train(w, 2, 300, 5);
  const auto& trace = f.loss_trace();
  REQUIRE(trace.size() == 301);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-9);
  CHECK(trace.back() < trace.front());

  const auto recs = f.recommend({A}, 3);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].pattern == B);
  CHECK(recs[0].provenance.rfind("cell:", 0) == 0);

  const auto cold = f.recommend({simple(BiOp::Pivot, "er_visits")}, 3);
  REQUIRE(cold.size() == 3);
  CHECK(cold[0].pattern == A);  // most frequent pattern

  CHECK_THROWS_AS(FactorModel::train(w, 5, 10, 1), ConfigError);
  CHECK_THROWS_AS(FactorModel::train(w, 0, 10, 1), ConfigError);
}

TEST_CASE("co-occurrence refinement") {
  const Ontology o = generate_synthetic_ontology(OntologyGenConfig::hi(), 4);
  const Workload w = generate_workload(o, WorkloadConfig::preset("hiw"), 2);
  const CooccurrenceStats stats = CooccurrenceStats::build(w);
  std::map<std::pair<NodeId, NodeId>, std::uint64_t> oracle;
  for (const auto& s : w.sessions) {
    for (const auto& st : s.states) {
      for (const auto& m : st.pattern.measures) {
        for (const auto& d : st.pattern.dimensions) ++oracle[{m.id, d.id}];
      }
    }
  }
  CHECK(stats.counts() == oracle);
  CHECK(CooccurrenceStats::from_json(stats.to_json()) == stats);

  const BiPattern p = w.sessions[0].states[0].pattern;
  CHECK(refine(p, stats, 0) == p);
  CHECK_THROWS_AS(refine(p, stats, -1), ConfigError);
  const BiPattern r = refine(p, stats, 3);
  CHECK(r.dimensions.size() <= p.dimensions.size() + 3);
  CHECK(std::equal(p.dimensions.begin(), p.dimensions.end(), r.dimensions.begin()));
  std::uint64_t previous = UINT64_MAX;
  for (std::size_t i = p.dimensions.size(); i < r.dimensions.size(); ++i) {
    CHECK_FALSE(p.has_dimension(r.dimensions[i].id));
    CHECK(r.dimensions[i].role == DimRole::GroupBy);
    std::uint64_t total = 0;
    for (const auto& m : p.measures) total += stats.count(m.id, r.dimensions[i].id);
    CHECK(total > 0);
    CHECK(total <= previous);
    previous = total;
  }

  const Ontology h = test::health_ontology();
  const Workload small = test::workload_of({{"a", {simple(BiOp::Analysis, "copay", "drug"), simple(BiOp::Pivot, "copay", "drug"),
                                                   simple(BiOp::Pivot, "copay", "provider")}}});
  const CooccurrenceStats s2 = CooccurrenceStats::build(small);
  CHECK(s2.count("copay", "drug") == 2);
  CHECK(s2.count("copay", "region") == 0);
  const BiPattern bare = simple(BiOp::Analysis, "copay");
  CHECK(refine(bare, s2, 1).dimensions.size() == 1);
  CHECK(refine(bare, s2, 1).dimensions[0].id == "drug");
  CHECK(refine(bare, s2, 3).dimensions.size() == 2);
}
