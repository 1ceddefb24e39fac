#include <doctest.h>

#include "gbi/error.hpp"
#include "gbi/intent.hpp"
#include "support.hpp"

using namespace gbi;
using test::simple;

namespace {

std::vector<std::vector<Vec>> fake_embeddings(const Workload& w, int dim) {
  std::vector<std::vector<Vec>> out;
  int counter = 0;
  for (const auto& s : w.sessions) {
    out.emplace_back();
    for (std::size_t i = 0; i < s.states.size(); ++i) out.back().push_back(Vec::Constant(dim, ++counter));
  }
  return out;
}

}  // namespace

TEST_CASE("transition labels") {
  const Ontology o = test::health_ontology();
  CHECK(transition_intents(o, simple(BiOp::RollUp, "acute_admits")) == std::vector<BiIntent>{{BiOp::RollUp, "utilization"}});
  const auto two = test::pattern(BiOp::Comparison, {{"copay", Aggregation::Sum}, {"er_visits", Aggregation::Sum}});
  CHECK(transition_intents(o, two) ==
        std::vector<BiIntent>{{BiOp::Comparison, "net_pay"}, {BiOp::Comparison, "utilization"}});
  const auto same = test::pattern(BiOp::Comparison, {{"acute_admits", Aggregation::Sum}, {"er_visits", Aggregation::Sum}});
  CHECK(transition_intents(o, same).size() == 1);
}

TEST_CASE("example table") {
  const Ontology o = test::health_ontology();
  const auto two = test::pattern(BiOp::Comparison, {{"copay", Aggregation::Sum}, {"er_visits", Aggregation::Sum}});
  const Workload w = test::workload_of({
      {"a", {simple(BiOp::Analysis, "acute_admits"), simple(BiOp::RollUp, "acute_admits"), two}},
      {"b", {simple(BiOp::Analysis, "copay")}},
      {"c", {simple(BiOp::Analysis, "copay"), simple(BiOp::Trend, "copay", "admit_year")}},
  });
  const auto emb = fake_embeddings(w, 2);
  const auto ex = build_intent_examples(o, w, emb);
  // (3 - 1) + 1 extra MG in the comparison, 0 for the single-state session, 1 for c
  REQUIRE(ex.size() == 4);
  CHECK(ex[0].intent == BiIntent{BiOp::RollUp, "utilization"});
  CHECK(ex[0].embedding == emb[0][0]);
  CHECK(ex[1].embedding == emb[0][1]);
  CHECK(ex[2].embedding == emb[0][1]);
  CHECK(ex[3].intent == BiIntent{BiOp::Trend, "net_pay"});
  CHECK(ex[3].embedding == emb[2][0]);

  auto bad = emb;
  bad.pop_back();
  CHECK_THROWS_AS(build_intent_examples(o, w, bad), ModelError);
}

TEST_CASE("a roll-up on utilization is predicted after an acute admits analysis") {
  const Ontology o = test::health_ontology();
  std::vector<IntentExample> ex;
  const Vec admits = Vec::Unit(3, 0), copay = Vec::Unit(3, 1), er = Vec::Unit(3, 2);
  for (int i = 0; i < 20; ++i) {
    const double jitter = 0.01 * i;
    ex.push_back({admits + Vec::Constant(3, jitter), {BiOp::RollUp, "utilization"}});
    ex.push_back({copay + Vec::Constant(3, jitter), {BiOp::Trend, "net_pay"}});
    ex.push_back({er + Vec::Constant(3, jitter), {BiOp::DrillDown, "utilization"}});
  }
  RFConfig cfg;
  cfg.seed = 4;
  const IntentModel m = IntentModel::train(ex, cfg);
  CHECK(m.classes().size() == 3);
  const auto top = m.predict_topk(admits, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0].intent == BiIntent{BiOp::RollUp, "utilization"});
  double sum = 0.0;
  for (const auto& s : top) sum += s.probability;
  CHECK(sum == doctest::Approx(1.0));
  CHECK(top[0].probability >= top[1].probability);
  CHECK(top[1].probability >= top[2].probability);
  CHECK(m.probabilities(er).sum() == doctest::Approx(1.0));

  CHECK(m.predict_topk(admits, 10).size() == 3);
  CHECK_THROWS_AS(m.predict_topk(admits, 0), ConfigError);

  const IntentModel back = IntentModel::from_json(m.to_json());
  CHECK(back == m);
  CHECK(back.predict_topk(copay, 1)[0].intent == m.predict_topk(copay, 1)[0].intent);
}

TEST_CASE("single-class training is degenerate but usable") {
  std::vector<IntentExample> ex = {{Vec::Zero(2), {BiOp::Pivot, "x"}}, {Vec::Ones(2), {BiOp::Pivot, "x"}}};
  const IntentModel m = IntentModel::train(ex, {});
  CHECK(m.degenerate());
  const auto top = m.predict_topk(Vec::Ones(2), 3);
  REQUIRE(top.size() == 1);
  CHECK(top[0].probability == doctest::Approx(1.0));
  CHECK_THROWS_AS(IntentModel::train({}, {}), ConfigError);
}
