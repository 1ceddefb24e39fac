#include <doctest.h>

#include <map>

#include "gbi/error.hpp"
#include "gbi/json_io.hpp"
#include "gbi/workload.hpp"
#include "support.hpp"

using namespace gbi;
using test::simple;

TEST_CASE("pattern validation names the offending field") {
  const Ontology o = test::health_ontology();
  CHECK_NOTHROW(validate_pattern(o, simple(BiOp::Analysis, "acute_admits", "region")));

  BiPattern bad = simple(BiOp::Analysis, "nope", "region");
  try {
    validate_pattern(o, bad);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    REQUIRE(e.offenders().size() == 1);
    CHECK(e.offenders()[0].find("measures[0]") != std::string::npos);
  }

  BiPattern empty;
  CHECK_THROWS_AS(validate_pattern(o, empty), ValidationError);

  BiPattern filter_without_value = simple(BiOp::Analysis, "acute_admits");
  filter_without_value.dimensions.push_back({"region", DimRole::Filter, std::nullopt});
  CHECK_THROWS_AS(validate_pattern(o, filter_without_value), ValidationError);

  BiPattern dup = simple(BiOp::Analysis, "acute_admits", "region");
  dup.dimensions.push_back(dup.dimensions[0]);
  CHECK_THROWS_AS(validate_pattern(o, dup), ValidationError);
}

TEST_CASE("pattern json and canonical key") {
  const BiPattern p = test::pattern(BiOp::DrillDown, {{"acute_admits", Aggregation::Avg}}, {{"region", ""}, {"admit_year", "2016"}});
  CHECK(pattern_from_json(pattern_to_json(p)) == p);
  CHECK(canonical_key(p) == "DRILL-DOWN|acute_admits:AVG|region:GROUP_BY,admit_year:FILTER=2016");
  CHECK_THROWS_AS(pattern_from_json(nlohmann::json{{"op", "JUMP"}, {"measures", nlohmann::json::array()}}), ParseError);
}

TEST_CASE("session task") {
  const Ontology o = test::health_ontology();
  SUBCASE("a session on acute admits has the utilization task") {
    const auto s = UserSession::from_patterns("s", {simple(BiOp::Analysis, "acute_admits"), simple(BiOp::RollUp, "acute_admits")});
    CHECK(session_task(o, s) == std::set<NodeId>{"utilization"});
  }
  SUBCASE("measure without a group is its own task") {
    Ontology o2 = test::health_ontology();
    o2.add_measure("orphan", "Orphan");
    const auto s = UserSession::from_patterns("s", {simple(BiOp::Analysis, "orphan")});
    CHECK(session_task(o2, s) == std::set<NodeId>{"orphan"});
  }
  SUBCASE("multi-measure session is the union of per-state tasks") {
    const auto s = UserSession::from_patterns(
        "s", {simple(BiOp::Analysis, "acute_admits"), test::pattern(BiOp::Comparison, {{"copay", Aggregation::Sum}, {"er_visits", Aggregation::Max}})});
    std::set<NodeId> oracle;
    for (const auto& st : s.states) {
      for (const auto& m : st.pattern.measures) oracle.insert(*o.parent(m.id));
    }
    CHECK(session_task(o, s) == oracle);
    CHECK(session_task(o, s, 1) == std::set<NodeId>{"utilization"});
  }
  SUBCASE("unknown measure") {
    const auto s = UserSession::from_patterns("s", {simple(BiOp::Analysis, "nope")});
    CHECK_THROWS_AS(session_task(o, s), NotFoundError);
  }
}

TEST_CASE("user session invariants") {
  auto s = UserSession::from_patterns("s", {simple(BiOp::Analysis, "acute_admits"), simple(BiOp::Pivot, "acute_admits")});
  CHECK(s.transitions == std::vector<BiOp>{BiOp::Pivot});
  CHECK_NOTHROW(s.check_invariants());
  s.transitions[0] = BiOp::Trend;
  CHECK_THROWS_AS(s.check_invariants(), ValidationError);
}

TEST_CASE("generated workloads") {
  const Ontology o = generate_synthetic_ontology(OntologyGenConfig::hi(), 7);

  SUBCASE("hiw-like fixture: 125 sessions of 5 to 8 states") {
    const Workload w = generate_workload(o, WorkloadConfig::preset("hiw"), 1);
    CHECK(w.sessions.size() == 125);
    std::set<std::string> ids;
    for (const auto& s : w.sessions) {
      CHECK(s.states.size() >= 5);
      CHECK(s.states.size() <= 8);
      CHECK(s.states.front().pattern.op == BiOp::Analysis);
      CHECK_NOTHROW(s.check_invariants());
      for (const auto& st : s.states) CHECK_NOTHROW(validate_pattern(o, st.pattern));
      ids.insert(s.id);
      const auto& assigned = w.provenance.assigned_tasks.at(s.id);
      for (const auto& t : session_task(o, s)) CHECK(assigned.contains(t));
    }
    CHECK(ids.size() == 125);
  }

  SUBCASE("deterministic in the seed") {
    const auto cfg = WorkloadConfig::preset("bt-gamma");
    CHECK(generate_workload(o, cfg, 4).sessions == generate_workload(o, cfg, 4).sessions);
    CHECK_FALSE(generate_workload(o, cfg, 4).sessions == generate_workload(o, cfg, 5).sessions);
  }

  SUBCASE("st-uniform allocates 10 or 11 sessions per task") {
    const Workload w = generate_workload(o, WorkloadConfig::preset("st-uniform"), 2);
    std::map<NodeId, int> per_task;
    for (const auto& [id, tasks] : w.provenance.assigned_tasks) {
      for (const auto& t : tasks) ++per_task[t];
    }
    CHECK(per_task.size() == 12);
    for (const auto& [t, n] : per_task) {
      CHECK(n >= 10);
      CHECK(n <= 11);
    }
  }

  SUBCASE("st profiles respect their bounds") {
    for (const char* name : {"st-exp", "st-gamma", "st-normal"}) {
      const auto cfg = WorkloadConfig::preset(name);
      const Workload w = generate_workload(o, cfg, 3);
      std::map<NodeId, int> per_task;
      for (const auto& [id, tasks] : w.provenance.assigned_tasks) {
        for (const auto& t : tasks) ++per_task[t];
      }
      for (const auto& [t, n] : per_task) {
        CHECK(n >= *cfg.tasks.min_per_task);
        CHECK(n <= *cfg.tasks.max_per_task);
      }
    }
  }

  SUBCASE("comparison states carry two measures, trend states a temporal dimension") {
    const Workload w = generate_workload(o, WorkloadConfig::preset("bt-uniform"), 9);
    int comparisons = 0, trends = 0;
    for (const auto& s : w.sessions) {
      for (const auto& st : s.states) {
        if (st.pattern.op == BiOp::Comparison) {
          ++comparisons;
          CHECK(st.pattern.measures.size() == 2);
        }
        if (st.pattern.op == BiOp::Trend) {
          ++trends;
          CHECK(std::any_of(st.pattern.dimensions.begin(), st.pattern.dimensions.end(),
                            [&](const DimensionRef& d) { return o.is_temporal(d.id); }));
        }
      }
    }
    CHECK(comparisons > 0);
    CHECK(trends > 0);
  }

  SUBCASE("infeasible allocation is a config error") {
    auto cfg = WorkloadConfig::preset("st-uniform");
    cfg.n_sessions = 20;
    CHECK_THROWS_AS(generate_workload(o, cfg, 1), ConfigError);
  }
}

TEST_CASE("transition matrix sampling") {
  Rng rng(3);
  const auto t = sample_transition_matrix(DistributionSpec::exponential(0.5), rng);
  for (const auto& row : t) {
    double sum = 0.0;
    for (double v : row) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0));
  }
  Rng a(3), b(3);
  CHECK(sample_transition_matrix(DistributionSpec::normal(0, 1), a) == sample_transition_matrix(DistributionSpec::normal(0, 1), b));
}

TEST_CASE("workload config validation") {
  WorkloadConfig c;
  c.min_session_length = 9;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = WorkloadConfig{};
  c.filter_probability = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = WorkloadConfig{};
  c.state_persistence = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(WorkloadConfig::preset("nope"), ConfigError);
  const auto hiw = WorkloadConfig::preset("hiw");
  CHECK(workload_config_from_json(workload_config_to_json(hiw)) == hiw);
}

TEST_CASE("session folds") {
  const Ontology o = generate_synthetic_ontology(OntologyGenConfig::hi(), 7);
  const Workload w = generate_workload(o, WorkloadConfig::preset("hiw"), 1);
  const auto folds = split_folds(w, 5, 11);
  REQUIRE(folds.size() == 5);
  std::multiset<std::string> tested;
  for (const auto& f : folds) {
    CHECK(f.test.sessions.size() == 25);
    CHECK(f.train.sessions.size() == 100);
    std::set<std::string> train_ids;
    for (const auto& s : f.train.sessions) train_ids.insert(s.id);
    for (const auto& s : f.test.sessions) {
      CHECK_FALSE(train_ids.contains(s.id));
      tested.insert(s.id);
    }
  }
  CHECK(tested.size() == 125);
  CHECK(std::set<std::string>(tested.begin(), tested.end()).size() == 125);
  const auto again = split_folds(w, 5, 11);
  for (std::size_t i = 0; i < 5; ++i) CHECK(again[i].test.sessions == folds[i].test.sessions);
  CHECK_THROWS_AS(split_folds(w, 1, 0), ConfigError);
  CHECK_THROWS_AS(split_folds(w, 126, 0), ConfigError);
}

TEST_CASE("conversational log round trip") {
  const Ontology o = generate_synthetic_ontology(OntologyGenConfig::hi(), 7);
  auto cfg = WorkloadConfig::preset("hiw");
  cfg.n_sessions = 100;
  const Workload w = generate_workload(o, cfg, 5);
  const Workload back = log_from_jsonl(log_to_jsonl(w, o), o);
  CHECK(back.sessions == w.sessions);
  for (std::size_t i = 0; i < w.sessions.size(); ++i) CHECK(session_task(o, back.sessions[i]) == session_task(o, w.sessions[i]));

  SUBCASE("unknown measure is listed as an offender") {
    std::string text = log_to_jsonl(w, o);
    const std::string id = w.sessions[0].states[0].pattern.measures[0].id;
    text.replace(text.find("\"" + id + "\""), id.size() + 2, "\"m9999\"");
    try {
      log_from_jsonl(text, o);
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK_FALSE(e.offenders().empty());
    }
  }
  SUBCASE("malformed line reports its number") {
    try {
      log_from_jsonl(log_to_jsonl(w, o) + "{oops\n", o);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.locus() == "line 101");
    }
  }
}
