#include <doctest.h>

#include "gbi/error.hpp"
#include "gbi/ontology.hpp"
#include "gbi/random.hpp"
#include "support.hpp"

using namespace gbi;

TEST_CASE("acute admits sits under utilization") {
  const Ontology o = test::health_ontology();
  CHECK(parent_measure_group(o, "acute_admits") == "utilization");
  CHECK(o.label("utilization") == "Utilization");
  CHECK(sibling_measures(o, "acute_admits") == std::set<NodeId>{"er_visits", "days_stay"});
}

TEST_CASE("ontology construction enforces its invariants") {
  Ontology o = test::health_ontology();
  CHECK_THROWS_AS(o.add_measure("region", "dup"), ValidationError);
  CHECK_THROWS_AS(o.add_isa("acute_admits", "net_pay"), ValidationError);
  CHECK_THROWS_AS(o.add_isa("region", "utilization"), ValidationError);
  CHECK_THROWS_AS(o.add_functional("region", "acute_admits"), ValidationError);
  CHECK_THROWS_AS(o.add_functional("acute_admits", "nowhere"), NotFoundError);
  CHECK_THROWS_AS(o.label("nowhere"), NotFoundError);
  CHECK_THROWS_AS(parent_measure_group(o, "region"), NotFoundError);

  o.add_measure("orphan", "Orphan");
  CHECK(parent_measure_group(o, "orphan") == "orphan");
  CHECK(sibling_measures(o, "orphan").empty());
}

TEST_CASE("siblings and connected dimensions match brute-force scans") {
  const Ontology o = generate_synthetic_ontology(OntologyGenConfig::hi(), 11);
  for (const auto& m : o.measures()) {
    std::set<NodeId> siblings;
    const auto pm = o.parent(m);
    for (const auto& [child, parent] : o.isa_edges()) {
      if (pm && parent == *pm && child != m && o.is_measure(child)) siblings.insert(child);
    }
    CHECK(sibling_measures(o, m) == siblings);

    std::set<NodeId> dims;
    for (const auto& [mm, d] : o.functional_edges()) {
      if (mm == m) dims.insert(d);
    }
    CHECK(connected_dimensions(o, {m}) == dims);
  }
}

TEST_CASE("synthetic profiles have the published counts") {
  const Ontology hi = generate_synthetic_ontology(OntologyGenConfig::hi(), 7);
  CHECK(hi.measures().size() == 64);
  CHECK(hi.dimensions().size() == 229);
  CHECK(hi.measure_groups().size() == 12);
  CHECK(hi.dimension_groups().size() == 13);

  const Ontology ahi = generate_synthetic_ontology(OntologyGenConfig::ahi(), 7);
  CHECK(ahi.measures().size() == 329);
  CHECK(ahi.measure_groups().size() == 60);
}

TEST_CASE("synthetic ontology structure") {
  const Ontology o = generate_synthetic_ontology(OntologyGenConfig::hi(), 3);
  SUBCASE("every MG has a child and every measure one temporal dimension") {
    for (const auto& mg : o.measure_groups()) CHECK_FALSE(o.children(mg).empty());
    for (const auto& m : o.measures()) {
      const auto& dims = o.dimensions_of(m);
      CHECK(dims.size() == 8);
      CHECK(std::any_of(dims.begin(), dims.end(), [&](const NodeId& d) { return o.is_temporal(d); }));
    }
  }
  SUBCASE("deterministic in the seed") {
    CHECK(generate_synthetic_ontology(OntologyGenConfig::hi(), 3) == o);
    CHECK_FALSE(generate_synthetic_ontology(OntologyGenConfig::hi(), 4) == o);
  }
  SUBCASE("json round trip") {
    CHECK(ontology_from_json(ontology_to_json(o)) == o);
  }
}

TEST_CASE("generator config validation") {
  OntologyGenConfig c = OntologyGenConfig::hi();
  c.measure_groups = 100;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = OntologyGenConfig::hi();
  c.dimensions_per_measure = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("ontology json errors carry a locus") {
  CHECK_THROWS_AS(ontology_from_json("{not json"), ParseError);
  try {
    ontology_from_json(R"({"version": 1, "measures": [{"label": "x"}]})");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK_FALSE(e.locus().empty());
  }
}

TEST_CASE("stage seeds") {
  CHECK(derive_seed(7, "a") == derive_seed(7, "a"));
  CHECK(derive_seed(7, "a") != derive_seed(7, "b"));
  CHECK(derive_seed(7, "a", 0) != derive_seed(7, "a", 1));
  CHECK(derive_seed(7, "a") != derive_seed(8, "a"));
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("distribution specs") {
  CHECK_THROWS_AS(DistributionSpec::exponential(0.0).validate(), ConfigError);
  CHECK_THROWS_AS(DistributionSpec::gamma(-1.0, 1.0).validate(), ConfigError);
  CHECK_THROWS_AS(DistributionSpec::uniform(2.0, 1.0).validate(), ConfigError);
  CHECK_THROWS_AS(DistributionSpec::normal(0.0, -1.0).validate(), ConfigError);
  Rng rng(5);
  const auto e = DistributionSpec::exponential(0.5);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) sum += e.sample(rng);
  CHECK(sum / 20000 == doctest::Approx(0.5).epsilon(0.03));
}
