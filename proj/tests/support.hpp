#pragma once

#include <initializer_list>
#include <string>
#include <vector>

#include "gbi/ontology.hpp"
#include "gbi/pattern.hpp"
#include "gbi/workload.hpp"

namespace gbi::test {

// Small healthcare ontology:
//   Utilization  = {acute_admits, er_visits, days_stay}
//   Net Payment  = {net_payment, copay}
//   Time = {admit_year*}, Geography = {region, state}, Clinical = {drug, provider}
inline Ontology health_ontology() {
  Ontology o;
  o.add_measure_group("utilization", "Utilization");
  o.add_measure_group("net_pay", "Net Payment");
  for (auto [id, label] : {std::pair{"acute_admits", "Acute Admits"}, {"er_visits", "ER Visits"}, {"days_stay", "Days of Stay"}}) {
    o.add_measure(id, label);
    o.add_isa(id, "utilization");
  }
  for (auto [id, label] : {std::pair{"net_payment", "Net Payment Amount"}, {"copay", "Copay"}}) {
    o.add_measure(id, label);
    o.add_isa(id, "net_pay");
  }
  o.add_dimension_group("time", "Time");
  o.add_dimension_group("geo", "Geography");
  o.add_dimension_group("clinical", "Clinical");
  o.add_dimension("admit_year", "Admit Year", true);
  o.add_isa("admit_year", "time");
  for (auto [id, label, dg] : {std::tuple{"region", "Region", "geo"}, {"state", "State", "geo"},
                                {"drug", "Drug", "clinical"}, {"provider", "Provider", "clinical"}}) {
    o.add_dimension(id, label);
    o.add_isa(id, dg);
  }
  for (auto [m, d] : {std::pair{"acute_admits", "admit_year"}, {"acute_admits", "region"}, {"acute_admits", "provider"},
                      {"er_visits", "admit_year"}, {"er_visits", "region"}, {"er_visits", "state"},
                      {"days_stay", "admit_year"}, {"days_stay", "provider"},
                      {"net_payment", "admit_year"}, {"net_payment", "drug"},
                      {"copay", "drug"}, {"copay", "provider"}}) {
    o.add_functional(m, d);
  }
  return o;
}

struct Dim {
  std::string id;
  std::string value;  // empty = GROUP_BY
};

inline BiPattern pattern(BiOp op, std::vector<std::pair<std::string, Aggregation>> measures, std::vector<Dim> dims = {}) {
  BiPattern p;
  p.op = op;
  for (auto& [id, agg] : measures) p.measures.push_back({id, agg});
  for (auto& d : dims) {
    if (d.value.empty()) {
      p.dimensions.push_back({d.id, DimRole::GroupBy, std::nullopt});
    } else {
      p.dimensions.push_back({d.id, DimRole::Filter, d.value});
    }
  }
  return p;
}

inline BiPattern simple(BiOp op, const std::string& m, const std::string& d = "") {
  return d.empty() ? pattern(op, {{m, Aggregation::Sum}}) : pattern(op, {{m, Aggregation::Sum}}, {{d, ""}});
}

inline Workload workload_of(std::vector<std::pair<std::string, std::vector<BiPattern>>> sessions) {
  Workload w;
  for (auto& [id, ps] : sessions) w.sessions.push_back(UserSession::from_patterns(id, std::move(ps)));
  return w;
}

}  // namespace gbi::test
