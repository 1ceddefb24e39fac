#include "gbi/pattern.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "gbi/error.hpp"

namespace gbi {

std::string_view to_string(BiOp op) {
  switch (op) {
    case BiOp::Analysis: return "ANALYSIS";
    case BiOp::DrillDown: return "DRILL-DOWN";
    case BiOp::RollUp: return "ROLL-UP";
    case BiOp::Pivot: return "PIVOT";
    case BiOp::Trend: return "TREND";
    case BiOp::Ranking: return "RANKING";
    case BiOp::Comparison: return "COMPARISON";
  }
  return "ANALYSIS";
}

std::string_view to_string(Aggregation agg) {
  switch (agg) {
    case Aggregation::Count: return "COUNT";
    case Aggregation::Sum: return "SUM";
    case Aggregation::Avg: return "AVG";
    case Aggregation::Min: return "MIN";
    case Aggregation::Max: return "MAX";
  }
  return "SUM";
}

std::string_view to_string(DimRole role) { return role == DimRole::GroupBy ? "GROUP_BY" : "FILTER"; }

BiOp parse_op(std::string_view text) {
  for (BiOp op : kAllOps) {
    if (to_string(op) == text) return op;
  }
  throw ParseError("op", "unknown BI operation '" + std::string(text) + "'");
}

Aggregation parse_aggregation(std::string_view text) {
  for (Aggregation a : kAllAggregations) {
    if (to_string(a) == text) return a;
  }
  throw ParseError("agg", "unknown aggregation '" + std::string(text) + "'");
}

DimRole parse_role(std::string_view text) {
  if (text == "GROUP_BY") return DimRole::GroupBy;
  if (text == "FILTER") return DimRole::Filter;
  throw ParseError("role", "unknown dimension role '" + std::string(text) + "'");
}

bool BiPattern::has_dimension(const NodeId& id) const {
  return std::any_of(dimensions.begin(), dimensions.end(), [&](const DimensionRef& d) { return d.id == id; });
}

std::set<NodeId> BiPattern::measure_ids() const {
  std::set<NodeId> out;
  for (const auto& m : measures) out.insert(m.id);
  return out;
}

std::set<NodeId> BiPattern::dimension_ids() const {
  std::set<NodeId> out;
  for (const auto& d : dimensions) out.insert(d.id);
  return out;
}

void validate_pattern(const Ontology& ont, const BiPattern& p) {
  std::vector<std::string> offenders;
  if (p.measures.empty()) offenders.push_back("measures: must be non-empty");
  std::set<MeasureRef> seen_m;
  for (std::size_t i = 0; i < p.measures.size(); ++i) {
    const auto& m = p.measures[i];
    const std::string locus = "measures[" + std::to_string(i) + "]";
    if (!ont.is_measure(m.id)) offenders.push_back(locus + ".id: unknown measure '" + m.id + "'");
    if (!seen_m.insert(m).second) offenders.push_back(locus + ": duplicate entry");
  }
  std::set<DimensionRef> seen_d;
  for (std::size_t i = 0; i < p.dimensions.size(); ++i) {
    const auto& d = p.dimensions[i];
    const std::string locus = "dimensions[" + std::to_string(i) + "]";
    if (!ont.is_dimension(d.id)) offenders.push_back(locus + ".id: unknown dimension '" + d.id + "'");
    if (d.role == DimRole::Filter && !d.value) offenders.push_back(locus + ".value: FILTER requires a value");
    if (d.role == DimRole::GroupBy && d.value) offenders.push_back(locus + ".value: GROUP_BY takes no value");
    if (!seen_d.insert(d).second) offenders.push_back(locus + ": duplicate entry");
  }
  if (!offenders.empty()) throw ValidationError("invalid BI pattern", std::move(offenders));
}

std::string canonical_key(const BiPattern& p) {
  std::string key(to_string(p.op));
  key += '|';
  for (std::size_t i = 0; i < p.measures.size(); ++i) {
    const auto& m = p.measures[i];
    if (i) key += ',';
    key += m.id;
    key += ':';
    key += to_string(m.agg);
  }
  key += '|';
  for (std::size_t i = 0; i < p.dimensions.size(); ++i) {
    const auto& d = p.dimensions[i];
    if (i) key += ',';
    key += d.id;
    key += ':';
    key += to_string(d.role);
    if (d.value) {
      key += '=';
      key += *d.value;
    }
  }
  return key;
}

namespace {

std::string op_verb(BiOp op) {
  switch (op) {
    case BiOp::Analysis: return "Analyze";
    case BiOp::DrillDown: return "Drill down";
    case BiOp::RollUp: return "Roll up";
    case BiOp::Pivot: return "Pivot";
    case BiOp::Trend: return "Trend";
    case BiOp::Ranking: return "Rank";
    case BiOp::Comparison: return "Compare";
  }
  return "Analyze";
}

}  // namespace

std::string describe(const Ontology& ont, const BiPattern& p) {
  std::string out = op_verb(p.op) + " ";
  for (std::size_t i = 0; i < p.measures.size(); ++i) {
    if (i) out += p.op == BiOp::Comparison ? " vs " : ", ";
    out += ont.contains(p.measures[i].id) ? ont.label(p.measures[i].id) : p.measures[i].id;
    out += " (" + std::string(to_string(p.measures[i].agg)) + ")";
  }
  std::string by, where;
  for (const auto& d : p.dimensions) {
    const std::string name = ont.contains(d.id) ? ont.label(d.id) : d.id;
    if (d.role == DimRole::GroupBy) {
      by += (by.empty() ? "" : ", ") + name;
    } else {
      where += (where.empty() ? "" : " and ") + name + " = " + d.value.value_or("");
    }
  }
  if (!by.empty()) out += " by " + by;
  if (!where.empty()) out += " where " + where;
  return out;
}

}  // namespace gbi
