#pragma once

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gbi/ontology.hpp"

namespace gbi {

enum class BiOp { Analysis, DrillDown, RollUp, Pivot, Trend, Ranking, Comparison };

inline constexpr std::array<BiOp, 7> kAllOps = {BiOp::Analysis, BiOp::DrillDown, BiOp::RollUp, BiOp::Pivot,
                                                BiOp::Trend,    BiOp::Ranking,   BiOp::Comparison};

enum class Aggregation { Count, Sum, Avg, Min, Max };

inline constexpr std::array<Aggregation, 5> kAllAggregations = {Aggregation::Count, Aggregation::Sum,
                                                                Aggregation::Avg, Aggregation::Min,
                                                                Aggregation::Max};

enum class DimRole { GroupBy, Filter };

/// "ANALYSIS", "DRILL-DOWN", ... as used on the wire.
std::string_view to_string(BiOp op);
std::string_view to_string(Aggregation agg);
std::string_view to_string(DimRole role);
BiOp parse_op(std::string_view text);
Aggregation parse_aggregation(std::string_view text);
DimRole parse_role(std::string_view text);

struct MeasureRef {
  NodeId id;
  Aggregation agg = Aggregation::Sum;
  auto operator<=>(const MeasureRef&) const = default;
};

struct DimensionRef {
  NodeId id;
  DimRole role = DimRole::GroupBy;
  std::optional<std::string> value;  // present iff role == Filter
  auto operator<=>(const DimensionRef&) const = default;
};

/// One analysis query: operation, measures with aggregations, dimensions with
/// GROUP_BY / FILTER roles. Measures and dimensions are ordered sets: order is
/// preserved, duplicates are invalid.
struct BiPattern {
  BiOp op = BiOp::Analysis;
  std::vector<MeasureRef> measures;
  std::vector<DimensionRef> dimensions;

  bool operator==(const BiPattern&) const = default;

  bool has_dimension(const NodeId& id) const;
  std::set<NodeId> measure_ids() const;
  std::set<NodeId> dimension_ids() const;
};

/// Throws ValidationError; offenders carry the field locus ("measures[0].id").
void validate_pattern(const Ontology& ont, const BiPattern& p);

/// Canonical single-line text form, used as a map key and for deduplication.
std::string canonical_key(const BiPattern& p);

/// "Drill down admits (SUM) by region where year = 2016".
std::string describe(const Ontology& ont, const BiPattern& p);

}  // namespace gbi
