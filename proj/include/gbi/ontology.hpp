#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>

namespace gbi {

using NodeId = std::string;

enum class EntityKind { Measure, Dimension, MeasureGroup, DimensionGroup };

std::string to_string(EntityKind kind);

/// BI ontology: measures, dimensions, their SME-provided groups, is-A edges from
/// measures/dimensions to their group, and functional (measure, dimension) edges.
///
/// Built incrementally through the add_* methods, each of which enforces the
/// invariants (disjoint id sets, single parent, typed edge endpoints). Treat as
/// immutable once constructed; every accessor is const and thread-safe.
class Ontology {
 public:
  void add_measure(const NodeId& id, std::string label);
  void add_dimension(const NodeId& id, std::string label, bool temporal = false);
  void add_measure_group(const NodeId& id, std::string label);
  void add_dimension_group(const NodeId& id, std::string label);

  /// measure -> MG or dimension -> DG. A child may have at most one parent.
  void add_isa(const NodeId& child, const NodeId& parent);
  void add_functional(const NodeId& measure, const NodeId& dimension);

  const std::set<NodeId>& measures() const noexcept { return measures_; }
  const std::set<NodeId>& dimensions() const noexcept { return dimensions_; }
  const std::set<NodeId>& measure_groups() const noexcept { return measure_groups_; }
  const std::set<NodeId>& dimension_groups() const noexcept { return dimension_groups_; }
  const std::set<NodeId>& temporal_dimensions() const noexcept { return temporal_; }
  const std::map<NodeId, NodeId>& isa_edges() const noexcept { return parent_; }
  const std::set<std::pair<NodeId, NodeId>>& functional_edges() const noexcept { return functional_; }

  bool contains(const NodeId& id) const { return labels_.contains(id); }
  bool is_measure(const NodeId& id) const { return measures_.contains(id); }
  bool is_dimension(const NodeId& id) const { return dimensions_.contains(id); }
  bool is_measure_group(const NodeId& id) const { return measure_groups_.contains(id); }
  bool is_dimension_group(const NodeId& id) const { return dimension_groups_.contains(id); }
  bool is_temporal(const NodeId& id) const { return temporal_.contains(id); }

  /// Throws NotFoundError for unknown ids.
  EntityKind kind(const NodeId& id) const;
  const std::string& label(const NodeId& id) const;

  /// Immediate is-A parent, if any.
  std::optional<NodeId> parent(const NodeId& id) const;

  /// Children of a measure or dimension group (empty for leaf groups).
  const std::set<NodeId>& children(const NodeId& group) const;

  /// Dimensions functionally connected to `measure`.
  const std::set<NodeId>& dimensions_of(const NodeId& measure) const;

  std::size_t entity_count() const noexcept { return labels_.size(); }

  bool operator==(const Ontology& other) const;

 private:
  void require_fresh(const NodeId& id) const;

  std::set<NodeId> measures_;
  std::set<NodeId> dimensions_;
  std::set<NodeId> measure_groups_;
  std::set<NodeId> dimension_groups_;
  std::set<NodeId> temporal_;
  std::map<NodeId, std::string> labels_;
  std::map<NodeId, NodeId> parent_;
  std::map<NodeId, std::set<NodeId>> children_;
  std::set<std::pair<NodeId, NodeId>> functional_;
  std::map<NodeId, std::set<NodeId>> measure_dims_;
};

/// Immediate MG of `measure`, or `measure` itself when it has no is-A parent.
NodeId parent_measure_group(const Ontology& ont, const NodeId& measure);

/// Measures sharing `measure`'s MG, excluding `measure`. Empty without an MG.
std::set<NodeId> sibling_measures(const Ontology& ont, const NodeId& measure);

/// Union of dimensions functionally connected to any of `measures`.
std::set<NodeId> connected_dimensions(const Ontology& ont, const std::set<NodeId>& measures);

struct OntologyGenConfig {
  int measures = 64;
  int dimensions = 229;
  int measure_groups = 12;
  int dimension_groups = 13;
  /// Fraction of measures that receive an MG parent. Below 1.0 some measures are
  /// left without a group, which exercises the degenerate session-task branch.
  double mg_coverage = 1.0;
  /// Every MG receives at least this many children.
  int min_measures_per_mg = 1;
  /// Functional edges per measure; one of them always targets a temporal dimension.
  int dimensions_per_measure = 8;

  /// 64 measures, 229 dimensions, 12 MGs, 13 DGs.
  static OntologyGenConfig hi();
  /// HI plus 265 measures and 48 MGs: 329 measures, 60 MGs.
  static OntologyGenConfig ahi();

  void validate() const;
};

/// Deterministic synthetic ontology. Ids are zero-padded ("m0001", "d0001",
/// "mg001", "dg001"); labels are "<kind>_<index>_<word>" with a seeded word.
/// The first dimension assigned to each DG is flagged temporal.
Ontology generate_synthetic_ontology(const OntologyGenConfig& cfg, std::uint64_t seed);

std::string ontology_to_json(const Ontology& ont);
Ontology ontology_from_json(const std::string& text);
void save_ontology(const Ontology& ont, const std::string& path);
Ontology load_ontology(const std::string& path);

}  // namespace gbi
