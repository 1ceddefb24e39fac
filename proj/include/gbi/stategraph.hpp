#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gbi/ontology.hpp"
#include "gbi/workload.hpp"

namespace gbi {

enum class Enrichment { BI, BI_MG_EM, BI_MG_EM_DG, BI_MG_EM_DG_ED };

inline constexpr std::array<Enrichment, 4> kAllEnrichments = {Enrichment::BI, Enrichment::BI_MG_EM,
                                                              Enrichment::BI_MG_EM_DG, Enrichment::BI_MG_EM_DG_ED};

/// "BI", "BI+MG+EM", "BI+MG+EM+DG", "BI+MG+EM+DG+ED".
std::string_view to_string(Enrichment level);
Enrichment parse_enrichment(std::string_view text);

enum class NodeKind { Root, Pattern, Op, Measure, Agg, Dimension, Filter, MG, DG, EM, ED };
inline constexpr int kNodeKindCount = 11;
std::string_view to_string(NodeKind kind);

enum class EdgeKind { Structural, IsA, Functional };
std::string_view to_string(EdgeKind kind);

struct OntologyNeighborhood {
  std::set<NodeId> task;
  std::set<NodeId> expanded_measures;
  std::set<NodeId> expanded_dimensions;
  bool operator==(const OntologyNeighborhood&) const = default;
};

/// EM = siblings of the queried measures minus the queried measures;
/// ED = connected_dimensions(EM); `task` is passed through.
OntologyNeighborhood ontology_neighborhood(const Ontology& ont, const State& state, const std::set<NodeId>& task);

struct GraphNode {
  std::string key;
  NodeKind kind;
  std::string label;
};

struct GraphEdge {
  std::size_t src;
  std::size_t dst;
  EdgeKind kind;
};

struct StateGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  Enrichment level = Enrichment::BI;

  /// Index of the node with `key`, or nodes.size() when absent.
  std::size_t find(std::string_view key) const;
  /// Largest undirected BFS distance from the root (node 0).
  int eccentricity_from_root() const;
  std::string to_dot() const;
};

/// Node keys: "root", "pattern", "op", "m:<id>", "agg:<measure>:<AGG>", "d:<id>",
/// "f:<dimension>:<value>", "mg:<id>", "dg:<id>", "em:<id>", "ed:<id>".
StateGraph build_state_graph(const Ontology& ont, const State& state, const OntologyNeighborhood& on,
                             Enrichment level);

/// A state together with its ontology neighborhood, the unit both the graph
/// builder and the similarity function consume.
struct AnnotatedState {
  State state;
  OntologyNeighborhood on;
};

/// Average of four Jaccard terms: op, (measure, agg), (dimension, role, value)
/// and task ∪ EM ∪ ED. With `include_neighborhood` false the last term
/// compares two empty sets and contributes 1.
double state_similarity(const AnnotatedState& a, const AnnotatedState& b, bool include_neighborhood = true);

template <typename T>
double jaccard(const std::set<T>& a, const std::set<T>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

/// Every state of every session, with its neighborhood built from the full
/// session task (`prefix_task` false) or from the task of the session prefix
/// ending at that state.
std::vector<AnnotatedState> annotate_states(const Ontology& ont, const Workload& w, bool prefix_task = false);

struct StatePair {
  std::size_t a;
  std::size_t b;
  double similarity;
  bool matching;  // similarity > 0.5
};

/// Draws `n` distinct unordered pairs (i < j) of `states`. Aims for half
/// matching and half non-matching pairs; when one class is short the other
/// fills the remainder. Throws ConfigError when n exceeds the distinct pairs.
std::vector<StatePair> sample_pairs(const std::vector<AnnotatedState>& states, std::size_t n, std::uint64_t seed);

}  // namespace gbi
