#include "gbi/stategraph.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <random>
#include <unordered_set>

#include "gbi/error.hpp"

namespace gbi {

std::string_view to_string(Enrichment level) {
  switch (level) {
    case Enrichment::BI: return "BI";
    case Enrichment::BI_MG_EM: return "BI+MG+EM";
    case Enrichment::BI_MG_EM_DG: return "BI+MG+EM+DG";
    case Enrichment::BI_MG_EM_DG_ED: return "BI+MG+EM+DG+ED";
  }
  return "BI";
}

Enrichment parse_enrichment(std::string_view text) {
  for (Enrichment e : kAllEnrichments) {
    if (to_string(e) == text) return e;
  }
  throw ParseError("enrichment", "unknown enrichment level '" + std::string(text) + "'");
}

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Root: return "ROOT";
    case NodeKind::Pattern: return "PATTERN";
    case NodeKind::Op: return "OP";
    case NodeKind::Measure: return "MEASURE";
    case NodeKind::Agg: return "AGG";
    case NodeKind::Dimension: return "DIMENSION";
    case NodeKind::Filter: return "FILTER";
    case NodeKind::MG: return "MG";
    case NodeKind::DG: return "DG";
    case NodeKind::EM: return "EM";
    case NodeKind::ED: return "ED";
  }
  return "ROOT";
}

std::string_view to_string(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::Structural: return "structural";
    case EdgeKind::IsA: return "isA";
    case EdgeKind::Functional: return "functional";
  }
  return "structural";
}

OntologyNeighborhood ontology_neighborhood(const Ontology& ont, const State& state, const std::set<NodeId>& task) {
  OntologyNeighborhood on;
  on.task = task;
  const std::set<NodeId> queried = state.pattern.measure_ids();
  for (const auto& m : queried) {
    if (!ont.is_measure(m)) throw NotFoundError("unknown measure: " + m);
    for (const auto& s : sibling_measures(ont, m)) {
      if (!queried.contains(s)) on.expanded_measures.insert(s);
    }
  }
  on.expanded_dimensions = connected_dimensions(ont, on.expanded_measures);
  return on;
}

std::size_t StateGraph::find(std::string_view key) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].key == key) return i;
  }
  return nodes.size();
}

int StateGraph::eccentricity_from_root() const {
  if (nodes.empty()) return 0;
  std::vector<std::vector<std::size_t>> adj(nodes.size());
  for (const auto& e : edges) {
    adj[e.src].push_back(e.dst);
    adj[e.dst].push_back(e.src);
  }
  std::vector<int> dist(nodes.size(), -1);
  std::deque<std::size_t> queue{0};
  dist[0] = 0;
  int far = 0;
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    far = std::max(far, dist[v]);
    for (std::size_t u : adj[v]) {
      if (dist[u] < 0) {
        dist[u] = dist[v] + 1;
        queue.push_back(u);
      }
    }
  }
  return far;
}

std::string StateGraph::to_dot() const {
  std::string out = "digraph state {\n";
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    out += "  n" + std::to_string(i) + " [label=\"" + nodes[i].label + "\\n" + std::string(to_string(nodes[i].kind)) +
           "\", key=\"" + nodes[i].key + "\"];\n";
  }
  for (const auto& e : edges) {
    out += "  n" + std::to_string(e.src) + " -> n" + std::to_string(e.dst) + " [kind=" + std::string(to_string(e.kind)) +
           "];\n";
  }
  return out + "}\n";
}

namespace {

class GraphBuilder {
 public:
  explicit GraphBuilder(Enrichment level) { g_.level = level; }

  std::size_t node(std::string key, NodeKind kind, std::string label) {
    if (std::size_t i = g_.find(key); i < g_.nodes.size()) return i;
    g_.nodes.push_back({std::move(key), kind, std::move(label)});
    return g_.nodes.size() - 1;
  }

  void edge(std::size_t src, std::size_t dst, EdgeKind kind) { g_.edges.push_back({src, dst, kind}); }

  StateGraph take() { return std::move(g_); }

 private:
  StateGraph g_;
};

std::string label_or_id(const Ontology& ont, const NodeId& id) { return ont.contains(id) ? ont.label(id) : id; }

}  // namespace

StateGraph build_state_graph(const Ontology& ont, const State& state, const OntologyNeighborhood& on,
                             Enrichment level) {
  GraphBuilder b(level);
  const BiPattern& p = state.pattern;
  const std::size_t root = b.node("root", NodeKind::Root, "root");
  const std::size_t pattern = b.node("pattern", NodeKind::Pattern, "pattern");
  b.edge(root, pattern, EdgeKind::Structural);
  b.edge(pattern, b.node("op", NodeKind::Op, std::string(to_string(p.op))), EdgeKind::Structural);

  std::vector<std::size_t> measure_nodes;
  for (const auto& m : p.measures) {
    const std::size_t mn = b.node("m:" + m.id, NodeKind::Measure, label_or_id(ont, m.id));
    measure_nodes.push_back(mn);
    b.edge(pattern, mn, EdgeKind::Structural);
    const std::string agg(to_string(m.agg));
    b.edge(b.node("agg:" + m.id + ":" + agg, NodeKind::Agg, agg), mn, EdgeKind::Structural);
  }
  std::vector<std::size_t> dim_nodes;
  for (const auto& d : p.dimensions) {
    const std::size_t dn = b.node("d:" + d.id, NodeKind::Dimension, label_or_id(ont, d.id));
    dim_nodes.push_back(dn);
    b.edge(pattern, dn, EdgeKind::Structural);
    if (d.role == DimRole::Filter) {
      const std::string value = d.value.value_or("");
      b.edge(b.node("f:" + d.id + ":" + value, NodeKind::Filter, "filter " + value), dn, EdgeKind::Structural);
    }
  }
  if (level == Enrichment::BI) return b.take();

  std::set<NodeId> groups = on.task;
  for (const auto& m : p.measures) groups.insert(parent_measure_group(ont, m.id));
  for (const auto& mg : groups) b.edge(root, b.node("mg:" + mg, NodeKind::MG, label_or_id(ont, mg)), EdgeKind::Structural);
  for (std::size_t i = 0; i < p.measures.size(); ++i) {
    b.edge(measure_nodes[i], b.node("mg:" + parent_measure_group(ont, p.measures[i].id), NodeKind::MG, ""),
           EdgeKind::IsA);
  }
  std::vector<std::pair<NodeId, std::size_t>> em_nodes;
  for (const auto& m : on.expanded_measures) {
    const std::size_t en = b.node("em:" + m, NodeKind::EM, label_or_id(ont, m));
    em_nodes.emplace_back(m, en);
    const NodeId mg = parent_measure_group(ont, m);
    b.edge(en, b.node("mg:" + mg, NodeKind::MG, label_or_id(ont, mg)), EdgeKind::IsA);
  }
  if (level == Enrichment::BI_MG_EM) return b.take();

  for (std::size_t i = 0; i < p.dimensions.size(); ++i) {
    if (auto dg = ont.parent(p.dimensions[i].id)) {
      b.edge(dim_nodes[i], b.node("dg:" + *dg, NodeKind::DG, ont.label(*dg)), EdgeKind::IsA);
    }
  }
  if (level == Enrichment::BI_MG_EM_DG) return b.take();

  for (const auto& [m, en] : em_nodes) {
    for (const auto& d : ont.dimensions_of(m)) {
      if (!on.expanded_dimensions.contains(d)) continue;
      b.edge(en, b.node("ed:" + d, NodeKind::ED, ont.label(d)), EdgeKind::Functional);
    }
  }
  return b.take();
}

namespace {

struct SimilarityKey {
  BiOp op;
  std::set<std::string> measures;
  std::set<std::string> dimensions;
  std::set<std::string> neighborhood;
};

SimilarityKey similarity_key(const AnnotatedState& s) {
  SimilarityKey k;
  k.op = s.state.pattern.op;
  for (const auto& m : s.state.pattern.measures) k.measures.insert(m.id + "\x1f" + std::string(to_string(m.agg)));
  for (const auto& d : s.state.pattern.dimensions) {
    std::string e = d.id + "\x1f" + std::string(to_string(d.role));
    if (d.value) e += "\x1f" + *d.value;
    k.dimensions.insert(std::move(e));
  }
  for (const auto& t : s.on.task) k.neighborhood.insert("t:" + t);
  for (const auto& m : s.on.expanded_measures) k.neighborhood.insert("m:" + m);
  for (const auto& d : s.on.expanded_dimensions) k.neighborhood.insert("d:" + d);
  return k;
}

double key_similarity(const SimilarityKey& a, const SimilarityKey& b, bool include_neighborhood) {
  const double op = a.op == b.op ? 1.0 : 0.0;
  const double on = include_neighborhood ? jaccard(a.neighborhood, b.neighborhood) : 1.0;
  return (op + jaccard(a.measures, b.measures) + jaccard(a.dimensions, b.dimensions) + on) / 4.0;
}

}  // namespace

double state_similarity(const AnnotatedState& a, const AnnotatedState& b, bool include_neighborhood) {
  return key_similarity(similarity_key(a), similarity_key(b), include_neighborhood);
}

std::vector<AnnotatedState> annotate_states(const Ontology& ont, const Workload& w, bool prefix_task) {
  std::vector<AnnotatedState> out;
  out.reserve(w.state_count());
  for (const auto& s : w.sessions) {
    const std::set<NodeId> full = session_task(ont, s);
    for (std::size_t i = 0; i < s.states.size(); ++i) {
      const std::set<NodeId> task = prefix_task ? session_task(ont, s, i + 1) : full;
      out.push_back({s.states[i], ontology_neighborhood(ont, s.states[i], task)});
    }
  }
  return out;
}

std::vector<StatePair> sample_pairs(const std::vector<AnnotatedState>& states, std::size_t n, std::uint64_t seed) {
  const std::size_t m = states.size();
  const std::uint64_t total = m < 2 ? 0 : static_cast<std::uint64_t>(m) * (m - 1) / 2;
  if (n > total) {
    throw ConfigError("requested " + std::to_string(n) + " pairs but only " + std::to_string(total) +
                      " distinct pairs exist");
  }
  std::vector<SimilarityKey> keys;
  keys.reserve(m);
  for (const auto& s : states) keys.push_back(similarity_key(s));
  auto make = [&](std::size_t i, std::size_t j) {
    const double sim = key_similarity(keys[i], keys[j], true);
    return StatePair{i, j, sim, sim > 0.5};
  };

  Rng rng(seed);
  const std::size_t want_pos = n / 2;
  const std::size_t want_neg = n - want_pos;
  std::vector<StatePair> pos, neg;
  constexpr std::uint64_t kEnumerateLimit = 4'000'000;
  if (total <= kEnumerateLimit) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        StatePair p = make(i, j);
        (p.matching ? pos : neg).push_back(p);
      }
    }
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);
    const std::size_t take_pos = std::min(pos.size(), std::max(want_pos, n - std::min(n, neg.size())));
    const std::size_t take_neg = n - take_pos;
    pos.resize(take_pos);
    neg.resize(take_neg);
  } else {
    // Rejection sampling over pair codes; enough draws are allowed that a class
    // too rare to fill its half is replaced by the other.
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    std::unordered_set<std::uint64_t> seen;
    const std::size_t max_draws = 200 * n + 1000;
    for (std::size_t draw = 0; draw < max_draws && (pos.size() < want_pos || neg.size() < want_neg); ++draw) {
      std::size_t i = pick(rng), j = pick(rng);
      if (i == j) continue;
      if (i > j) std::swap(i, j);
      if (!seen.insert(static_cast<std::uint64_t>(i) * m + j).second) continue;
      StatePair p = make(i, j);
      auto& bucket = p.matching ? pos : neg;
      if (bucket.size() < (p.matching ? want_pos : want_neg)) bucket.push_back(p);
    }
    while (pos.size() + neg.size() < n) {
      std::size_t i = pick(rng), j = pick(rng);
      if (i == j) continue;
      if (i > j) std::swap(i, j);
      if (!seen.insert(static_cast<std::uint64_t>(i) * m + j).second) continue;
      StatePair p = make(i, j);
      (p.matching ? pos : neg).push_back(p);
    }
  }
  std::vector<StatePair> out;
  out.reserve(n);
  out.insert(out.end(), pos.begin(), pos.end());
  out.insert(out.end(), neg.begin(), neg.end());
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace gbi
