#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gbi/embedder.hpp"
#include "gbi/intent.hpp"

namespace gbi {

/// A logged session with everything the recommenders need precomputed.
struct IndexedSession {
  std::string id;
  std::vector<BiPattern> patterns;
  std::vector<std::string> keys;  // canonical_key of each pattern
  std::vector<Vec> embeddings;
  std::set<NodeId> task;
  Vec summary;  // mean of the state embeddings
};

/// Reference to the transition from state `position` to `position + 1`.
struct TransitionRef {
  std::size_t session = 0;
  std::size_t position = 0;
};

/// MG -> sessions whose task contains it, plus the session store.
class TaskIndex {
 public:
  /// `embeddings` has one row per session of `w` (see embed_workload).
  static TaskIndex build(const Ontology& ont, const Workload& w, const std::vector<std::vector<Vec>>& embeddings);

  /// Session indices posted under `mg`; empty for an unknown MG.
  std::span<const std::size_t> postings(const NodeId& mg) const;
  const std::vector<IndexedSession>& sessions() const noexcept { return sessions_; }
  std::size_t transition_count() const noexcept { return transitions_; }
  std::vector<NodeId> keys() const;

  nlohmann::json to_json() const;
  static TaskIndex from_json(const nlohmann::json& j);

 private:
  void finish();

  std::vector<IndexedSession> sessions_;
  std::unordered_map<NodeId, std::vector<std::size_t>> postings_;
  std::size_t transitions_ = 0;
};

struct Recommendation {
  BiPattern pattern;
  double score = 0.0;
  std::optional<BiIntent> intent;
  /// "<session>#<position>" for a transition, "cell:<column>" for the factorization.
  std::string provenance;
};

/// w_s * max(0, cos(cur, source)) + (1 - w_s) * [op == intent_op].
double transition_similarity(const Vec& cur, const Vec& source, BiOp op, BiOp intent_op, double w_s);

/// Highest-scoring transition over `sessions` for `intent_op`, skipping targets
/// whose canonical key is in `exclude`. Scores within 1e-12 are ties and go to
/// the lower (session id, position). Empty when there is no eligible transition.
std::optional<std::pair<TransitionRef, double>> best_transition(const TaskIndex& idx,
                                                                std::span<const std::size_t> sessions,
                                                                const Vec& cur, BiOp intent_op, double w_s,
                                                                const std::set<std::string>& exclude = {});

/// One recommendation per intent, in intent order, searching only the sessions
/// posted under the intent's MG. A pattern already recommended is replaced by
/// the next-best transition.
std::vector<Recommendation> recommend_indexed(const Vec& cur, const std::vector<BiIntent>& intents,
                                              const TaskIndex& idx, double w_s = 0.5);

/// Baseline session filter: the `top_n` sessions whose summary is most similar
/// to the mean of the prefix embeddings, ties to the lower session id.
std::vector<std::size_t> filter_sessions_exhaustive(const TaskIndex& idx, const std::vector<Vec>& prefix,
                                                    std::size_t top_n = 10);

/// Same transition argmax as recommend_indexed over the sessions returned by
/// filter_sessions_exhaustive, with no MG pruning. The last prefix embedding
/// is the current state.
std::vector<Recommendation> recommend_exhaustive(const std::vector<Vec>& prefix, const std::vector<BiIntent>& intents,
                                                 const TaskIndex& idx, double w_s = 0.5, std::size_t top_n = 10);

std::vector<Recommendation> recommend_from_sessions(const Vec& cur, const std::vector<BiIntent>& intents,
                                                    const TaskIndex& idx, std::span<const std::size_t> sessions,
                                                    double w_s);

/// Nonnegative factorization of the binary session x distinct-pattern matrix,
/// fit by multiplicative updates on the squared reconstruction error.
class FactorModel {
 public:
  static FactorModel train(const Workload& w, int rank, int iterations, std::uint64_t seed);

  /// k highest completed-score patterns not already in `session`. The query
  /// row is folded in against the fixed pattern factors; with no known
  /// pattern in the session the scores fall back to pattern frequency.
  std::vector<Recommendation> recommend(const std::vector<BiPattern>& session, int k, int fold_in_iterations = 100) const;

  /// Completed scores of the query row over all patterns.
  Vec complete(const std::vector<BiPattern>& session, int fold_in_iterations = 100) const;

  int rank() const noexcept { return static_cast<int>(h_.rows()); }
  const std::vector<BiPattern>& patterns() const noexcept { return patterns_; }
  /// Squared reconstruction error before the first and after every update.
  const std::vector<double>& loss_trace() const noexcept { return loss_trace_; }

 private:
  std::vector<BiPattern> patterns_;
  std::unordered_map<std::string, std::size_t> column_;
  Mat w_;  // sessions x rank
  Mat h_;  // rank x patterns
  Vec popularity_;
  std::vector<double> loss_trace_;
};

/// (measure, dimension) co-occurrence counts over all states of a workload.
class CooccurrenceStats {
 public:
  static CooccurrenceStats build(const Workload& w);

  std::uint64_t count(const NodeId& measure, const NodeId& dimension) const;
  const std::map<std::pair<NodeId, NodeId>, std::uint64_t>& counts() const noexcept { return counts_; }

  nlohmann::json to_json() const;
  static CooccurrenceStats from_json(const nlohmann::json& j);
  bool operator==(const CooccurrenceStats&) const = default;

 private:
  std::map<std::pair<NodeId, NodeId>, std::uint64_t> counts_;
  std::map<NodeId, std::vector<std::pair<NodeId, std::uint64_t>>> by_measure_;

  void reindex();
  friend BiPattern refine(const BiPattern&, const CooccurrenceStats&, int);
};

/// Appends up to `n_inferred` GROUP_BY dimensions ranked by co-occurrence count
/// summed over the pattern's measures (ties by dimension id), skipping ones
/// already present or never seen.
BiPattern refine(const BiPattern& p, const CooccurrenceStats& stats, int n_inferred);
Recommendation refine(const Recommendation& r, const CooccurrenceStats& stats, int n_inferred);

}  // namespace gbi
