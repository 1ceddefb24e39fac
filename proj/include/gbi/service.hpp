#pragma once

#include <array>
#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "gbi/error.hpp"
#include "gbi/eval.hpp"
#include "gbi/recommender.hpp"
#include "gbi/stategraph.hpp"

namespace gbi {

/// Models are not loaded yet.
class UnavailableError : public Error {
 public:
  using Error::Error;
};

/// Everything the online loop reads; shared read-only across sessions.
struct ModelBundle {
  Ontology ontology;
  EmbedderModel embedder;
  IntentModel intent;
  TaskIndex index;
  CooccurrenceStats cooccurrence;
  Enrichment level = Enrichment::BI_MG_EM_DG_ED;
};

/// Index file written by build-index: {level, index, cooccurrence}.
nlohmann::json index_bundle_to_json(const TaskIndex& index, const CooccurrenceStats& stats, Enrichment level);
void index_bundle_from_json(const nlohmann::json& j, TaskIndex& index, CooccurrenceStats& stats, Enrichment& level);

ModelBundle load_bundle(const std::string& ontology_path, const std::string& embedder_path,
                        const std::string& intent_path, const std::string& index_path);

struct ServiceConfig {
  int k = 3;
  double w_s = 0.5;
  int n_inferred = 3;

  void validate() const;
};

struct RankedRecommendation {
  std::string id;  // "<session>-q<n>-r<rank>"
  int rank = 0;
  Recommendation rec;
};

struct QueryResponse {
  std::string session_id;
  std::string query_id;  // "<session>-q<n>"
  BiPattern echo;
  std::vector<RankedRecommendation> recommendations;
};

struct SessionView {
  std::string id;
  std::vector<BiPattern> states;
  std::vector<RankedRecommendation> pending;
  FeedbackLog feedback;
};

/// Running totals kept alongside the logs, for cross-checking the export.
struct FeedbackCounters {
  std::size_t answered = 0;
  std::size_t with_selection = 0;
  double reciprocal_rank_sum = 0.0;
  std::array<std::size_t, 3> votes_by_rank{};
};

nlohmann::json query_response_to_json(const QueryResponse& r);
nlohmann::json session_view_to_json(const SessionView& v);

/// In-memory session store over a shared model bundle. Requests on different
/// sessions run concurrently; requests on one session are serialized.
class RecommendationService {
 public:
  explicit RecommendationService(ServiceConfig cfg = {});

  void load(std::shared_ptr<const ModelBundle> models);
  bool ready() const;
  const ServiceConfig& config() const noexcept { return cfg_; }

  std::string create_session();
  /// Validates, appends the state and returns the refined top-k.
  QueryResponse submit_query(const std::string& session_id, const BiPattern& pattern);
  /// Ranks refer to the pending recommendations of the last query; the set may
  /// be empty ("none of these"). Clears the pending list.
  void submit_feedback(const std::string& session_id, const std::vector<int>& ranks);
  SessionView get_session(const std::string& session_id) const;

  nlohmann::json ontology_summary() const;
  /// Every answered query across sessions, ordered by session id.
  FeedbackLog export_feedback() const;
  FeedbackCounters counters() const;

 private:
  struct Live {
    mutable std::mutex mu;
    std::string id;
    std::vector<BiPattern> states;
    std::set<NodeId> task;
    std::vector<RankedRecommendation> pending;
    std::string pending_query;
    int queries = 0;
    FeedbackLog feedback;
  };

  std::shared_ptr<const ModelBundle> models() const;
  std::shared_ptr<Live> find(const std::string& id) const;

  ServiceConfig cfg_;
  mutable std::shared_mutex models_mu_;
  std::shared_ptr<const ModelBundle> models_;
  mutable std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Live>> sessions_;
  std::atomic<std::uint64_t> next_id_{1};
  mutable std::mutex counters_mu_;
  FeedbackCounters counters_;
};

}  // namespace gbi
