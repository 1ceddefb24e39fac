#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gbi/intent.hpp"
#include "gbi/pattern.hpp"

namespace gbi {

/// |A ∩ B| / |A ∪ B| over {op} ∪ (measure, agg) ∪ (dimension, role, value).
double pattern_jaccard(const BiPattern& expected, const BiPattern& predicted);

/// Best over the predicted list of 0.5 [op match] + 0.5 [MG match]; 0 when empty.
double intent_accuracy(const BiIntent& expected, const std::vector<BiIntent>& predicted);

/// One answered query of a feedback session.
struct FeedbackRecord {
  std::string query_id;
  std::vector<std::string> recommendation_ids;  // rank r at index r - 1
  std::map<int, int> votes;                     // rank -> votes, ranks in {1, 2, 3}

  std::set<int> selected() const;
  /// Rank with the most votes, ties to the lower rank; empty without votes.
  std::optional<int> most_voted() const;
};

using FeedbackLog = std::vector<FeedbackRecord>;

/// Fraction of queries where at least one recommendation was selected.
double precision_at_3(const FeedbackLog& log);
/// Mean over queries of 1 / rank of the most-voted recommendation; queries with
/// no votes contribute 0.
double mrr(const FeedbackLog& log);

nlohmann::json feedback_to_json(const FeedbackLog& log);
FeedbackLog feedback_from_json(const nlohmann::json& j);

}  // namespace gbi
