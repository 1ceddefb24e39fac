#include "gbi/eval.hpp"

#include <algorithm>

#include "gbi/error.hpp"
#include "gbi/stategraph.hpp"

namespace gbi {

using nlohmann::json;

namespace {

std::set<std::string> pattern_elements(const BiPattern& p) {
  std::set<std::string> out;
  out.insert("op\x1f" + std::string(to_string(p.op)));
  for (const auto& m : p.measures) out.insert("m\x1f" + m.id + "\x1f" + std::string(to_string(m.agg)));
  for (const auto& d : p.dimensions) {
    std::string e = "d\x1f" + d.id + "\x1f" + std::string(to_string(d.role));
    if (d.value) e += "\x1f" + *d.value;
    out.insert(std::move(e));
  }
  return out;
}

}  // namespace

double pattern_jaccard(const BiPattern& expected, const BiPattern& predicted) {
  return jaccard(pattern_elements(expected), pattern_elements(predicted));
}

double intent_accuracy(const BiIntent& expected, const std::vector<BiIntent>& predicted) {
  double best = 0.0;
  for (const auto& p : predicted) {
    best = std::max(best, 0.5 * (p.op == expected.op) + 0.5 * (p.mg == expected.mg));
  }
  return best;
}

std::set<int> FeedbackRecord::selected() const {
  std::set<int> out;
  for (const auto& [rank, n] : votes) {
    if (n > 0) out.insert(rank);
  }
  return out;
}

std::optional<int> FeedbackRecord::most_voted() const {
  std::optional<int> best;
  int best_votes = 0;
  for (const auto& [rank, n] : votes) {
    if (n > best_votes) {
      best = rank;
      best_votes = n;
    }
  }
  return best;
}

double precision_at_3(const FeedbackLog& log) {
  if (log.empty()) throw ConfigError("precision@3 of an empty feedback log");
  const auto hits = std::count_if(log.begin(), log.end(), [](const FeedbackRecord& r) { return !r.selected().empty(); });
  return static_cast<double>(hits) / static_cast<double>(log.size());
}

double mrr(const FeedbackLog& log) {
  if (log.empty()) throw ConfigError("MRR of an empty feedback log");
  double total = 0.0;
  for (const auto& r : log) {
    if (auto rank = r.most_voted()) total += 1.0 / *rank;
  }
  return total / static_cast<double>(log.size());
}

json feedback_to_json(const FeedbackLog& log) {
  json out = json::array();
  for (const auto& r : log) {
    json votes = json::object();
    for (const auto& [rank, n] : r.votes) votes[std::to_string(rank)] = n;
    out.push_back({{"query_id", r.query_id}, {"recommendations", r.recommendation_ids}, {"votes", std::move(votes)}});
  }
  return out;
}

FeedbackLog feedback_from_json(const json& j) {
  FeedbackLog log;
  if (!j.is_array()) throw ParseError("feedback", "expected an array");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string locus = "feedback[" + std::to_string(i) + "]";
    FeedbackRecord r;
    try {
      r.query_id = j[i].value("query_id", std::string());
      r.recommendation_ids = j[i].value("recommendations", std::vector<std::string>{});
      for (const auto& [rank, n] : j[i].at("votes").items()) {
        const int k = std::stoi(rank);
        if (k < 1 || k > 3) throw ParseError(locus + ".votes", "rank out of range: " + rank);
        r.votes[k] = n.get<int>();
      }
    } catch (const json::exception& e) {
      throw ParseError(locus, e.what());
    } catch (const std::invalid_argument&) {
      throw ParseError(locus + ".votes", "non-numeric rank");
    }
    log.push_back(std::move(r));
  }
  return log;
}

}  // namespace gbi
