#include "gbi/recommender.hpp"

#include <algorithm>
#include <numeric>

#include <spdlog/spdlog.h>

#include "gbi/error.hpp"
#include "gbi/json_io.hpp"

namespace gbi {

using nlohmann::json;

void TaskIndex::finish() {
  postings_.clear();
  transitions_ = 0;
  for (std::size_t s = 0; s < sessions_.size(); ++s) {
    auto& sess = sessions_[s];
    sess.keys.clear();
    for (const auto& p : sess.patterns) sess.keys.push_back(canonical_key(p));
    const Eigen::Index d = sess.embeddings.empty() ? 0 : sess.embeddings.front().size();
    sess.summary = Vec::Zero(d);
    for (const auto& e : sess.embeddings) sess.summary += e;
    if (!sess.embeddings.empty()) sess.summary /= static_cast<double>(sess.embeddings.size());
    for (const auto& mg : sess.task) postings_[mg].push_back(s);
    if (sess.patterns.size() > 1) transitions_ += sess.patterns.size() - 1;
  }
}

TaskIndex TaskIndex::build(const Ontology& ont, const Workload& w, const std::vector<std::vector<Vec>>& embeddings) {
  if (embeddings.size() != w.sessions.size()) throw ModelError("embedding table does not match session count");
  TaskIndex idx;
  for (std::size_t s = 0; s < w.sessions.size(); ++s) {
    const auto& sess = w.sessions[s];
    if (embeddings[s].size() != sess.states.size()) throw ModelError("embedding row does not match state count");
    IndexedSession is;
    is.id = sess.id;
    for (const auto& st : sess.states) is.patterns.push_back(st.pattern);
    is.embeddings = embeddings[s];
    is.task = session_task(ont, sess);
    idx.sessions_.push_back(std::move(is));
  }
  idx.finish();
  return idx;
}

std::span<const std::size_t> TaskIndex::postings(const NodeId& mg) const {
  auto it = postings_.find(mg);
  if (it == postings_.end()) return {};
  return it->second;
}

std::vector<NodeId> TaskIndex::keys() const {
  std::vector<NodeId> out;
  for (const auto& [k, _] : postings_) out.push_back(k);
  std::sort(out.begin(), out.end());
  return out;
}

json TaskIndex::to_json() const {
  json sessions = json::array();
  for (const auto& s : sessions_) {
    json patterns = json::array();
    for (const auto& p : s.patterns) patterns.push_back(pattern_to_json(p));
    json embs = json::array();
    for (const auto& e : s.embeddings) embs.push_back(std::vector<double>(e.data(), e.data() + e.size()));
    sessions.push_back({{"id", s.id}, {"task", s.task}, {"patterns", std::move(patterns)}, {"embeddings", std::move(embs)}});
  }
  json postings = json::object();
  for (const auto& k : keys()) {
    json ids = json::array();
    for (std::size_t s : postings_.at(k)) ids.push_back(sessions_[s].id);
    postings[k] = std::move(ids);
  }
  return {{"version", 1}, {"sessions", std::move(sessions)}, {"postings", std::move(postings)}};
}

TaskIndex TaskIndex::from_json(const json& j) {
  TaskIndex idx;
  try {
    if (j.at("version").get<int>() != 1) throw ParseError("version", "unsupported index version");
    const json& sessions = j.at("sessions");
    for (std::size_t i = 0; i < sessions.size(); ++i) {
      const json& sj = sessions[i];
      const std::string locus = "sessions[" + std::to_string(i) + "]";
      IndexedSession s;
      s.id = sj.at("id").get<std::string>();
      s.task = sj.at("task").get<std::set<NodeId>>();
      for (std::size_t p = 0; p < sj.at("patterns").size(); ++p) {
        s.patterns.push_back(pattern_from_json(sj["patterns"][p], locus + ".patterns[" + std::to_string(p) + "]"));
      }
      for (const auto& ej : sj.at("embeddings")) {
        const auto v = ej.get<std::vector<double>>();
        s.embeddings.push_back(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
      }
      if (s.embeddings.size() != s.patterns.size()) throw ParseError(locus, "embedding count != pattern count");
      idx.sessions_.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ParseError("index", e.what());
  }
  idx.finish();
  return idx;
}

double transition_similarity(const Vec& cur, const Vec& source, BiOp op, BiOp intent_op, double w_s) {
  return w_s * std::max(0.0, cosine(cur, source)) + (1.0 - w_s) * (op == intent_op ? 1.0 : 0.0);
}

namespace {

/// cosine() for vectors known to be unit or zero length, the form every state
/// embedding takes.
inline double unit_cosine(const Vec& a, const Vec& b) { return a.dot(b); }

// Rounding differences between equivalent cosine formulas stay far below this.
constexpr double kScoreTie = 1e-12;

bool precedes(const TaskIndex& idx, const TransitionRef& a, const TransitionRef& b) {
  const auto& ia = idx.sessions()[a.session].id;
  const auto& ib = idx.sessions()[b.session].id;
  if (ia != ib) return ia < ib;
  return a.position < b.position;
}

}  // namespace

std::optional<std::pair<TransitionRef, double>> best_transition(const TaskIndex& idx,
                                                                std::span<const std::size_t> sessions,
                                                                const Vec& cur, BiOp intent_op, double w_s,
                                                                const std::set<std::string>& exclude) {
  const double cur_norm = cur.norm();
  const bool unit = std::abs(cur_norm - 1.0) < 1e-9;
  std::optional<std::pair<TransitionRef, double>> best;
  for (std::size_t s : sessions) {
    const auto& sess = idx.sessions()[s];
    for (std::size_t i = 0; i + 1 < sess.patterns.size(); ++i) {
      const double c = unit ? unit_cosine(cur, sess.embeddings[i]) : cosine(cur, sess.embeddings[i]);
      const double score = w_s * std::max(0.0, c) + (1.0 - w_s) * (sess.patterns[i + 1].op == intent_op ? 1.0 : 0.0);
      const TransitionRef ref{s, i};
      if (best && (score < best->second - kScoreTie ||
                   (score <= best->second + kScoreTie && !precedes(idx, ref, best->first)))) {
        continue;
      }
      if (!exclude.empty() && exclude.contains(sess.keys[i + 1])) continue;
      best = std::make_pair(ref, score);
    }
  }
  return best;
}

std::vector<Recommendation> recommend_from_sessions(const Vec& cur, const std::vector<BiIntent>& intents,
                                                    const TaskIndex& idx, std::span<const std::size_t> sessions,
                                                    double w_s) {
  std::vector<Recommendation> out;
  std::set<std::string> used;
  for (const auto& intent : intents) {
    auto best = best_transition(idx, sessions, cur, intent.op, w_s, used);
    if (!best) continue;
    const auto& sess = idx.sessions()[best->first.session];
    const std::size_t target = best->first.position + 1;
    used.insert(sess.keys[target]);
    out.push_back({sess.patterns[target], best->second, intent, sess.id + "#" + std::to_string(best->first.position)});
  }
  return out;
}

std::vector<Recommendation> recommend_indexed(const Vec& cur, const std::vector<BiIntent>& intents,
                                              const TaskIndex& idx, double w_s) {
  std::vector<Recommendation> out;
  std::set<std::string> used;
  for (const auto& intent : intents) {
    const auto posting = idx.postings(intent.mg);
    if (posting.empty()) {
      spdlog::debug("no sessions posted under {}; intent skipped", intent.mg);
      continue;
    }
    auto best = best_transition(idx, posting, cur, intent.op, w_s, used);
    if (!best) continue;
    const auto& sess = idx.sessions()[best->first.session];
    const std::size_t target = best->first.position + 1;
    used.insert(sess.keys[target]);
    out.push_back({sess.patterns[target], best->second, intent, sess.id + "#" + std::to_string(best->first.position)});
  }
  return out;
}

std::vector<std::size_t> filter_sessions_exhaustive(const TaskIndex& idx, const std::vector<Vec>& prefix,
                                                    std::size_t top_n) {
  const auto& sessions = idx.sessions();
  if (prefix.empty() || sessions.empty()) return {};
  Vec query = Vec::Zero(prefix.front().size());
  for (const auto& e : prefix) query += e;
  query /= static_cast<double>(prefix.size());
  const double qn = query.norm();
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(sessions.size());
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    const double sn = sessions[s].summary.norm();
    const double c = qn > 0 && sn > 0 ? query.dot(sessions[s].summary) / (qn * sn) : 0.0;
    scored.emplace_back(c, s);
  }
  const std::size_t n = std::min(top_n, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                    [&](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return sessions[a.second].id < sessions[b.second].id;
                    });
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(scored[i].second);
  return out;
}

std::vector<Recommendation> recommend_exhaustive(const std::vector<Vec>& prefix, const std::vector<BiIntent>& intents,
                                                 const TaskIndex& idx, double w_s, std::size_t top_n) {
  if (prefix.empty()) return {};
  const auto sessions = filter_sessions_exhaustive(idx, prefix, top_n);
  return recommend_from_sessions(prefix.back(), intents, idx, sessions, w_s);
}

namespace {

double reconstruction_error(const Mat& v, const Mat& w, const Mat& h) { return (v - w * h).squaredNorm(); }

constexpr double kNmfEps = 1e-12;

}  // namespace

FactorModel FactorModel::train(const Workload& w, int rank, int iterations, std::uint64_t seed) {
  if (rank < 1) throw ConfigError("factorization rank must be >= 1");
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  FactorModel m;
  std::vector<std::vector<std::size_t>> rows;
  for (const auto& s : w.sessions) {
    auto& row = rows.emplace_back();
    for (const auto& st : s.states) {
      const std::string key = canonical_key(st.pattern);
      auto [it, fresh] = m.column_.emplace(key, m.patterns_.size());
      if (fresh) m.patterns_.push_back(st.pattern);
      row.push_back(it->second);
    }
  }
  const auto n_rows = static_cast<Eigen::Index>(rows.size());
  const auto n_cols = static_cast<Eigen::Index>(m.patterns_.size());
  if (rank > std::min(n_rows, n_cols)) {
    throw ConfigError("factorization rank " + std::to_string(rank) + " exceeds min(sessions, patterns) = " +
                      std::to_string(std::min(n_rows, n_cols)));
  }
  Mat v = Mat::Zero(n_rows, n_cols);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    for (std::size_t c : rows[r]) v(r, static_cast<Eigen::Index>(c)) = 1.0;
  }
  m.popularity_ = v.colwise().sum().transpose();

  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  const double scale = std::sqrt(v.mean() / rank);
  m.w_.resize(n_rows, rank);
  m.h_.resize(rank, n_cols);
  for (Eigen::Index i = 0; i < m.w_.size(); ++i) m.w_.data()[i] = u(rng) * scale;
  for (Eigen::Index i = 0; i < m.h_.size(); ++i) m.h_.data()[i] = u(rng) * scale;

  m.loss_trace_.push_back(reconstruction_error(v, m.w_, m.h_));
  for (int it = 0; it < iterations; ++it) {
    const Mat wt_v = m.w_.transpose() * v;
    const Mat wt_w = m.w_.transpose() * m.w_;
    m.h_.array() *= wt_v.array() / ((wt_w * m.h_).array() + kNmfEps);
    const Mat v_ht = v * m.h_.transpose();
    const Mat h_ht = m.h_ * m.h_.transpose();
    m.w_.array() *= v_ht.array() / ((m.w_ * h_ht).array() + kNmfEps);
    m.loss_trace_.push_back(reconstruction_error(v, m.w_, m.h_));
  }
  return m;
}

Vec FactorModel::complete(const std::vector<BiPattern>& session, int fold_in_iterations) const {
  Vec q = Vec::Zero(h_.cols());
  for (const auto& p : session) {
    if (auto it = column_.find(canonical_key(p)); it != column_.end()) q[static_cast<Eigen::Index>(it->second)] = 1.0;
  }
  if (q.sum() == 0.0) return popularity_;
  Vec w = Vec::Constant(h_.rows(), std::sqrt(q.mean() / static_cast<double>(h_.rows())) + 1e-3);
  const Vec hq = h_ * q;
  const Mat hht = h_ * h_.transpose();
  for (int it = 0; it < fold_in_iterations; ++it) w.array() *= hq.array() / ((hht * w).array() + kNmfEps);
  return h_.transpose() * w;
}

std::vector<Recommendation> FactorModel::recommend(const std::vector<BiPattern>& session, int k,
                                                   int fold_in_iterations) const {
  const Vec scores = complete(session, fold_in_iterations);
  std::set<std::size_t> seen;
  for (const auto& p : session) {
    if (auto it = column_.find(canonical_key(p)); it != column_.end()) seen.insert(it->second);
  }
  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < patterns_.size(); ++c) {
    if (!seen.contains(c)) order.push_back(c);
  }
  const std::size_t n = std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(k, 0)));
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
                      if (scores[ia] != scores[ib]) return scores[ia] > scores[ib];
                      return a < b;
                    });
  std::vector<Recommendation> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({patterns_[order[i]], scores[static_cast<Eigen::Index>(order[i])], std::nullopt,
                   "cell:" + std::to_string(order[i])});
  }
  return out;
}

CooccurrenceStats CooccurrenceStats::build(const Workload& w) {
  CooccurrenceStats stats;
  for (const auto& s : w.sessions) {
    for (const auto& st : s.states) {
      const auto dims = st.pattern.dimension_ids();
      for (const auto& m : st.pattern.measure_ids()) {
        for (const auto& d : dims) ++stats.counts_[{m, d}];
      }
    }
  }
  stats.reindex();
  return stats;
}

void CooccurrenceStats::reindex() {
  by_measure_.clear();
  for (const auto& [key, n] : counts_) by_measure_[key.first].emplace_back(key.second, n);
}

std::uint64_t CooccurrenceStats::count(const NodeId& measure, const NodeId& dimension) const {
  auto it = counts_.find({measure, dimension});
  return it == counts_.end() ? 0 : it->second;
}

json CooccurrenceStats::to_json() const {
  json rows = json::array();
  for (const auto& [key, n] : counts_) rows.push_back({{"measure", key.first}, {"dimension", key.second}, {"count", n}});
  return {{"version", 1}, {"counts", std::move(rows)}};
}

CooccurrenceStats CooccurrenceStats::from_json(const json& j) {
  CooccurrenceStats stats;
  try {
    for (const auto& r : j.at("counts")) {
      stats.counts_[{r.at("measure").get<NodeId>(), r.at("dimension").get<NodeId>()}] = r.at("count").get<std::uint64_t>();
    }
  } catch (const json::exception& e) {
    throw ParseError("cooccurrence", e.what());
  }
  stats.reindex();
  return stats;
}

BiPattern refine(const BiPattern& p, const CooccurrenceStats& stats, int n_inferred) {
  if (n_inferred < 0) throw ConfigError("n_inferred must be >= 0");
  if (n_inferred == 0) return p;
  std::map<NodeId, std::uint64_t> totals;
  for (const auto& m : p.measure_ids()) {
    auto it = stats.by_measure_.find(m);
    if (it == stats.by_measure_.end()) continue;
    for (const auto& [d, n] : it->second) totals[d] += n;
  }
  std::vector<std::pair<NodeId, std::uint64_t>> ranked;
  for (const auto& [d, n] : totals) {
    if (n > 0 && !p.has_dimension(d)) ranked.emplace_back(d, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  BiPattern out = p;
  for (std::size_t i = 0; i < ranked.size() && static_cast<int>(i) < n_inferred; ++i) {
    out.dimensions.push_back({ranked[i].first, DimRole::GroupBy, std::nullopt});
  }
  return out;
}

Recommendation refine(const Recommendation& r, const CooccurrenceStats& stats, int n_inferred) {
  Recommendation out = r;
  out.pattern = refine(r.pattern, stats, n_inferred);
  return out;
}

}  // namespace gbi
