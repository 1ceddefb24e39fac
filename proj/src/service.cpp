#include "gbi/service.hpp"

#include <algorithm>
#include <cstdio>

#include "gbi/json_io.hpp"

namespace gbi {

using nlohmann::json;

json index_bundle_to_json(const TaskIndex& index, const CooccurrenceStats& stats, Enrichment level) {
  return {{"version", 1},
          {"level", std::string(to_string(level))},
          {"index", index.to_json()},
          {"cooccurrence", stats.to_json()}};
}

void index_bundle_from_json(const json& j, TaskIndex& index, CooccurrenceStats& stats, Enrichment& level) {
  if (!j.is_object() || !j.contains("index") || !j.contains("cooccurrence") || !j.contains("level")) {
    throw ParseError("index bundle", "expected {level, index, cooccurrence}");
  }
  level = parse_enrichment(j.at("level").get<std::string>());
  index = TaskIndex::from_json(j.at("index"));
  stats = CooccurrenceStats::from_json(j.at("cooccurrence"));
}

ModelBundle load_bundle(const std::string& ontology_path, const std::string& embedder_path,
                        const std::string& intent_path, const std::string& index_path) {
  ModelBundle b;
  b.ontology = load_ontology(ontology_path);
  b.embedder = load_model(embedder_path);
  b.intent = load_intent_model(intent_path);
  json j;
  try {
    j = json::parse(read_text_file(index_path));
  } catch (const json::parse_error& e) {
    throw ParseError(index_path, e.what());
  }
  index_bundle_from_json(j, b.index, b.cooccurrence, b.level);
  return b;
}

void ServiceConfig::validate() const {
  if (k < 1 || k > 3) throw ConfigError("k must lie in [1, 3]");
  if (!(w_s >= 0.0 && w_s <= 1.0)) throw ConfigError("w_s must lie in [0, 1]");
  if (n_inferred < 0) throw ConfigError("n_inferred must be >= 0");
}

namespace {

json ranked_to_json(const RankedRecommendation& r) {
  json j = {{"id", r.id},
            {"rank", r.rank},
            {"score", r.rec.score},
            {"pattern", pattern_to_json(r.rec.pattern)},
            {"provenance", r.rec.provenance}};
  if (r.rec.intent) j["intent"] = {{"op", std::string(to_string(r.rec.intent->op))}, {"mg", r.rec.intent->mg}};
  return j;
}

}  // namespace

json query_response_to_json(const QueryResponse& r) {
  json recs = json::array();
  for (const auto& x : r.recommendations) recs.push_back(ranked_to_json(x));
  return {{"session_id", r.session_id}, {"query_id", r.query_id}, {"echo", pattern_to_json(r.echo)}, {"recommendations", recs}};
}

json session_view_to_json(const SessionView& v) {
  json states = json::array();
  for (const auto& p : v.states) states.push_back(pattern_to_json(p));
  json pending = json::array();
  for (const auto& x : v.pending) pending.push_back(ranked_to_json(x));
  return {{"id", v.id}, {"states", states}, {"pending", pending}, {"feedback", feedback_to_json(v.feedback)}};
}

RecommendationService::RecommendationService(ServiceConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void RecommendationService::load(std::shared_ptr<const ModelBundle> models) {
  if (!models) throw ConfigError("null model bundle");
  models->embedder.check_shapes();
  std::unique_lock lock(models_mu_);
  models_ = std::move(models);
}

bool RecommendationService::ready() const {
  std::shared_lock lock(models_mu_);
  return models_ != nullptr;
}

std::shared_ptr<const ModelBundle> RecommendationService::models() const {
  std::shared_lock lock(models_mu_);
  if (!models_) throw UnavailableError("models are not loaded");
  return models_;
}

std::shared_ptr<RecommendationService::Live> RecommendationService::find(const std::string& id) const {
  std::shared_lock lock(sessions_mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session: " + id);
  return it->second;
}

std::string RecommendationService::create_session() {
  (void)models();
  char buf[32];
  std::snprintf(buf, sizeof buf, "sess%04llu", static_cast<unsigned long long>(next_id_.fetch_add(1)));
  auto live = std::make_shared<Live>();
  live->id = buf;
  std::unique_lock lock(sessions_mu_);
  sessions_.emplace(live->id, live);
  return live->id;
}

QueryResponse RecommendationService::submit_query(const std::string& session_id, const BiPattern& pattern) {
  const auto m = models();
  const auto live = find(session_id);
  validate_pattern(m->ontology, pattern);

  std::lock_guard lock(live->mu);
  live->states.push_back(pattern);
  for (const auto& meas : pattern.measures) live->task.insert(parent_measure_group(m->ontology, meas.id));
  const State state{pattern, static_cast<int>(live->states.size())};
  const auto on = ontology_neighborhood(m->ontology, state, live->task);
  const Vec cur = embed_graph(m->embedder, build_state_graph(m->ontology, state, on, m->level));

  std::vector<BiIntent> intents;
  for (const auto& s : m->intent.predict_topk(cur, cfg_.k)) intents.push_back(s.intent);
  const auto raw = recommend_indexed(cur, intents, m->index, cfg_.w_s);

  QueryResponse out;
  out.session_id = live->id;
  out.query_id = live->id + "-q" + std::to_string(++live->queries);
  out.echo = pattern;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const int rank = static_cast<int>(i + 1);
    out.recommendations.push_back({out.query_id + "-r" + std::to_string(rank), rank, refine(raw[i], m->cooccurrence, cfg_.n_inferred)});
  }
  live->pending = out.recommendations;
  live->pending_query = out.query_id;
  return out;
}

void RecommendationService::submit_feedback(const std::string& session_id, const std::vector<int>& ranks) {
  const auto live = find(session_id);
  std::lock_guard lock(live->mu);
  if (live->pending_query.empty()) throw ValidationError("no pending recommendations to rate");
  std::set<int> chosen;
  std::vector<std::string> offenders;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    const int r = ranks[i];
    if (r < 1 || r > static_cast<int>(live->pending.size())) {
      offenders.push_back("ranks[" + std::to_string(i) + "]=" + std::to_string(r) + " out of range");
    } else if (!chosen.insert(r).second) {
      offenders.push_back("ranks[" + std::to_string(i) + "]=" + std::to_string(r) + " duplicate");
    }
  }
  if (!offenders.empty()) throw ValidationError("invalid feedback", offenders);

  FeedbackRecord rec;
  rec.query_id = live->pending_query;
  for (const auto& p : live->pending) rec.recommendation_ids.push_back(p.id);
  for (int r : chosen) rec.votes[r] = 1;
  {
    std::lock_guard c(counters_mu_);
    ++counters_.answered;
    if (!chosen.empty()) {
      ++counters_.with_selection;
      counters_.reciprocal_rank_sum += 1.0 / *chosen.begin();
    }
    for (int r : chosen) ++counters_.votes_by_rank[static_cast<std::size_t>(r - 1)];
  }
  live->feedback.push_back(std::move(rec));
  live->pending.clear();
  live->pending_query.clear();
}

SessionView RecommendationService::get_session(const std::string& session_id) const {
  const auto live = find(session_id);
  std::lock_guard lock(live->mu);
  return {live->id, live->states, live->pending, live->feedback};
}

json RecommendationService::ontology_summary() const {
  const auto m = models();
  const Ontology& ont = m->ontology;
  json measures = json::array();
  for (const auto& id : ont.measures()) {
    measures.push_back({{"id", id},
                        {"label", ont.label(id)},
                        {"mg", ont.parent(id).value_or("")},
                        {"dimensions", ont.dimensions_of(id)}});
  }
  json dims = json::array();
  for (const auto& id : ont.dimensions()) {
    dims.push_back({{"id", id}, {"label", ont.label(id)}, {"dg", ont.parent(id).value_or("")}, {"temporal", ont.is_temporal(id)}});
  }
  json mgs = json::array();
  for (const auto& id : ont.measure_groups()) mgs.push_back({{"id", id}, {"label", ont.label(id)}, {"measures", ont.children(id)}});
  json dgs = json::array();
  for (const auto& id : ont.dimension_groups()) dgs.push_back({{"id", id}, {"label", ont.label(id)}, {"dimensions", ont.children(id)}});
  json edges = json::array();
  for (const auto& [a, b] : ont.functional_edges()) edges.push_back({a, b});
  return {{"measures", measures},
          {"dimensions", dims},
          {"measure_groups", mgs},
          {"dimension_groups", dgs},
          {"functional_edges", edges},
          {"counts",
           {{"measures", ont.measures().size()},
            {"dimensions", ont.dimensions().size()},
            {"measure_groups", ont.measure_groups().size()},
            {"dimension_groups", ont.dimension_groups().size()},
            {"functional_edges", ont.functional_edges().size()}}}};
}

FeedbackLog RecommendationService::export_feedback() const {
  std::vector<std::shared_ptr<Live>> all;
  {
    std::shared_lock lock(sessions_mu_);
    for (const auto& [id, live] : sessions_) all.push_back(live);
  }
  FeedbackLog out;
  for (const auto& live : all) {
    std::lock_guard lock(live->mu);
    out.insert(out.end(), live->feedback.begin(), live->feedback.end());
  }
  return out;
}

FeedbackCounters RecommendationService::counters() const {
  std::lock_guard lock(counters_mu_);
  return counters_;
}

}  // namespace gbi
