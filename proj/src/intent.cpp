#include "gbi/intent.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include <spdlog/spdlog.h>

#include "gbi/error.hpp"
#include "gbi/json_io.hpp"

namespace gbi {

using nlohmann::json;

std::vector<BiIntent> transition_intents(const Ontology& ont, const BiPattern& next) {
  std::set<NodeId> mgs;
  for (const auto& m : next.measures) mgs.insert(parent_measure_group(ont, m.id));
  std::vector<BiIntent> out;
  for (const auto& mg : mgs) out.push_back({next.op, mg});
  return out;
}

std::vector<IntentExample> build_intent_examples(const Ontology& ont, const Workload& w,
                                                 const std::vector<std::vector<Vec>>& embeddings) {
  if (embeddings.size() != w.sessions.size()) throw ModelError("embedding table does not match session count");
  std::vector<IntentExample> out;
  for (std::size_t s = 0; s < w.sessions.size(); ++s) {
    const auto& states = w.sessions[s].states;
    if (embeddings[s].size() != states.size()) throw ModelError("embedding row does not match state count");
    for (std::size_t i = 0; i + 1 < states.size(); ++i) {
      for (auto& intent : transition_intents(ont, states[i + 1].pattern)) out.push_back({embeddings[s][i], intent});
    }
  }
  return out;
}

IntentModel IntentModel::train(const std::vector<IntentExample>& examples, const RFConfig& cfg) {
  if (examples.empty()) throw ConfigError("intent training needs at least one example");
  std::set<BiIntent> distinct;
  for (const auto& e : examples) distinct.insert(e.intent);
  IntentModel model;
  model.classes_.assign(distinct.begin(), distinct.end());
  if (model.classes_.size() == 1) {
    spdlog::warn("intent training data has a single class ({}, {}); the model will always predict it",
                 to_string(model.classes_[0].op), model.classes_[0].mg);
  }
  std::map<BiIntent, int> index;
  for (std::size_t c = 0; c < model.classes_.size(); ++c) index[model.classes_[c]] = static_cast<int>(c);
  const auto d = examples.front().embedding.size();
  Mat X(static_cast<Eigen::Index>(examples.size()), d);
  std::vector<int> y;
  y.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].embedding.size() != d) throw ModelError("intent examples have inconsistent embedding sizes");
    X.row(static_cast<Eigen::Index>(i)) = examples[i].embedding.transpose();
    y.push_back(index.at(examples[i].intent));
  }
  model.forest_ = RandomForest::fit(X, y, static_cast<int>(model.classes_.size()), cfg);
  return model;
}

Vec IntentModel::probabilities(const Vec& embedding) const { return forest_.predict_proba(embedding); }

std::vector<ScoredIntent> IntentModel::predict_topk(const Vec& embedding, int k) const {
  if (k < 1) throw ConfigError("k must be >= 1");
  const Vec p = probabilities(embedding);
  std::vector<int> order(static_cast<std::size_t>(p.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[a] > p[b]; });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(k)));
  std::vector<ScoredIntent> out;
  for (int c : order) out.push_back({classes_[c], p[c]});
  return out;
}

json IntentModel::to_json() const {
  json classes = json::array();
  for (const auto& c : classes_) classes.push_back({{"op", std::string(to_string(c.op))}, {"mg", c.mg}});
  return {{"version", 1}, {"classes", std::move(classes)}, {"forest", forest_.to_json()}};
}

IntentModel IntentModel::from_json(const json& j) {
  IntentModel m;
  try {
    if (j.at("version").get<int>() != 1) throw ParseError("version", "unsupported intent model version");
    for (const auto& c : j.at("classes")) m.classes_.push_back({parse_op(c.at("op").get<std::string>()), c.at("mg").get<std::string>()});
    m.forest_ = RandomForest::from_json(j.at("forest"));
  } catch (const json::exception& e) {
    throw ParseError("intent_model", e.what());
  }
  if (static_cast<int>(m.classes_.size()) != m.forest_.n_classes()) throw ModelError("class table does not match forest");
  return m;
}

void save_intent_model(const IntentModel& model, const std::string& path) {
  write_text_file(path, model.to_json().dump() + "\n");
}

IntentModel load_intent_model(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return IntentModel::from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw ParseError(path, e.what());
  }
}

}  // namespace gbi
