#pragma once

#include <compare>
#include <vector>

#include <json.hpp>

#include "gbi/embedder.hpp"
#include "gbi/random_forest.hpp"

namespace gbi {

/// Coarse next step: an operation applied within a measure group.
struct BiIntent {
  BiOp op = BiOp::Analysis;
  NodeId mg;
  auto operator<=>(const BiIntent&) const = default;
};

struct ScoredIntent {
  BiIntent intent;
  double probability = 0.0;
};

struct IntentExample {
  Vec embedding;
  BiIntent intent;
};

/// Labels of the transition into `next`: its op paired with each distinct MG
/// of its measures.
std::vector<BiIntent> transition_intents(const Ontology& ont, const BiPattern& next);

/// One example per (transition, MG of the next state's measures). `embeddings`
/// holds one vector per state, aligned with w.sessions.
std::vector<IntentExample> build_intent_examples(const Ontology& ont, const Workload& w,
                                                 const std::vector<std::vector<Vec>>& embeddings);

class IntentModel {
 public:
  /// Class table = distinct intents in sorted order. A single-class input gives
  /// a model that always predicts that class.
  static IntentModel train(const std::vector<IntentExample>& examples, const RFConfig& cfg);

  /// Top-min(k, classes) intents by probability, ties to the lower class index.
  std::vector<ScoredIntent> predict_topk(const Vec& embedding, int k) const;
  /// Probabilities over all classes, in class-table order.
  Vec probabilities(const Vec& embedding) const;

  const std::vector<BiIntent>& classes() const noexcept { return classes_; }
  const RandomForest& forest() const noexcept { return forest_; }
  bool degenerate() const noexcept { return classes_.size() == 1; }

  nlohmann::json to_json() const;
  static IntentModel from_json(const nlohmann::json& j);
  bool operator==(const IntentModel& other) const { return classes_ == other.classes_ && forest_ == other.forest_; }

 private:
  std::vector<BiIntent> classes_;
  RandomForest forest_;
};

void save_intent_model(const IntentModel& model, const std::string& path);
IntentModel load_intent_model(const std::string& path);

}  // namespace gbi
