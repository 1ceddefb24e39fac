#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace gbi {

struct RFConfig {
  int n_trees = 20;
  int max_depth = 10;
  int min_samples_split = 2;
  /// Features tried per split; 0 means round(sqrt(d)).
  int max_features = 0;
  /// Bootstrap sample size as a fraction of the training set, drawn with replacement.
  double bootstrap_fraction = 1.0;
  std::uint64_t seed = 0;
  bool compute_oob = false;

  void validate() const;
};

/// Axis-aligned CART node. Leaves have feature < 0 and carry the class counts
/// of the bootstrap samples that reached them.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> counts;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  const TreeNode& leaf(const Eigen::VectorXd& x) const;
  int depth() const;
};

class RandomForest {
 public:
  /// X is n x d (one row per example); labels in [0, n_classes).
  static RandomForest fit(const Eigen::MatrixXd& X, const std::vector<int>& y, int n_classes, const RFConfig& cfg);

  /// Mean over trees of the normalized leaf class distribution.
  Eigen::VectorXd predict_proba(const Eigen::VectorXd& x) const;
  /// Argmax of predict_proba, ties to the lower class index.
  int predict(const Eigen::VectorXd& x) const;

  int n_classes() const noexcept { return n_classes_; }
  int n_features() const noexcept { return n_features_; }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  /// Out-of-bag accuracy when requested at fit time and defined.
  std::optional<double> oob_accuracy() const noexcept { return oob_accuracy_; }

  nlohmann::json to_json() const;
  static RandomForest from_json(const nlohmann::json& j);

  bool operator==(const RandomForest& other) const;

 private:
  int n_classes_ = 0;
  int n_features_ = 0;
  std::vector<DecisionTree> trees_;
  std::optional<double> oob_accuracy_;
};

}  // namespace gbi
