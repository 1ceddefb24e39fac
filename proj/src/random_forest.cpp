#include "gbi/random_forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gbi/error.hpp"
#include "gbi/random.hpp"

namespace gbi {

using nlohmann::json;

void RFConfig::validate() const {
  if (n_trees < 1) throw ConfigError("n_trees must be >= 1");
  if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
  if (min_samples_split < 2) throw ConfigError("min_samples_split must be >= 2");
  if (max_features < 0) throw ConfigError("max_features must be >= 0");
  if (!(bootstrap_fraction > 0.0)) throw ConfigError("bootstrap_fraction must be > 0");
}

const TreeNode& DecisionTree::leaf(const Eigen::VectorXd& x) const {
  int i = 0;
  while (nodes[i].feature >= 0) i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  return nodes[i];
}

int DecisionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) d[nodes[i].left] = d[nodes[i].right] = d[i] + 1;
  }
  return best;
}

namespace {

double gini(const std::vector<double>& counts, double total) {
  if (total <= 0.0) return 0.0;
  double s = 0.0;
  for (double c : counts) s += c * c;
  return 1.0 - s / (total * total);
}

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& X, const std::vector<int>& y, int n_classes, const RFConfig& cfg, Rng& rng)
      : X_(X), y_(y), k_(n_classes), cfg_(cfg), rng_(rng) {
    const int d = static_cast<int>(X.cols());
    mtry_ = cfg.max_features > 0 ? std::min(cfg.max_features, d)
                                 : std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(d)))));
    features_.resize(d);
    std::iota(features_.begin(), features_.end(), 0);
  }

  DecisionTree build(std::vector<int> samples) {
    tree_.nodes.clear();
    grow(samples, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<int>& samples, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::vector<double> counts(k_, 0.0);
    for (int s : samples) counts[y_[s]] += 1.0;
    const double n = static_cast<double>(samples.size());
    const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;
    if (depth >= cfg_.max_depth || static_cast<int>(samples.size()) < cfg_.min_samples_split || pure) {
      tree_.nodes[id].counts = std::move(counts);
      return id;
    }

    const double parent = gini(counts, n);
    int best_f = -1;
    double best_t = 0.0, best_score = parent - 1e-12;
    std::shuffle(features_.begin(), features_.end(), rng_);
    std::vector<std::pair<double, int>> col(samples.size());
    for (std::size_t fi = 0; fi < features_.size(); ++fi) {
      if (static_cast<int>(fi) >= mtry_ && best_f >= 0) break;
      const int f = features_[fi];
      for (std::size_t i = 0; i < samples.size(); ++i) col[i] = {X_(samples[i], f), y_[samples[i]]};
      std::sort(col.begin(), col.end());
      std::vector<double> left(k_, 0.0);
      std::vector<double> right = counts;
      for (std::size_t i = 0; i + 1 < col.size(); ++i) {
        left[col[i].second] += 1.0;
        right[col[i].second] -= 1.0;
        if (col[i].first == col[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1), nr = n - nl;
        const double score = (nl * gini(left, nl) + nr * gini(right, nr)) / n;
        if (score < best_score) {
          best_score = score;
          best_f = f;
          best_t = 0.5 * (col[i].first + col[i + 1].first);
        }
      }
    }
    if (best_f < 0) {
      tree_.nodes[id].counts = std::move(counts);
      return id;
    }

    std::vector<int> ls, rs;
    for (int s : samples) (X_(s, best_f) <= best_t ? ls : rs).push_back(s);
    samples.clear();
    samples.shrink_to_fit();
    const int l = grow(ls, depth + 1);
    const int r = grow(rs, depth + 1);
    tree_.nodes[id].feature = best_f;
    tree_.nodes[id].threshold = best_t;
    tree_.nodes[id].left = l;
    tree_.nodes[id].right = r;
    return id;
  }

  const Eigen::MatrixXd& X_;
  const std::vector<int>& y_;
  int k_;
  const RFConfig& cfg_;
  Rng& rng_;
  int mtry_;
  std::vector<int> features_;
  DecisionTree tree_;
};

Eigen::VectorXd leaf_distribution(const TreeNode& leaf) {
  Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(leaf.counts.data(), static_cast<Eigen::Index>(leaf.counts.size()));
  const double s = p.sum();
  if (s > 0) p /= s;
  return p;
}

}  // namespace

RandomForest RandomForest::fit(const Eigen::MatrixXd& X, const std::vector<int>& y, int n_classes,
                               const RFConfig& cfg) {
  cfg.validate();
  if (X.rows() == 0) throw ConfigError("random forest needs at least one example");
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw ModelError("label count does not match example count");
  if (n_classes < 1) throw ConfigError("n_classes must be >= 1");
  for (int label : y) {
    if (label < 0 || label >= n_classes) throw ModelError("label out of range: " + std::to_string(label));
  }
  RandomForest rf;
  rf.n_classes_ = n_classes;
  rf.n_features_ = static_cast<int>(X.cols());
  const int n = static_cast<int>(X.rows());
  const int draw = std::max(1, static_cast<int>(std::lround(cfg.bootstrap_fraction * n)));
  std::vector<std::vector<bool>> in_bag;
  for (int t = 0; t < cfg.n_trees; ++t) {
    Rng rng(derive_seed(cfg.seed, "rf.tree", static_cast<std::uint64_t>(t)));
    std::uniform_int_distribution<int> pick(0, n - 1);
    std::vector<int> samples(draw);
    std::vector<bool> bag(n, false);
    for (int& s : samples) {
      s = pick(rng);
      bag[s] = true;
    }
    TreeBuilder builder(X, y, n_classes, cfg, rng);
    rf.trees_.push_back(builder.build(std::move(samples)));
    if (cfg.compute_oob) in_bag.push_back(std::move(bag));
  }
  if (cfg.compute_oob) {
    int scored = 0, correct = 0;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd p = Eigen::VectorXd::Zero(n_classes);
      int votes = 0;
      for (int t = 0; t < cfg.n_trees; ++t) {
        if (in_bag[t][i]) continue;
        p += leaf_distribution(rf.trees_[t].leaf(X.row(i).transpose()));
        ++votes;
      }
      if (votes == 0) continue;
      Eigen::Index arg = 0;
      p.maxCoeff(&arg);
      ++scored;
      correct += static_cast<int>(arg) == y[i];
    }
    if (scored > 0) rf.oob_accuracy_ = static_cast<double>(correct) / scored;
  }
  return rf;
}

Eigen::VectorXd RandomForest::predict_proba(const Eigen::VectorXd& x) const {
  if (x.size() != n_features_) {
    throw ModelError("input has " + std::to_string(x.size()) + " features, forest expects " + std::to_string(n_features_));
  }
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n_classes_);
  for (const auto& t : trees_) p += leaf_distribution(t.leaf(x));
  return p / static_cast<double>(trees_.size());
}

int RandomForest::predict(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd p = predict_proba(x);
  int best = 0;
  for (int c = 1; c < p.size(); ++c) {
    if (p[c] > p[best]) best = c;
  }
  return best;
}

json RandomForest::to_json() const {
  json trees = json::array();
  for (const auto& t : trees_) {
    json nodes = json::array();
    for (const auto& nd : t.nodes) {
      if (nd.feature >= 0) {
        nodes.push_back({{"split", {nd.feature, nd.threshold}}, {"children", {nd.left, nd.right}}});
      } else {
        nodes.push_back({{"leaf", nd.counts}});
      }
    }
    trees.push_back(std::move(nodes));
  }
  json j = {{"n_classes", n_classes_}, {"n_features", n_features_}, {"trees", std::move(trees)}};
  if (oob_accuracy_) j["oob_accuracy"] = *oob_accuracy_;
  return j;
}

RandomForest RandomForest::from_json(const json& j) {
  RandomForest rf;
  try {
    rf.n_classes_ = j.at("n_classes").get<int>();
    rf.n_features_ = j.at("n_features").get<int>();
    for (const auto& tj : j.at("trees")) {
      DecisionTree t;
      for (const auto& nj : tj) {
        TreeNode nd;
        if (nj.contains("split")) {
          nd.feature = nj["split"][0].get<int>();
          nd.threshold = nj["split"][1].get<double>();
          nd.left = nj["children"][0].get<int>();
          nd.right = nj["children"][1].get<int>();
        } else {
          nd.counts = nj.at("leaf").get<std::vector<double>>();
        }
        t.nodes.push_back(std::move(nd));
      }
      rf.trees_.push_back(std::move(t));
    }
    if (j.contains("oob_accuracy")) rf.oob_accuracy_ = j["oob_accuracy"].get<double>();
  } catch (const json::exception& e) {
    throw ParseError("forest", e.what());
  }
  for (const auto& t : rf.trees_) {
    for (const auto& nd : t.nodes) {
      const int size = static_cast<int>(t.nodes.size());
      if (nd.feature >= 0 && (nd.feature >= rf.n_features_ || nd.left <= 0 || nd.right <= 0 || nd.left >= size ||
                              nd.right >= size)) {
        throw ModelError("malformed tree split");
      }
      if (nd.feature < 0 && static_cast<int>(nd.counts.size()) != rf.n_classes_) throw ModelError("leaf histogram size mismatch");
    }
  }
  if (rf.trees_.empty()) throw ModelError("forest has no trees");
  return rf;
}

bool RandomForest::operator==(const RandomForest& other) const {
  if (n_classes_ != other.n_classes_ || n_features_ != other.n_features_ || trees_.size() != other.trees_.size()) {
    return false;
  }
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    const auto& a = trees_[t].nodes;
    const auto& b = other.trees_[t].nodes;
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].feature != b[i].feature || a[i].threshold != b[i].threshold || a[i].left != b[i].left ||
          a[i].right != b[i].right || a[i].counts != b[i].counts) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace gbi
