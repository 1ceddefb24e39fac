#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "gbi/stategraph.hpp"

namespace gbi {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct EncoderConfig {
  int input_dim = 32;
  std::string hashing = "fnv1a-signed";

  int width() const noexcept { return input_dim + kNodeKindCount; }
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

/// Lowercased alphanumeric runs of `label`.
std::vector<std::string> tokenize_label(const std::string& label);

/// Signed-hash bag of tokens (L2-normalized, zero when there are no tokens)
/// followed by a one-hot of the node kind.
Vec encode_node_features(const EncoderConfig& cfg, const GraphNode& node);

/// LeakyRelu uses slope 0.01 below zero.
enum class Activation { Relu, LeakyRelu, Tanh, Identity };
std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

struct ModelConfig {
  int layers = 3;
  int output_dim = 64;
  /// Width of the intermediate layers; 0 means output_dim.
  int hidden_dim = 0;
  Activation activation = Activation::LeakyRelu;
  EncoderConfig encoder;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Layer l maps concat(h_v, mean of neighbor h) of width 2*d_{l-1} to d_l.
struct Layer {
  Mat weight;  // d_l x 2*d_{l-1}
  Vec bias;    // d_l
  bool operator==(const Layer&) const = default;
};

struct EmbedderModel {
  ModelConfig config;
  std::vector<Layer> layers;
  /// Mean full-batch loss before training, then after each epoch.
  std::vector<double> loss_trace;

  /// Glorot-uniform weights, zero biases.
  static EmbedderModel initialize(const ModelConfig& cfg, std::uint64_t seed);

  int input_dim() const { return config.encoder.width(); }
  int output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }
  std::size_t parameter_count() const;
  /// Flattened parameters in layer order: weight (column-major) then bias.
  Vec parameters() const;
  void set_parameters(const Vec& theta);

  void check_shapes() const;
  bool operator==(const EmbedderModel& other) const;
};

/// Encoded node features plus the row-normalized undirected adjacency, the form
/// the network consumes. Isolated nodes have an empty adjacency row.
struct PreparedGraph {
  Mat features;                                   // n x input width
  Eigen::SparseMatrix<double, Eigen::RowMajor> adjacency;  // n x n
};

PreparedGraph prepare_graph(const EncoderConfig& cfg, const StateGraph& g);

/// Unit-norm pooled embedding (zero vector if the pooled vector is zero).
Vec embed_prepared(const EmbedderModel& model, const PreparedGraph& g);
Vec embed_graph(const EmbedderModel& model, const StateGraph& g);

/// Embeddings of every state of `w`, one row per session. Neighborhoods use
/// the full session task, or the task of the prefix ending at each state.
std::vector<std::vector<Vec>> embed_workload(const Ontology& ont, const Workload& w, const EmbedderModel& model,
                                             Enrichment level, bool prefix_task = false);

double cosine(const Vec& a, const Vec& b);

struct PairMatch {
  double cosine;
  bool matching;
};
PairMatch pair_match(const EmbedderModel& model, const StateGraph& a, const StateGraph& b, double threshold = 0.5);

/// Index pair into a graph list with its target similarity.
struct TrainingPair {
  std::size_t a;
  std::size_t b;
  double similarity;
};

enum class GradientMethod { Analytic, Numeric };

struct TrainConfig {
  int epochs = 20;
  int batch_size = 32;
  double learning_rate = 0.003;
  std::uint64_t seed = 0;
  GradientMethod gradient = GradientMethod::Analytic;

  void validate() const;
};

/// Mean over pairs of the smoothed absolute error |sim - cos|.
double pair_loss(const EmbedderModel& model, const std::vector<PreparedGraph>& graphs,
                 const std::vector<TrainingPair>& pairs);

/// Gradient of pair_loss with respect to model.parameters().
Vec pair_loss_gradient(const EmbedderModel& model, const std::vector<PreparedGraph>& graphs,
                       const std::vector<TrainingPair>& pairs);

/// Central finite differences of pair_loss, one parameter at a time.
Vec numeric_loss_gradient(const EmbedderModel& model, const std::vector<PreparedGraph>& graphs,
                          const std::vector<TrainingPair>& pairs, double eps = 1e-6);

/// Seeded minibatch Adam. Throws TrainingError if the loss becomes non-finite.
EmbedderModel train_embedder(const std::vector<PreparedGraph>& graphs, const std::vector<TrainingPair>& pairs,
                             const TrainConfig& tcfg, const ModelConfig& mcfg);

std::string model_to_json(const EmbedderModel& model);
EmbedderModel model_from_json(const std::string& text);
void save_model(const EmbedderModel& model, const std::string& path);
EmbedderModel load_model(const std::string& path);

/// "epoch,mean_loss" rows; epoch 0 is the untrained model.
std::string loss_trace_csv(const EmbedderModel& model);

}  // namespace gbi
