#include "gbi/embedder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "gbi/error.hpp"
#include "gbi/json_io.hpp"
#include "gbi/random.hpp"

namespace gbi {

using nlohmann::json;

void EncoderConfig::validate() const {
  if (input_dim < 8) throw ConfigError("encoder input_dim must be >= 8");
  if (hashing != "fnv1a-signed") throw ConfigError("unknown token hashing scheme '" + hashing + "'");
}

std::vector<std::string> tokenize_label(const std::string& label) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : label) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

Vec encode_node_features(const EncoderConfig& cfg, const GraphNode& node) {
  Vec v = Vec::Zero(cfg.width());
  for (const auto& tok : tokenize_label(node.label)) {
    const std::uint64_t h = fnv1a64(tok);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    v[static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(cfg.input_dim))] += sign;
  }
  const double norm = v.head(cfg.input_dim).norm();
  if (norm > 0.0) v.head(cfg.input_dim) /= norm;
  v[cfg.input_dim + static_cast<int>(node.kind)] = 1.0;
  return v;
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "relu";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "leaky_relu") return Activation::LeakyRelu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  throw ParseError("activation", "unknown activation '" + name + "'");
}

void ModelConfig::validate() const {
  if (layers < 1) throw ConfigError("embedder needs at least one layer");
  if (output_dim < 1) throw ConfigError("output_dim must be >= 1");
  if (hidden_dim < 0) throw ConfigError("hidden_dim must be >= 0");
  encoder.validate();
}

EmbedderModel EmbedderModel::initialize(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  EmbedderModel m;
  m.config = cfg;
  Rng rng(seed);
  const int hidden = cfg.hidden_dim > 0 ? cfg.hidden_dim : cfg.output_dim;
  int in = cfg.encoder.width();
  for (int l = 0; l < cfg.layers; ++l) {
    const int out = l + 1 == cfg.layers ? cfg.output_dim : hidden;
    const double limit = std::sqrt(6.0 / (2.0 * in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Layer layer{Mat(out, 2 * in), Vec::Zero(out)};
    for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) {
      for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) layer.weight(i, j) = u(rng);
    }
    m.layers.push_back(std::move(layer));
    in = out;
  }
  return m;
}

std::size_t EmbedderModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

Vec EmbedderModel::parameters() const {
  Vec theta(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index off = 0;
  for (const auto& l : layers) {
    theta.segment(off, l.weight.size()) = l.weight.reshaped();
    off += l.weight.size();
    theta.segment(off, l.bias.size()) = l.bias;
    off += l.bias.size();
  }
  return theta;
}

void EmbedderModel::set_parameters(const Vec& theta) {
  if (static_cast<std::size_t>(theta.size()) != parameter_count()) throw ModelError("parameter vector size mismatch");
  Eigen::Index off = 0;
  for (auto& l : layers) {
    l.weight.reshaped() = theta.segment(off, l.weight.size());
    off += l.weight.size();
    l.bias = theta.segment(off, l.bias.size());
    off += l.bias.size();
  }
}

void EmbedderModel::check_shapes() const {
  if (layers.empty()) throw ModelError("model has no layers");
  Eigen::Index in = input_dim();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.weight.cols() != 2 * in) {
      throw ModelError("layer " + std::to_string(l) + " expects input width " + std::to_string(layer.weight.cols() / 2) +
                       ", got " + std::to_string(in));
    }
    if (layer.bias.size() != layer.weight.rows()) throw ModelError("layer " + std::to_string(l) + " bias size mismatch");
    in = layer.weight.rows();
  }
}

bool EmbedderModel::operator==(const EmbedderModel& other) const {
  return config == other.config && layers == other.layers && loss_trace == other.loss_trace;
}

PreparedGraph prepare_graph(const EncoderConfig& cfg, const StateGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.nodes.size());
  PreparedGraph pg;
  pg.features.resize(n, cfg.width());
  for (Eigen::Index i = 0; i < n; ++i) pg.features.row(i) = encode_node_features(cfg, g.nodes[i]).transpose();
  std::vector<std::vector<Eigen::Index>> nbrs(n);
  for (const auto& e : g.edges) {
    if (e.src == e.dst) continue;
    nbrs[e.src].push_back(static_cast<Eigen::Index>(e.dst));
    nbrs[e.dst].push_back(static_cast<Eigen::Index>(e.src));
  }
  std::vector<Eigen::Triplet<double>> trips;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& row = nbrs[i];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    for (Eigen::Index j : row) trips.emplace_back(i, j, 1.0 / static_cast<double>(row.size()));
  }
  pg.adjacency.resize(n, n);
  pg.adjacency.setFromTriplets(trips.begin(), trips.end());
  return pg;
}

namespace {

constexpr double kLeakySlope = 0.01;

Mat activate(Activation a, const Mat& z) {
  switch (a) {
    case Activation::Relu: return z.cwiseMax(0.0);
    case Activation::LeakyRelu: return z.cwiseMax(kLeakySlope * z);
    case Activation::Tanh: return z.array().tanh().matrix();
    case Activation::Identity: return z;
  }
  return z;
}

Mat activation_grad(Activation a, const Mat& z, const Mat& h) {
  switch (a) {
    case Activation::Relu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::LeakyRelu: return (z.array() > 0.0).select(Mat::Ones(z.rows(), z.cols()), kLeakySlope);
    case Activation::Tanh: return (1.0 - h.array().square()).matrix();
    case Activation::Identity: return Mat::Ones(z.rows(), z.cols());
  }
  return Mat::Ones(z.rows(), z.cols());
}

struct ForwardCache {
  std::vector<Mat> h;    // h[0] = features, h[l+1] = output of layer l
  std::vector<Mat> nbr;  // nbr[l] = adjacency * h[l]
  std::vector<Mat> z;
  Vec pooled;
  Vec embedding;
  double norm = 0.0;
};

ForwardCache forward(const EmbedderModel& model, const PreparedGraph& g) {
  if (g.features.cols() != model.input_dim()) {
    throw ModelError("graph features have width " + std::to_string(g.features.cols()) + ", model expects " +
                     std::to_string(model.input_dim()));
  }
  ForwardCache c;
  c.h.push_back(g.features);
  for (const auto& layer : model.layers) {
    const Mat& prev = c.h.back();
    if (layer.weight.cols() != 2 * prev.cols()) throw ModelError("layer input width mismatch");
    Mat nbr = g.adjacency * prev;
    const Eigen::Index d = prev.cols();
    Mat z = prev * layer.weight.leftCols(d).transpose() + nbr * layer.weight.rightCols(d).transpose();
    z.rowwise() += layer.bias.transpose();
    c.h.push_back(activate(model.config.activation, z));
    c.nbr.push_back(std::move(nbr));
    c.z.push_back(std::move(z));
  }
  const Mat& last = c.h.back();
  c.pooled = last.rows() > 0 ? Vec(last.colwise().mean().transpose()) : Vec::Zero(last.cols());
  c.norm = c.pooled.norm();
  c.embedding = c.norm > 0.0 ? Vec(c.pooled / c.norm) : Vec::Zero(c.pooled.size());
  return c;
}

/// Accumulates d(loss)/d(params) given d(loss)/d(embedding).
void backward(const EmbedderModel& model, const PreparedGraph& g, const ForwardCache& c, const Vec& d_embedding,
              std::vector<Layer>& grads) {
  if (c.norm <= 0.0) return;
  const Vec& e = c.embedding;
  const Vec d_pooled = (d_embedding - e * e.dot(d_embedding)) / c.norm;
  const Eigen::Index n = c.h.back().rows();
  Mat d_h = Mat::Zero(n, c.h.back().cols());
  d_h.rowwise() = (d_pooled / static_cast<double>(n)).transpose();
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const Layer& layer = model.layers[l];
    const Mat d_z = d_h.cwiseProduct(activation_grad(model.config.activation, c.z[l], c.h[l + 1]));
    const Eigen::Index d = c.h[l].cols();
    grads[l].weight.leftCols(d).noalias() += d_z.transpose() * c.h[l];
    grads[l].weight.rightCols(d).noalias() += d_z.transpose() * c.nbr[l];
    grads[l].bias += d_z.colwise().sum().transpose();
    if (l == 0) break;
    Mat d_prev = d_z * layer.weight.leftCols(d);
    const Mat d_nbr = d_z * layer.weight.rightCols(d);
    d_prev.noalias() += g.adjacency.transpose() * d_nbr;
    d_h = std::move(d_prev);
  }
}

constexpr double kHuberDelta = 1e-6;

double smooth_abs(double x) { return std::abs(x) >= kHuberDelta ? std::abs(x) : x * x / (2 * kHuberDelta) + kHuberDelta / 2; }

double smooth_abs_grad(double x) {
  if (std::abs(x) >= kHuberDelta) return x > 0 ? 1.0 : -1.0;
  return x / kHuberDelta;
}

std::vector<Layer> zero_grads(const EmbedderModel& model) {
  std::vector<Layer> g;
  for (const auto& l : model.layers) g.push_back({Mat::Zero(l.weight.rows(), l.weight.cols()), Vec::Zero(l.bias.size())});
  return g;
}

Vec flatten(const std::vector<Layer>& layers) {
  Eigen::Index n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  Vec out(n);
  Eigen::Index off = 0;
  for (const auto& l : layers) {
    out.segment(off, l.weight.size()) = l.weight.reshaped();
    off += l.weight.size();
    out.segment(off, l.bias.size()) = l.bias;
    off += l.bias.size();
  }
  return out;
}

/// Loss and gradient over a batch of pairs; each distinct graph is run forward
/// and backward once.
double batch_loss_and_grad(const EmbedderModel& model, const std::vector<PreparedGraph>& graphs,
                           const std::vector<TrainingPair>& pairs, std::size_t begin, std::size_t end, Vec* grad) {
  std::unordered_map<std::size_t, std::size_t> slot;
  std::vector<std::size_t> order;
  for (std::size_t p = begin; p < end; ++p) {
    for (std::size_t gi : {pairs[p].a, pairs[p].b}) {
      if (gi >= graphs.size()) throw ModelError("pair references graph " + std::to_string(gi) + " out of range");
      if (slot.emplace(gi, order.size()).second) order.push_back(gi);
    }
  }
  std::vector<ForwardCache> caches;
  caches.reserve(order.size());
  for (std::size_t gi : order) caches.push_back(forward(model, graphs[gi]));
  std::vector<Vec> d_emb(order.size(), Vec::Zero(model.output_dim()));
  const double scale = 1.0 / static_cast<double>(end - begin);
  double loss = 0.0;
  for (std::size_t p = begin; p < end; ++p) {
    const std::size_t ia = slot[pairs[p].a], ib = slot[pairs[p].b];
    const Vec& ea = caches[ia].embedding;
    const Vec& eb = caches[ib].embedding;
    const double cos = ea.dot(eb);
    const double x = pairs[p].similarity - cos;
    loss += smooth_abs(x) * scale;
    if (grad) {
      const double d_cos = -smooth_abs_grad(x) * scale;
      d_emb[ia] += d_cos * eb;
      d_emb[ib] += d_cos * ea;
    }
  }
  if (grad) {
    std::vector<Layer> grads = zero_grads(model);
    for (std::size_t s = 0; s < order.size(); ++s) backward(model, graphs[order[s]], caches[s], d_emb[s], grads);
    *grad = flatten(grads);
  }
  return loss;
}

}  // namespace

Vec embed_prepared(const EmbedderModel& model, const PreparedGraph& g) {
  model.check_shapes();
  return forward(model, g).embedding;
}

Vec embed_graph(const EmbedderModel& model, const StateGraph& g) {
  return embed_prepared(model, prepare_graph(model.config.encoder, g));
}

std::vector<std::vector<Vec>> embed_workload(const Ontology& ont, const Workload& w, const EmbedderModel& model,
                                             Enrichment level, bool prefix_task) {
  model.check_shapes();
  std::vector<std::vector<Vec>> out;
  out.reserve(w.sessions.size());
  for (const auto& s : w.sessions) {
    const std::set<NodeId> full = session_task(ont, s);
    auto& row = out.emplace_back();
    for (std::size_t i = 0; i < s.states.size(); ++i) {
      const auto on = ontology_neighborhood(ont, s.states[i], prefix_task ? session_task(ont, s, i + 1) : full);
      row.push_back(forward(model, prepare_graph(model.config.encoder, build_state_graph(ont, s.states[i], on, level))).embedding);
    }
  }
  return out;
}

double cosine(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw ModelError("cosine of vectors with different sizes");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

PairMatch pair_match(const EmbedderModel& model, const StateGraph& a, const StateGraph& b, double threshold) {
  const double c = cosine(embed_graph(model, a), embed_graph(model, b));
  return {c, c > threshold};
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
}

double pair_loss(const EmbedderModel& model, const std::vector<PreparedGraph>& graphs,
                 const std::vector<TrainingPair>& pairs) {
  if (pairs.empty()) return 0.0;
  model.check_shapes();
  return batch_loss_and_grad(model, graphs, pairs, 0, pairs.size(), nullptr);
}

Vec pair_loss_gradient(const EmbedderModel& model, const std::vector<PreparedGraph>& graphs,
                       const std::vector<TrainingPair>& pairs) {
  model.check_shapes();
  Vec grad = Vec::Zero(static_cast<Eigen::Index>(model.parameter_count()));
  if (!pairs.empty()) batch_loss_and_grad(model, graphs, pairs, 0, pairs.size(), &grad);
  return grad;
}

Vec numeric_loss_gradient(const EmbedderModel& model, const std::vector<PreparedGraph>& graphs,
                          const std::vector<TrainingPair>& pairs, double eps) {
  EmbedderModel probe = model;
  const Vec theta = model.parameters();
  Vec grad(theta.size());
  Vec t = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    t[i] = theta[i] + eps;
    probe.set_parameters(t);
    const double up = pair_loss(probe, graphs, pairs);
    t[i] = theta[i] - eps;
    probe.set_parameters(t);
    const double down = pair_loss(probe, graphs, pairs);
    t[i] = theta[i];
    grad[i] = (up - down) / (2 * eps);
  }
  return grad;
}

EmbedderModel train_embedder(const std::vector<PreparedGraph>& graphs, const std::vector<TrainingPair>& pairs,
                             const TrainConfig& tcfg, const ModelConfig& mcfg) {
  tcfg.validate();
  if (pairs.empty()) throw ConfigError("training needs at least one pair");
  EmbedderModel model = EmbedderModel::initialize(mcfg, derive_seed(tcfg.seed, "embedder.init"));
  Rng rng(derive_seed(tcfg.seed, "embedder.shuffle"));

  model.loss_trace.push_back(pair_loss(model, graphs, pairs));
  Vec theta = model.parameters();
  Vec m1 = Vec::Zero(theta.size());
  Vec m2 = Vec::Zero(theta.size());
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  long step = 0;
  std::vector<TrainingPair> order = pairs;
  const auto batch = static_cast<std::size_t>(tcfg.batch_size);
  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      Vec grad;
      if (tcfg.gradient == GradientMethod::Analytic) {
        batch_loss_and_grad(model, graphs, order, begin, end, &grad);
      } else {
        const std::vector<TrainingPair> sub(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                            order.begin() + static_cast<std::ptrdiff_t>(end));
        grad = numeric_loss_gradient(model, graphs, sub);
      }
      if (!grad.allFinite()) throw TrainingError(epoch, "non-finite gradient");
      ++step;
      m1 = beta1 * m1 + (1 - beta1) * grad;
      m2 = beta2 * m2 + (1 - beta2) * grad.cwiseProduct(grad);
      const double c1 = 1 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1 - std::pow(beta2, static_cast<double>(step));
      theta.array() -= tcfg.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + adam_eps);
      model.set_parameters(theta);
    }
    const double loss = pair_loss(model, graphs, pairs);
    if (!std::isfinite(loss)) throw TrainingError(epoch, "non-finite loss");
    model.loss_trace.push_back(loss);
  }
  return model;
}

namespace {

json matrix_to_json(const Mat& m) {
  std::vector<double> data(static_cast<std::size_t>(m.size()));
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(data.data(), m.rows(), m.cols()) = m;
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Mat matrix_from_json(const json& j, const std::string& locus) {
  try {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ParseError(locus, "data length != rows * cols");
    return Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(data.data(), rows, cols);
  } catch (const json::exception& e) {
    throw ParseError(locus, e.what());
  }
}

}  // namespace

std::string model_to_json(const EmbedderModel& model) {
  json layers = json::array();
  for (const auto& l : model.layers) {
    layers.push_back({{"weight", matrix_to_json(l.weight)},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  json j = {{"version", 1},
            {"k", model.config.layers},
            {"output_dim", model.config.output_dim},
            {"hidden_dim", model.config.hidden_dim},
            {"activation", to_string(model.config.activation)},
            {"pooling", "mean"},
            {"encoder", {{"input_dim", model.config.encoder.input_dim}, {"hashing", model.config.encoder.hashing}}},
            {"layers", std::move(layers)},
            {"loss_trace", model.loss_trace}};
  return j.dump() + "\n";
}

EmbedderModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("model", e.what());
  }
  EmbedderModel m;
  try {
    if (j.at("version").get<int>() != 1) throw ParseError("version", "unsupported model version");
    m.config.layers = j.at("k").get<int>();
    m.config.output_dim = j.at("output_dim").get<int>();
    m.config.hidden_dim = j.value("hidden_dim", 0);
    m.config.activation = parse_activation(j.at("activation").get<std::string>());
    m.config.encoder.input_dim = j.at("encoder").at("input_dim").get<int>();
    m.config.encoder.hashing = j.at("encoder").at("hashing").get<std::string>();
    const json& layers = j.at("layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string locus = "layers[" + std::to_string(i) + "]";
      Layer l;
      l.weight = matrix_from_json(layers[i].at("weight"), locus + ".weight");
      const auto bias = layers[i].at("bias").get<std::vector<double>>();
      l.bias = Eigen::Map<const Vec>(bias.data(), static_cast<Eigen::Index>(bias.size()));
      m.layers.push_back(std::move(l));
    }
    m.loss_trace = j.value("loss_trace", std::vector<double>{});
  } catch (const json::exception& e) {
    throw ParseError("model", e.what());
  }
  m.config.validate();
  if (static_cast<int>(m.layers.size()) != m.config.layers) throw ModelError("layer count does not match k");
  m.check_shapes();
  return m;
}

void save_model(const EmbedderModel& model, const std::string& path) { write_text_file(path, model_to_json(model)); }

EmbedderModel load_model(const std::string& path) { return model_from_json(read_text_file(path)); }

std::string loss_trace_csv(const EmbedderModel& model) {
  std::string out = "epoch,mean_loss\n";
  char buf[64];
  for (std::size_t i = 0; i < model.loss_trace.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g\n", i, model.loss_trace[i]);
    out += buf;
  }
  return out;
}

}  // namespace gbi
