#include "gbi/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gbi/error.hpp"
#include "gbi/json_io.hpp"

namespace gbi {

using nlohmann::json;

UserSession UserSession::from_patterns(std::string id, std::vector<BiPattern> patterns) {
  UserSession s;
  s.id = std::move(id);
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    if (i > 0) s.transitions.push_back(patterns[i].op);
    s.states.push_back(State{std::move(patterns[i]), static_cast<int>(i + 1)});
  }
  return s;
}

void UserSession::check_invariants() const {
  std::vector<std::string> bad;
  if (transitions.size() + 1 != states.size() && !(states.empty() && transitions.empty())) {
    bad.push_back(id + ": |transitions| != |states| - 1");
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].ordinal != static_cast<int>(i + 1)) bad.push_back(id + ": ordinal mismatch at " + std::to_string(i));
    if (i > 0 && i - 1 < transitions.size() && transitions[i - 1] != states[i].pattern.op) {
      bad.push_back(id + ": transition " + std::to_string(i - 1) + " differs from next state's op");
    }
  }
  if (!bad.empty()) throw ValidationError("session invariant violated", std::move(bad));
}

const UserSession& Workload::session(const std::string& id) const {
  for (const auto& s : sessions) {
    if (s.id == id) return s;
  }
  throw NotFoundError("unknown session: " + id);
}

std::size_t Workload::state_count() const {
  std::size_t n = 0;
  for (const auto& s : sessions) n += s.states.size();
  return n;
}

std::set<NodeId> session_task(const Ontology& ont, const UserSession& s) {
  return session_task(ont, s, s.states.size());
}

std::set<NodeId> session_task(const Ontology& ont, const UserSession& s, std::size_t prefix_len) {
  std::set<NodeId> task;
  prefix_len = std::min(prefix_len, s.states.size());
  for (std::size_t i = 0; i < prefix_len; ++i) {
    for (const auto& m : s.states[i].pattern.measures) task.insert(parent_measure_group(ont, m.id));
  }
  return task;
}

void WorkloadConfig::validate() const {
  if (n_sessions < 1) throw ConfigError("n_sessions must be >= 1");
  if (min_session_length < 1 || max_session_length < min_session_length) {
    throw ConfigError("session length bounds must satisfy 1 <= min <= max");
  }
  transition.validate();
  tasks.weights.validate();
  if (tasks.min_per_task && *tasks.min_per_task < 0) throw ConfigError("min_per_task must be >= 0");
  if (tasks.min_per_task && tasks.max_per_task && *tasks.max_per_task < *tasks.min_per_task) {
    throw ConfigError("max_per_task must be >= min_per_task");
  }
  if (tasks.max_per_task && *tasks.max_per_task < 1) throw ConfigError("max_per_task must be >= 1");
  if (measures_per_state < 1) throw ConfigError("measures_per_state must be >= 1");
  if (min_dims_per_state < 0 || max_dims_per_state < min_dims_per_state) {
    throw ConfigError("dims per state bounds must satisfy 0 <= min <= max");
  }
  if (!(filter_probability >= 0.0 && filter_probability <= 1.0)) throw ConfigError("filter_probability must lie in [0,1]");
  if (!(cooccurrence_skew >= 0.0)) throw ConfigError("cooccurrence_skew must be >= 0");
  if (!(state_persistence >= 0.0 && state_persistence <= 1.0)) throw ConfigError("state_persistence must lie in [0,1]");
  if (!(aggregation_consistency >= 0.0 && aggregation_consistency <= 1.0)) {
    throw ConfigError("aggregation_consistency must lie in [0,1]");
  }
  if (!(second_task_probability >= 0.0 && second_task_probability <= 1.0)) {
    throw ConfigError("second_task_probability must lie in [0,1]");
  }
}

WorkloadConfig WorkloadConfig::preset(const std::string& name, bool ahi) {
  WorkloadConfig c;
  if (ahi) c.n_sessions = 150;
  auto bounds = [&](int hi_min, int hi_max, int ahi_min, int ahi_max) {
    c.tasks.min_per_task = ahi ? ahi_min : hi_min;
    c.tasks.max_per_task = ahi ? ahi_max : hi_max;
  };
  if (name == "hiw") {
    // Recorded sessions favour a few operations, repeat measures across turns
    // and aggregate each measure one way.
    c.transition = DistributionSpec::gamma(0.2, 1.0);
    c.state_persistence = 0.9;
    c.aggregation_consistency = 1.0;
    c.cooccurrence_skew = 2.0;
    return c;
  }
  if (name == "bt-exp") {
    c.transition = DistributionSpec::exponential(0.5);
  } else if (name == "bt-gamma") {
    c.transition = DistributionSpec::gamma(1.0, 1.0);
  } else if (name == "bt-uniform") {
    c.transition = DistributionSpec::uniform(0.0, 1.0);
  } else if (name == "bt-normal") {
    c.transition = DistributionSpec::normal(0.0, 1.0);
  } else if (name == "st-exp") {
    c.tasks.weights = DistributionSpec::exponential(1.0);
    bounds(3, 20, 1, 8);
  } else if (name == "st-gamma") {
    c.tasks.weights = DistributionSpec::gamma(0.5, 2.0);
    bounds(3, 27, 1, 9);
  } else if (name == "st-uniform") {
    c.tasks.weights = DistributionSpec::uniform(1.0, 1.0);
    bounds(10, 11, 2, 3);
  } else if (name == "st-normal") {
    c.tasks.weights = DistributionSpec::normal(1.0, 0.5);
    bounds(3, 13, 1, 5);
  } else {
    throw ConfigError("unknown workload preset '" + name + "'");
  }
  return c;
}

TransitionMatrix sample_transition_matrix(const DistributionSpec& dist, Rng& rng) {
  dist.validate();
  TransitionMatrix t{};
  for (auto& row : t) {
    double sum = 0.0;
    for (auto& v : row) {
      v = std::abs(dist.sample(rng));
      sum += v;
    }
    for (auto& v : row) v = sum > 0.0 ? v / sum : 1.0 / row.size();
  }
  return t;
}

namespace {

/// Largest-remainder allocation of `total` sessions proportional to weights,
/// with per-task bounds enforced by fixing violators and re-spreading the rest.
std::vector<int> allocate_sessions(std::size_t n_tasks, int total, const TaskAllocationConfig& cfg, Rng& rng) {
  std::vector<double> w(n_tasks);
  double sum = 0.0;
  for (auto& v : w) {
    v = std::abs(cfg.weights.sample(rng));
    sum += v;
  }
  if (!(sum > 0.0)) std::fill(w.begin(), w.end(), 1.0);

  const int lo = cfg.min_per_task.value_or(0);
  const int hi = cfg.max_per_task.value_or(total);
  const long n = static_cast<long>(n_tasks);
  if (lo * n > total || hi * n < total) {
    throw ConfigError("sessions-per-task bounds [" + std::to_string(lo) + "," + std::to_string(hi) +
                      "] infeasible for " + std::to_string(total) + " sessions over " + std::to_string(n_tasks) +
                      " tasks");
  }

  std::vector<int> fixed(n_tasks, -1);
  std::vector<double> ideal(n_tasks, 0.0);
  for (;;) {
    int remaining = total;
    double free_w = 0.0;
    std::size_t free_n = 0;
    for (std::size_t t = 0; t < n_tasks; ++t) {
      if (fixed[t] >= 0) {
        remaining -= fixed[t];
      } else {
        free_w += w[t];
        ++free_n;
      }
    }
    if (free_n == 0) break;
    for (std::size_t t = 0; t < n_tasks; ++t) {
      if (fixed[t] < 0) ideal[t] = free_w > 0.0 ? remaining * w[t] / free_w : double(remaining) / free_n;
    }
    bool changed = false;
    for (std::size_t t = 0; t < n_tasks; ++t) {
      if (fixed[t] < 0 && ideal[t] < lo) {
        fixed[t] = lo;
        changed = true;
      }
    }
    if (!changed) {
      for (std::size_t t = 0; t < n_tasks; ++t) {
        if (fixed[t] < 0 && ideal[t] > hi) {
          fixed[t] = hi;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }

  std::vector<int> counts(n_tasks, 0);
  int assigned = 0;
  std::vector<std::pair<double, std::size_t>> remainders;
  for (std::size_t t = 0; t < n_tasks; ++t) {
    if (fixed[t] >= 0) {
      counts[t] = fixed[t];
    } else {
      counts[t] = static_cast<int>(std::floor(ideal[t]));
      remainders.emplace_back(ideal[t] - counts[t], t);
    }
    assigned += counts[t];
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i, ++assigned) ++counts[remainders[i].second];
  return counts;
}

struct TaskPool {
  std::vector<NodeId> tasks;
  std::vector<std::vector<NodeId>> members;
};

TaskPool build_task_pool(const Ontology& ont) {
  TaskPool pool;
  for (const auto& mg : ont.measure_groups()) {
    const auto& kids = ont.children(mg);
    if (kids.empty()) throw ConfigError("task MG with zero child measures: " + mg);
    pool.tasks.push_back(mg);
    pool.members.emplace_back(kids.begin(), kids.end());
  }
  for (const auto& m : ont.measures()) {
    if (!ont.parent(m)) {
      pool.tasks.push_back(m);
      pool.members.push_back({m});
    }
  }
  return pool;
}

template <typename T>
std::vector<T> sample_distinct(const std::vector<T>& pool, std::size_t n, Rng& rng) {
  std::vector<T> items = pool;
  n = std::min(n, items.size());
  for (std::size_t k = 0; k < n; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, items.size() - 1);
    std::swap(items[k], items[pick(rng)]);
  }
  items.resize(n);
  return items;
}

class PatternSampler {
 public:
  PatternSampler(const Ontology& ont, const WorkloadConfig& cfg, Rng& rng) : ont_(ont), cfg_(cfg), rng_(rng) {
    for (const auto& m : ont.measures()) {
      const auto& dims = ont.dimensions_of(m);
      std::vector<NodeId> ranking(dims.begin(), dims.end());
      std::shuffle(ranking.begin(), ranking.end(), rng_);
      auto& ranks = rank_[m];
      for (std::size_t r = 0; r < ranking.size(); ++r) ranks[ranking[r]] = r;
    }
  }

  /// `prev` is the preceding state of the session, if any; with probability
  /// state_persistence its measures carry over and each of its dimensions is
  /// kept independently with the same probability.
  BiPattern sample(BiOp op, const std::vector<NodeId>& members, const BiPattern* prev) {
    BiPattern p;
    p.op = op;
    const std::size_t n_meas = op == BiOp::Comparison ? 2 : cfg_.measures_per_state;
    std::uniform_int_distribution<std::size_t> pick_agg(0, kAllAggregations.size() - 1);
    std::bernoulli_distribution persist(cfg_.state_persistence);
    std::bernoulli_distribution consistent(cfg_.aggregation_consistency);
    const bool carry = prev != nullptr && cfg_.state_persistence > 0.0 && persist(rng_);
    std::set<NodeId> chosen;
    if (carry) {
      for (const auto& m : prev->measures) {
        if (p.measures.size() == n_meas) break;
        p.measures.push_back(m);
        chosen.insert(m.id);
      }
    }
    if (p.measures.size() < n_meas) {
      std::vector<NodeId> rest;
      for (const auto& m : members) {
        if (!chosen.contains(m)) rest.push_back(m);
      }
      for (const auto& m : sample_distinct(rest, n_meas - p.measures.size(), rng_)) {
        const bool canonical = cfg_.aggregation_consistency > 0.0 && consistent(rng_);
        p.measures.push_back({m, canonical ? canonical_aggregation(m) : kAllAggregations[pick_agg(rng_)]});
        chosen.insert(m);
      }
    }

    const std::set<NodeId> pool_set = connected_dimensions(ont_, chosen);
    std::vector<NodeId> pool(pool_set.begin(), pool_set.end());
    std::uniform_int_distribution<int> pick_n(cfg_.min_dims_per_state, cfg_.max_dims_per_state);
    const std::size_t target = pick_n(rng_);

    if (carry) {
      for (const auto& d : prev->dimensions) {
        auto it = std::find(pool.begin(), pool.end(), d.id);
        if (it == pool.end() || !persist(rng_)) continue;
        p.dimensions.push_back(d);
        pool.erase(it);
      }
    }

    const bool has_temporal = std::any_of(p.dimensions.begin(), p.dimensions.end(),
                                          [&](const DimensionRef& d) { return ont_.is_temporal(d.id); });
    if (op == BiOp::Trend && !has_temporal) {
      std::vector<NodeId> temporal;
      for (const auto& d : pool) {
        if (ont_.is_temporal(d)) temporal.push_back(d);
      }
      if (!temporal.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, temporal.size() - 1);
        const NodeId t = temporal[pick(rng_)];
        p.dimensions.push_back({t, DimRole::GroupBy, std::nullopt});
        pool.erase(std::find(pool.begin(), pool.end(), t));
      }
    }
    const std::size_t n_dims = std::min(target > p.dimensions.size() ? target - p.dimensions.size() : 0, pool.size());

    std::vector<double> weights(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) weights[i] = weight(chosen, pool[i]);
    std::bernoulli_distribution is_filter(cfg_.filter_probability);
    for (std::size_t k = 0; k < n_dims && !pool.empty(); ++k) {
      std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
      const std::size_t i = pick(rng_);
      DimensionRef d{pool[i], DimRole::GroupBy, std::nullopt};
      if (is_filter(rng_)) {
        d.role = DimRole::Filter;
        d.value = filter_value(d.id);
      }
      p.dimensions.push_back(std::move(d));
      pool.erase(pool.begin() + i);
      weights.erase(weights.begin() + i);
    }
    return p;
  }

 private:
  static Aggregation canonical_aggregation(const NodeId& m) { return kAllAggregations[fnv1a64(m) % kAllAggregations.size()]; }

  double weight(const std::set<NodeId>& measures, const NodeId& d) const {
    if (cfg_.cooccurrence_skew == 0.0) return 1.0;
    double w = 0.0;
    for (const auto& m : measures) {
      const auto& ranks = rank_.at(m);
      if (auto it = ranks.find(d); it != ranks.end()) {
        w = std::max(w, 1.0 / std::pow(static_cast<double>(it->second + 1), cfg_.cooccurrence_skew));
      }
    }
    return w;
  }

  std::string filter_value(const NodeId& d) {
    if (ont_.is_temporal(d)) {
      std::uniform_int_distribution<int> year(2015, 2018);
      return std::to_string(year(rng_));
    }
    std::uniform_int_distribution<int> v(1, 4);
    return "v" + std::to_string(v(rng_));
  }

  const Ontology& ont_;
  const WorkloadConfig& cfg_;
  Rng& rng_;
  std::map<NodeId, std::map<NodeId, std::size_t>> rank_;
};

std::string session_id(std::size_t i) {
  std::string digits = std::to_string(i + 1);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return "s" + digits;
}

}  // namespace

Workload generate_workload(const Ontology& ont, const WorkloadConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (ont.measures().empty()) throw ConfigError("ontology has no measures");
  Rng rng(seed);
  const TaskPool pool = build_task_pool(ont);
  const TransitionMatrix transitions = sample_transition_matrix(cfg.transition, rng);
  PatternSampler sampler(ont, cfg, rng);

  const std::vector<int> counts = allocate_sessions(pool.tasks.size(), cfg.n_sessions, cfg.tasks, rng);
  std::vector<std::size_t> session_tasks;
  for (std::size_t t = 0; t < counts.size(); ++t) session_tasks.insert(session_tasks.end(), counts[t], t);
  std::shuffle(session_tasks.begin(), session_tasks.end(), rng);

  Workload w;
  w.provenance.config = cfg;
  w.provenance.seed = seed;
  std::uniform_int_distribution<int> pick_len(cfg.min_session_length, cfg.max_session_length);
  std::bernoulli_distribution second_task(cfg.second_task_probability);
  for (std::size_t i = 0; i < session_tasks.size(); ++i) {
    std::vector<std::size_t> assigned = {session_tasks[i]};
    if (pool.tasks.size() > 1 && second_task(rng)) {
      std::uniform_int_distribution<std::size_t> pick(0, pool.tasks.size() - 2);
      std::size_t other = pick(rng);
      if (other >= assigned[0]) ++other;
      assigned.push_back(other);
    }
    const int len = pick_len(rng);
    std::vector<BiPattern> patterns;
    BiOp op = BiOp::Analysis;
    for (int pos = 0; pos < len; ++pos) {
      if (pos > 0) {
        const auto& row = transitions[static_cast<std::size_t>(op)];
        std::discrete_distribution<std::size_t> next(row.begin(), row.end());
        op = kAllOps[next(rng)];
      }
      std::size_t t = assigned[0];
      if (assigned.size() > 1) {
        std::uniform_int_distribution<std::size_t> pick(0, assigned.size() - 1);
        t = assigned[pick(rng)];
      }
      patterns.push_back(sampler.sample(op, pool.members[t], patterns.empty() ? nullptr : &patterns.back()));
    }
    UserSession s = UserSession::from_patterns(session_id(i), std::move(patterns));
    auto& tasks = w.provenance.assigned_tasks[s.id];
    for (std::size_t t : assigned) tasks.insert(pool.tasks[t]);
    w.sessions.push_back(std::move(s));
  }
  return w;
}

std::vector<Fold> split_folds(const Workload& w, int k, std::uint64_t seed) {
  if (k < 2 || static_cast<std::size_t>(k) > w.sessions.size()) {
    throw ConfigError("fold count must satisfy 2 <= k <= |sessions| (k = " + std::to_string(k) + ", sessions = " +
                      std::to_string(w.sessions.size()) + ")");
  }
  std::vector<std::size_t> order(w.sessions.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold_of(w.sessions.size());
  for (std::size_t r = 0; r < order.size(); ++r) fold_of[order[r]] = static_cast<int>(r % k);

  std::vector<Fold> folds(k);
  for (int f = 0; f < k; ++f) {
    folds[f].train.provenance = w.provenance;
    folds[f].test.provenance = w.provenance;
    for (std::size_t i = 0; i < w.sessions.size(); ++i) {
      (fold_of[i] == f ? folds[f].test : folds[f].train).sessions.push_back(w.sessions[i]);
    }
  }
  return folds;
}

std::string log_to_jsonl(const Workload& w, const Ontology& ont) {
  std::string out;
  for (const auto& s : w.sessions) {
    json states = json::array();
    for (const auto& st : s.states) states.push_back(pattern_to_json(st.pattern));
    json line = {{"id", s.id}, {"task_mgs", session_task(ont, s)}, {"states", std::move(states)}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

void write_log(const Workload& w, const Ontology& ont, const std::string& path) {
  write_text_file(path, log_to_jsonl(w, ont));
}

Workload log_from_jsonl(const std::string& text, const Ontology& ont) {
  Workload w;
  std::vector<std::string> offenders;
  std::set<std::string> ids;
  std::istringstream in(text);
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string locus = "line " + std::to_string(lineno);
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(locus, e.what());
    }
    if (!doc.is_object() || !doc.contains("id") || !doc["id"].is_string()) throw ParseError(locus + ".id", "missing session id");
    if (!doc.contains("states") || !doc["states"].is_array()) throw ParseError(locus + ".states", "missing states array");
    std::vector<BiPattern> patterns;
    for (std::size_t i = 0; i < doc["states"].size(); ++i) {
      patterns.push_back(pattern_from_json(doc["states"][i], locus + ".states[" + std::to_string(i) + "]"));
    }
    UserSession s = UserSession::from_patterns(doc["id"].get<std::string>(), std::move(patterns));
    if (!ids.insert(s.id).second) offenders.push_back(locus + ": duplicate session id '" + s.id + "'");
    bool resolvable = true;
    for (std::size_t i = 0; i < s.states.size(); ++i) {
      try {
        validate_pattern(ont, s.states[i].pattern);
      } catch (const ValidationError& e) {
        resolvable = false;
        for (const auto& o : e.offenders()) offenders.push_back(locus + ".states[" + std::to_string(i) + "]." + o);
      }
    }
    if (resolvable && doc.contains("task_mgs")) {
      const auto recorded = doc["task_mgs"].get<std::set<NodeId>>();
      if (recorded != session_task(ont, s)) offenders.push_back(locus + ".task_mgs: does not match recomputed session task");
    }
    w.sessions.push_back(std::move(s));
  }
  if (!offenders.empty()) throw ValidationError("workload log does not validate against the ontology", std::move(offenders));
  return w;
}

Workload read_log(const std::string& path, const Ontology& ont) { return log_from_jsonl(read_text_file(path), ont); }

}  // namespace gbi
