#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gbi/ontology.hpp"
#include "gbi/pattern.hpp"
#include "gbi/random.hpp"

namespace gbi {

struct State {
  BiPattern pattern;
  int ordinal = 1;  // 1-based position in the session
  bool operator==(const State&) const = default;
};

/// Ordered states; transitions[i] labels state i -> i+1 and always equals
/// states[i+1].pattern.op.
struct UserSession {
  std::string id;
  std::vector<State> states;
  std::vector<BiOp> transitions;

  static UserSession from_patterns(std::string id, std::vector<BiPattern> patterns);

  /// Throws ValidationError if ordinals or transition labels are inconsistent.
  void check_invariants() const;

  bool operator==(const UserSession&) const = default;
};

/// Sessions-per-task allocation: per-task weights drawn from `weights`, then
/// clamped into [min_per_task, max_per_task] when bounds are set.
struct TaskAllocationConfig {
  DistributionSpec weights = DistributionSpec::uniform(1.0, 1.0);
  std::optional<int> min_per_task;
  std::optional<int> max_per_task;
  bool operator==(const TaskAllocationConfig&) const = default;
};

struct WorkloadConfig {
  int n_sessions = 125;
  int min_session_length = 5;
  int max_session_length = 8;
  /// Entries of the 7x7 op transition matrix are drawn i.i.d. from this (absolute
  /// value taken) and each row is normalized.
  DistributionSpec transition = DistributionSpec::uniform(0.0, 1.0);
  TaskAllocationConfig tasks;
  int measures_per_state = 1;
  int min_dims_per_state = 1;
  int max_dims_per_state = 2;
  double filter_probability = 0.3;
  /// 0 = dimensions uniform over the connected set. Larger values concentrate each
  /// measure's dimension choices on a fixed per-measure ranking (weight 1/(rank+1)^skew).
  double cooccurrence_skew = 0.0;
  /// Probability that a state carries over the previous state's measures, and
  /// independently each of its dimensions. 0 draws every state afresh.
  double state_persistence = 0.0;
  /// Probability a freshly drawn measure uses its fixed per-measure aggregation
  /// instead of a uniform one.
  double aggregation_consistency = 0.0;
  /// Probability a session is assigned a second task MG.
  double second_task_probability = 0.0;

  void validate() const;
  bool operator==(const WorkloadConfig&) const = default;

  /// Named presets: "hiw", "bt-exp", "bt-gamma", "bt-uniform", "bt-normal",
  /// "st-exp", "st-gamma", "st-uniform", "st-normal". `ahi` selects the AHI
  /// sessions-per-task bounds for the ST-* presets.
  static WorkloadConfig preset(const std::string& name, bool ahi = false);
};

struct WorkloadProvenance {
  std::optional<WorkloadConfig> config;  // empty for recorded logs
  std::uint64_t seed = 0;
  /// Task MGs the generator assigned to each session, keyed by session id.
  std::map<std::string, std::set<NodeId>> assigned_tasks;
};

struct Workload {
  std::vector<UserSession> sessions;
  WorkloadProvenance provenance;

  const UserSession& session(const std::string& id) const;
  std::size_t state_count() const;
};

/// Union over all states and measures of parent_measure_group.
std::set<NodeId> session_task(const Ontology& ont, const UserSession& s);

/// Same union restricted to the first `prefix_len` states.
std::set<NodeId> session_task(const Ontology& ont, const UserSession& s, std::size_t prefix_len);

/// Transition matrix rows indexed by BiOp; each row sums to 1.
using TransitionMatrix = std::array<std::array<double, 7>, 7>;
TransitionMatrix sample_transition_matrix(const DistributionSpec& dist, Rng& rng);

Workload generate_workload(const Ontology& ont, const WorkloadConfig& cfg, std::uint64_t seed);

struct Fold {
  Workload train;
  Workload test;
};

/// k session-level folds; test folds are disjoint and cover every session.
std::vector<Fold> split_folds(const Workload& w, int k, std::uint64_t seed);

/// JSONL, one session per line:
/// {id, task_mgs[], states:[{op, measures:[{id,agg}], dimensions:[{id,role,value?}]}]}
void write_log(const Workload& w, const Ontology& ont, const std::string& path);
std::string log_to_jsonl(const Workload& w, const Ontology& ont);
Workload read_log(const std::string& path, const Ontology& ont);
Workload log_from_jsonl(const std::string& text, const Ontology& ont);

}  // namespace gbi
