#include "gbi/json_io.hpp"

#include <fstream>
#include <sstream>

#include "gbi/error.hpp"

namespace gbi {

using nlohmann::json;

namespace {

const json& field(const json& obj, const char* name, const std::string& locus) {
  if (!obj.is_object()) throw ParseError(locus, "expected an object");
  auto it = obj.find(name);
  if (it == obj.end()) throw ParseError(locus + "." + name, "missing required field");
  return *it;
}

std::string string_field(const json& obj, const char* name, const std::string& locus) {
  const json& v = field(obj, name, locus);
  if (!v.is_string()) throw ParseError(locus + "." + name, "expected a string");
  return v.get<std::string>();
}

template <typename Parse>
auto parse_enum(const std::string& text, const std::string& locus, Parse parse) {
  try {
    return parse(text);
  } catch (const ParseError& e) {
    throw ParseError(locus, e.what());
  }
}

}  // namespace

json pattern_to_json(const BiPattern& p) {
  json measures = json::array();
  for (const auto& m : p.measures) measures.push_back({{"id", m.id}, {"agg", std::string(to_string(m.agg))}});
  json dims = json::array();
  for (const auto& d : p.dimensions) {
    json e = {{"id", d.id}, {"role", std::string(to_string(d.role))}};
    if (d.value) e["value"] = *d.value;
    dims.push_back(std::move(e));
  }
  return {{"op", std::string(to_string(p.op))}, {"measures", std::move(measures)}, {"dimensions", std::move(dims)}};
}

BiPattern pattern_from_json(const json& j, const std::string& locus) {
  BiPattern p;
  p.op = parse_enum(string_field(j, "op", locus), locus + ".op", parse_op);
  const json& measures = field(j, "measures", locus);
  if (!measures.is_array()) throw ParseError(locus + ".measures", "expected an array");
  for (std::size_t i = 0; i < measures.size(); ++i) {
    const std::string l = locus + ".measures[" + std::to_string(i) + "]";
    MeasureRef m;
    m.id = string_field(measures[i], "id", l);
    m.agg = parse_enum(string_field(measures[i], "agg", l), l + ".agg", parse_aggregation);
    p.measures.push_back(std::move(m));
  }
  if (auto it = j.find("dimensions"); it != j.end()) {
    if (!it->is_array()) throw ParseError(locus + ".dimensions", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& e = (*it)[i];
      const std::string l = locus + ".dimensions[" + std::to_string(i) + "]";
      DimensionRef d;
      d.id = string_field(e, "id", l);
      d.role = parse_enum(string_field(e, "role", l), l + ".role", parse_role);
      if (auto v = e.find("value"); v != e.end() && !v->is_null()) {
        if (!v->is_string()) throw ParseError(l + ".value", "expected a string");
        d.value = v->get<std::string>();
      }
      p.dimensions.push_back(std::move(d));
    }
  }
  return p;
}

json distribution_to_json(const DistributionSpec& d) {
  json j = {{"family", to_string(d.family)}};
  switch (d.family) {
    case DistributionFamily::Exponential: j["mean"] = d.a; break;
    case DistributionFamily::Gamma: j["shape"] = d.a; j["scale"] = d.b; break;
    case DistributionFamily::Uniform: j["lo"] = d.a; j["hi"] = d.b; break;
    case DistributionFamily::Normal: j["mean"] = d.a; j["stddev"] = d.b; break;
  }
  return j;
}

DistributionSpec distribution_from_json(const json& j, const std::string& locus) {
  DistributionSpec d;
  d.family = parse_enum(string_field(j, "family", locus), locus + ".family", parse_distribution_family);
  auto num = [&](const char* name) {
    const json& v = field(j, name, locus);
    if (!v.is_number()) throw ParseError(locus + "." + name, "expected a number");
    return v.get<double>();
  };
  switch (d.family) {
    case DistributionFamily::Exponential: d.a = num("mean"); break;
    case DistributionFamily::Gamma: d.a = num("shape"); d.b = num("scale"); break;
    case DistributionFamily::Uniform: d.a = num("lo"); d.b = num("hi"); break;
    case DistributionFamily::Normal: d.a = num("mean"); d.b = num("stddev"); break;
  }
  return d;
}

json workload_config_to_json(const WorkloadConfig& c) {
  json tasks = {{"weights", distribution_to_json(c.tasks.weights)}};
  if (c.tasks.min_per_task) tasks["min_per_task"] = *c.tasks.min_per_task;
  if (c.tasks.max_per_task) tasks["max_per_task"] = *c.tasks.max_per_task;
  return {{"n_sessions", c.n_sessions},
          {"min_session_length", c.min_session_length},
          {"max_session_length", c.max_session_length},
          {"transition", distribution_to_json(c.transition)},
          {"tasks", std::move(tasks)},
          {"measures_per_state", c.measures_per_state},
          {"min_dims_per_state", c.min_dims_per_state},
          {"max_dims_per_state", c.max_dims_per_state},
          {"filter_probability", c.filter_probability},
          {"cooccurrence_skew", c.cooccurrence_skew},
          {"state_persistence", c.state_persistence},
          {"aggregation_consistency", c.aggregation_consistency},
          {"second_task_probability", c.second_task_probability}};
}

WorkloadConfig workload_config_from_json(const json& j) {
  WorkloadConfig c;
  auto get = [&](const char* name, auto& out) {
    if (auto it = j.find(name); it != j.end()) {
      try {
        it->get_to(out);
      } catch (const json::exception& e) {
        throw ParseError(std::string("workload.") + name, e.what());
      }
    }
  };
  get("n_sessions", c.n_sessions);
  get("min_session_length", c.min_session_length);
  get("max_session_length", c.max_session_length);
  get("measures_per_state", c.measures_per_state);
  get("min_dims_per_state", c.min_dims_per_state);
  get("max_dims_per_state", c.max_dims_per_state);
  get("filter_probability", c.filter_probability);
  get("cooccurrence_skew", c.cooccurrence_skew);
  get("state_persistence", c.state_persistence);
  get("aggregation_consistency", c.aggregation_consistency);
  get("second_task_probability", c.second_task_probability);
  if (auto it = j.find("transition"); it != j.end()) c.transition = distribution_from_json(*it, "workload.transition");
  if (auto it = j.find("tasks"); it != j.end()) {
    if (auto w = it->find("weights"); w != it->end()) c.tasks.weights = distribution_from_json(*w, "workload.tasks.weights");
    if (auto v = it->find("min_per_task"); v != it->end()) c.tasks.min_per_task = v->get<int>();
    if (auto v = it->find("max_per_task"); v != it->end()) c.tasks.max_per_task = v->get<int>();
  }
  return c;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);
  out << content;
  if (!out) throw Error("write failed: " + path);
}

}  // namespace gbi
