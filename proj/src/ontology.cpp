#include "gbi/ontology.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "gbi/error.hpp"
#include "gbi/random.hpp"

namespace gbi {

namespace {

const std::set<NodeId> kEmptySet;

constexpr std::array<const char*, 96> kWords = {
    "admits",     "discharges", "claims",     "payment",    "allowed",    "copay",      "deductible",
    "visits",     "days",       "cost",       "utilization", "episodes",  "scripts",    "members",
    "enrollment", "premium",    "revenue",    "readmits",   "referrals",  "procedures", "services",
    "acute",      "chronic",    "inpatient",  "outpatient", "pharmacy",   "dental",     "vision",
    "lab",        "imaging",    "surgery",    "emergency",  "preventive", "behavioral", "maternity",
    "oncology",   "cardiac",    "renal",      "ortho",      "neuro",      "pediatric",  "geriatric",
    "network",    "provider",   "facility",   "hospital",   "clinic",     "physician",  "specialist",
    "plan",       "product",    "region",     "state",      "county",     "employer",   "industry",
    "gender",     "age",        "relation",   "coverage",   "condition",  "diagnosis",  "category",
    "severity",   "risk",       "score",      "drug",       "generic",    "brand",      "formulary",
    "channel",    "tier",       "benefit",    "contract",   "segment",    "cohort",     "program",
    "measure",    "incidence",  "prevalence", "rate",       "ratio",      "average",    "total",
    "net",        "gross",      "paid",       "billed",     "length",     "stay",       "admission",
    "type",       "source",     "status",     "level",      "group"};

constexpr std::array<const char*, 8> kTimeWords = {"year", "quarter", "month", "week",
                                                   "day", "period", "incurred", "paid"};

std::string padded(const char* prefix, int index, int width) {
  std::string digits = std::to_string(index);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

template <std::size_t N>
std::string label_for(const char* kind, int index, const std::array<const char*, N>& words, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, N - 1);
  return std::string(kind) + "_" + std::to_string(index) + "_" + words[pick(rng)];
}

}  // namespace

std::string to_string(EntityKind kind) {
  switch (kind) {
    case EntityKind::Measure: return "measure";
    case EntityKind::Dimension: return "dimension";
    case EntityKind::MeasureGroup: return "measure_group";
    case EntityKind::DimensionGroup: return "dimension_group";
  }
  return "measure";
}

void Ontology::require_fresh(const NodeId& id) const {
  if (id.empty()) throw ValidationError("node-id must be non-empty");
  if (labels_.contains(id)) throw ValidationError("duplicate node-id", {id});
}

void Ontology::add_measure(const NodeId& id, std::string label) {
  require_fresh(id);
  measures_.insert(id);
  labels_.emplace(id, std::move(label));
}

void Ontology::add_dimension(const NodeId& id, std::string label, bool temporal) {
  require_fresh(id);
  dimensions_.insert(id);
  if (temporal) temporal_.insert(id);
  labels_.emplace(id, std::move(label));
}

void Ontology::add_measure_group(const NodeId& id, std::string label) {
  require_fresh(id);
  measure_groups_.insert(id);
  labels_.emplace(id, std::move(label));
}

void Ontology::add_dimension_group(const NodeId& id, std::string label) {
  require_fresh(id);
  dimension_groups_.insert(id);
  labels_.emplace(id, std::move(label));
}

void Ontology::add_isa(const NodeId& child, const NodeId& parent) {
  const bool measure_edge = is_measure(child) && is_measure_group(parent);
  const bool dimension_edge = is_dimension(child) && is_dimension_group(parent);
  if (!contains(child)) throw NotFoundError("is-A child not found: " + child);
  if (!contains(parent)) throw NotFoundError("is-A parent not found: " + parent);
  if (!measure_edge && !dimension_edge) {
    throw ValidationError("is-A edge must be measure->MG or dimension->DG", {child + "->" + parent});
  }
  if (parent_.contains(child)) throw ValidationError("node already has an is-A parent", {child});
  parent_.emplace(child, parent);
  children_[parent].insert(child);
}

void Ontology::add_functional(const NodeId& measure, const NodeId& dimension) {
  if (!contains(measure)) throw NotFoundError("functional edge endpoint not found: " + measure);
  if (!contains(dimension)) throw NotFoundError("functional edge endpoint not found: " + dimension);
  if (!is_measure(measure) || !is_dimension(dimension)) {
    throw ValidationError("functional edge must connect a measure to a dimension", {measure + "->" + dimension});
  }
  functional_.emplace(measure, dimension);
  measure_dims_[measure].insert(dimension);
}

EntityKind Ontology::kind(const NodeId& id) const {
  if (is_measure(id)) return EntityKind::Measure;
  if (is_dimension(id)) return EntityKind::Dimension;
  if (is_measure_group(id)) return EntityKind::MeasureGroup;
  if (is_dimension_group(id)) return EntityKind::DimensionGroup;
  throw NotFoundError("unknown node-id: " + id);
}

const std::string& Ontology::label(const NodeId& id) const {
  auto it = labels_.find(id);
  if (it == labels_.end()) throw NotFoundError("unknown node-id: " + id);
  return it->second;
}

std::optional<NodeId> Ontology::parent(const NodeId& id) const {
  if (!contains(id)) throw NotFoundError("unknown node-id: " + id);
  auto it = parent_.find(id);
  if (it == parent_.end()) return std::nullopt;
  return it->second;
}

const std::set<NodeId>& Ontology::children(const NodeId& group) const {
  if (!contains(group)) throw NotFoundError("unknown node-id: " + group);
  auto it = children_.find(group);
  return it == children_.end() ? kEmptySet : it->second;
}

const std::set<NodeId>& Ontology::dimensions_of(const NodeId& measure) const {
  if (!is_measure(measure)) throw NotFoundError("unknown measure: " + measure);
  auto it = measure_dims_.find(measure);
  return it == measure_dims_.end() ? kEmptySet : it->second;
}

bool Ontology::operator==(const Ontology& other) const {
  return measures_ == other.measures_ && dimensions_ == other.dimensions_ &&
         measure_groups_ == other.measure_groups_ && dimension_groups_ == other.dimension_groups_ &&
         temporal_ == other.temporal_ && labels_ == other.labels_ && parent_ == other.parent_ &&
         functional_ == other.functional_;
}

NodeId parent_measure_group(const Ontology& ont, const NodeId& measure) {
  if (!ont.is_measure(measure)) throw NotFoundError("unknown measure: " + measure);
  return ont.parent(measure).value_or(measure);
}

std::set<NodeId> sibling_measures(const Ontology& ont, const NodeId& measure) {
  if (!ont.is_measure(measure)) throw NotFoundError("unknown measure: " + measure);
  auto mg = ont.parent(measure);
  if (!mg) return {};
  std::set<NodeId> out = ont.children(*mg);
  out.erase(measure);
  return out;
}

std::set<NodeId> connected_dimensions(const Ontology& ont, const std::set<NodeId>& measures) {
  std::set<NodeId> out;
  for (const auto& m : measures) {
    const auto& dims = ont.dimensions_of(m);
    out.insert(dims.begin(), dims.end());
  }
  return out;
}

OntologyGenConfig OntologyGenConfig::hi() { return OntologyGenConfig{}; }

OntologyGenConfig OntologyGenConfig::ahi() {
  OntologyGenConfig cfg;
  cfg.measures = 64 + 265;
  cfg.measure_groups = 12 + 48;
  return cfg;
}

void OntologyGenConfig::validate() const {
  if (measures <= 0 || dimensions <= 0 || measure_groups <= 0 || dimension_groups <= 0) {
    throw ConfigError("ontology counts must be positive");
  }
  if (!(mg_coverage >= 0.0 && mg_coverage <= 1.0)) throw ConfigError("mg_coverage must lie in [0, 1]");
  if (min_measures_per_mg < 1) throw ConfigError("min_measures_per_mg must be >= 1");
  const int covered = static_cast<int>(std::lround(mg_coverage * measures));
  if (static_cast<long>(measure_groups) * min_measures_per_mg > covered) {
    throw ConfigError("infeasible: " + std::to_string(measure_groups) + " MGs x " +
                      std::to_string(min_measures_per_mg) + " children exceeds " + std::to_string(covered) +
                      " covered measures");
  }
  if (dimension_groups > dimensions) throw ConfigError("more dimension groups than dimensions");
  if (dimensions_per_measure < 1 || dimensions_per_measure > dimensions) {
    throw ConfigError("dimensions_per_measure must lie in [1, dimensions]");
  }
}

Ontology generate_synthetic_ontology(const OntologyGenConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  Ontology ont;

  std::vector<NodeId> mgs, dgs, measures, dims;
  for (int i = 1; i <= cfg.measure_groups; ++i) {
    mgs.push_back(padded("mg", i, 3));
    ont.add_measure_group(mgs.back(), label_for("measuregroup", i, kWords, rng));
  }
  for (int i = 1; i <= cfg.dimension_groups; ++i) {
    dgs.push_back(padded("dg", i, 3));
    ont.add_dimension_group(dgs.back(), label_for("dimensiongroup", i, kWords, rng));
  }
  for (int i = 1; i <= cfg.measures; ++i) {
    measures.push_back(padded("m", i, 4));
    ont.add_measure(measures.back(), label_for("measure", i, kWords, rng));
  }

  // Dimension order is shuffled so the temporal dimension of each DG lands at a random index.
  std::vector<int> dim_order(cfg.dimensions);
  std::iota(dim_order.begin(), dim_order.end(), 0);
  std::shuffle(dim_order.begin(), dim_order.end(), rng);
  std::vector<int> dim_group(cfg.dimensions, -1);
  std::uniform_int_distribution<int> pick_dg(0, cfg.dimension_groups - 1);
  for (int r = 0; r < cfg.dimensions; ++r) {
    dim_group[dim_order[r]] = r < cfg.dimension_groups ? r : pick_dg(rng);
  }
  std::vector<bool> temporal(cfg.dimensions, false);
  for (int r = 0; r < cfg.dimension_groups; ++r) temporal[dim_order[r]] = true;

  for (int i = 0; i < cfg.dimensions; ++i) {
    dims.push_back(padded("d", i + 1, 4));
    std::string label = temporal[i] ? label_for("dimension", i + 1, kTimeWords, rng)
                                    : label_for("dimension", i + 1, kWords, rng);
    ont.add_dimension(dims.back(), std::move(label), temporal[i]);
  }
  for (int i = 0; i < cfg.dimensions; ++i) ont.add_isa(dims[i], dgs[dim_group[i]]);

  const int covered = static_cast<int>(std::lround(cfg.mg_coverage * cfg.measures));
  std::vector<int> measure_order(cfg.measures);
  std::iota(measure_order.begin(), measure_order.end(), 0);
  std::shuffle(measure_order.begin(), measure_order.end(), rng);
  std::uniform_int_distribution<int> pick_mg(0, cfg.measure_groups - 1);
  const int guaranteed = cfg.measure_groups * cfg.min_measures_per_mg;
  for (int r = 0; r < covered; ++r) {
    const int mg = r < guaranteed ? r % cfg.measure_groups : pick_mg(rng);
    ont.add_isa(measures[measure_order[r]], mgs[mg]);
  }

  std::vector<int> temporal_ids, plain_ids;
  for (int i = 0; i < cfg.dimensions; ++i) (temporal[i] ? temporal_ids : plain_ids).push_back(i);
  for (int m = 0; m < cfg.measures; ++m) {
    std::uniform_int_distribution<std::size_t> pick_t(0, temporal_ids.size() - 1);
    ont.add_functional(measures[m], dims[temporal_ids[pick_t(rng)]]);
    std::vector<int> pool = plain_ids;
    const std::size_t want = std::min<std::size_t>(cfg.dimensions_per_measure - 1, pool.size());
    // Partial Fisher-Yates: the first `want` entries become a uniform sample.
    for (std::size_t k = 0; k < want; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
      ont.add_functional(measures[m], dims[pool[k]]);
    }
  }
  return ont;
}

namespace {

using nlohmann::json;

constexpr int kOntologySchemaVersion = 1;

json entity_array(const Ontology& ont, const std::set<NodeId>& ids, bool with_temporal = false) {
  json arr = json::array();
  for (const auto& id : ids) {
    json e = {{"id", id}, {"label", ont.label(id)}};
    if (with_temporal && ont.is_temporal(id)) e["temporal"] = true;
    arr.push_back(std::move(e));
  }
  return arr;
}

const json& require(const json& obj, const char* field, const std::string& locus) {
  if (!obj.is_object()) throw ParseError(locus, "expected an object");
  auto it = obj.find(field);
  if (it == obj.end()) throw ParseError(locus.empty() ? field : locus + "." + field, "missing required field");
  return *it;
}

std::string require_string(const json& obj, const char* field, const std::string& locus) {
  const json& v = require(obj, field, locus);
  if (!v.is_string()) throw ParseError(locus + "." + field, "expected a string");
  return v.get<std::string>();
}

const json& require_array(const json& obj, const char* field) {
  const json& v = require(obj, field, "");
  if (!v.is_array()) throw ParseError(field, "expected an array");
  return v;
}

}  // namespace

std::string ontology_to_json(const Ontology& ont) {
  json doc;
  doc["version"] = kOntologySchemaVersion;
  doc["measures"] = entity_array(ont, ont.measures());
  doc["dimensions"] = entity_array(ont, ont.dimensions(), true);
  doc["measure_groups"] = entity_array(ont, ont.measure_groups());
  doc["dimension_groups"] = entity_array(ont, ont.dimension_groups());
  json isa = json::array();
  for (const auto& [child, parent] : ont.isa_edges()) isa.push_back({{"child", child}, {"parent", parent}});
  doc["isa_edges"] = std::move(isa);
  json fn = json::array();
  for (const auto& [m, d] : ont.functional_edges()) fn.push_back({{"measure", m}, {"dimension", d}});
  doc["functional_edges"] = std::move(fn);
  return doc.dump(2) + "\n";
}

Ontology ontology_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("byte " + std::to_string(e.byte), e.what());
  }
  const json& version = require(doc, "version", "");
  if (!version.is_number_integer() || version.get<int>() != kOntologySchemaVersion) {
    throw ParseError("version", "unsupported ontology schema version");
  }

  Ontology ont;
  auto load_entities = [&](const char* field, auto&& add) {
    const json& arr = require_array(doc, field);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string locus = std::string(field) + "[" + std::to_string(i) + "]";
      const std::string id = require_string(arr[i], "id", locus);
      const std::string label = require_string(arr[i], "label", locus);
      try {
        add(arr[i], id, label);
      } catch (const ParseError&) {
        throw;
      } catch (const Error& e) {
        throw ParseError(locus, e.what());
      }
    }
  };
  load_entities("measures", [&](const json&, const NodeId& id, const std::string& l) { ont.add_measure(id, l); });
  load_entities("dimensions", [&](const json& e, const NodeId& id, const std::string& l) {
    bool temporal = false;
    if (auto it = e.find("temporal"); it != e.end()) {
      if (!it->is_boolean()) throw ParseError("temporal", "expected a boolean");
      temporal = it->get<bool>();
    }
    ont.add_dimension(id, l, temporal);
  });
  load_entities("measure_groups",
                [&](const json&, const NodeId& id, const std::string& l) { ont.add_measure_group(id, l); });
  load_entities("dimension_groups",
                [&](const json&, const NodeId& id, const std::string& l) { ont.add_dimension_group(id, l); });

  const json& isa = require_array(doc, "isa_edges");
  for (std::size_t i = 0; i < isa.size(); ++i) {
    const std::string locus = "isa_edges[" + std::to_string(i) + "]";
    const std::string child = require_string(isa[i], "child", locus);
    const std::string parent = require_string(isa[i], "parent", locus);
    try {
      ont.add_isa(child, parent);
    } catch (const Error& e) {
      throw ParseError(locus, e.what());
    }
  }
  const json& fn = require_array(doc, "functional_edges");
  for (std::size_t i = 0; i < fn.size(); ++i) {
    const std::string locus = "functional_edges[" + std::to_string(i) + "]";
    const std::string m = require_string(fn[i], "measure", locus);
    const std::string d = require_string(fn[i], "dimension", locus);
    try {
      ont.add_functional(m, d);
    } catch (const Error& e) {
      throw ParseError(locus, e.what());
    }
  }
  return ont;
}

void save_ontology(const Ontology& ont, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);
  out << ontology_to_json(ont);
  if (!out) throw Error("write failed: " + path);
}

Ontology load_ontology(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open ontology file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return ontology_from_json(buf.str());
}

}  // namespace gbi
