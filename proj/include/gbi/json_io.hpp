#pragma once

// nlohmann::json conversions for the domain types that appear on the wire and
// in files. Parsing throws ParseError with a field locus.

#include <string>

#include <json.hpp>

#include "gbi/pattern.hpp"
#include "gbi/random.hpp"
#include "gbi/workload.hpp"

namespace gbi {

nlohmann::json pattern_to_json(const BiPattern& p);
/// `locus` prefixes field names in parse errors.
BiPattern pattern_from_json(const nlohmann::json& j, const std::string& locus = "pattern");

nlohmann::json distribution_to_json(const DistributionSpec& d);
DistributionSpec distribution_from_json(const nlohmann::json& j, const std::string& locus = "distribution");

nlohmann::json workload_config_to_json(const WorkloadConfig& cfg);
/// Fields absent from `j` keep their defaults.
WorkloadConfig workload_config_from_json(const nlohmann::json& j);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace gbi
