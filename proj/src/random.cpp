#include "gbi/random.hpp"

#include <cmath>

#include "gbi/error.hpp"

namespace gbi {

void DistributionSpec::validate() const {
  switch (family) {
    case DistributionFamily::Exponential:
      if (!(a > 0.0)) throw ConfigError("exponential mean must be > 0");
      break;
    case DistributionFamily::Gamma:
      if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("gamma shape and scale must be > 0");
      break;
    case DistributionFamily::Uniform:
      if (!(a <= b)) throw ConfigError("uniform bounds must satisfy lo <= hi");
      break;
    case DistributionFamily::Normal:
      if (!(b > 0.0)) throw ConfigError("normal stddev must be > 0");
      break;
  }
  if (!std::isfinite(a) || !std::isfinite(b)) throw ConfigError("distribution parameters must be finite");
}

double DistributionSpec::sample(Rng& rng) const {
  switch (family) {
    case DistributionFamily::Exponential:
      return std::exponential_distribution<double>(1.0 / a)(rng);
    case DistributionFamily::Gamma:
      return std::gamma_distribution<double>(a, b)(rng);
    case DistributionFamily::Uniform:
      if (a == b) return a;
      return std::uniform_real_distribution<double>(a, b)(rng);
    case DistributionFamily::Normal:
      return std::normal_distribution<double>(a, b)(rng);
  }
  return 0.0;
}

std::string to_string(DistributionFamily family) {
  switch (family) {
    case DistributionFamily::Exponential: return "exponential";
    case DistributionFamily::Gamma: return "gamma";
    case DistributionFamily::Uniform: return "uniform";
    case DistributionFamily::Normal: return "normal";
  }
  return "uniform";
}

DistributionFamily parse_distribution_family(std::string_view name) {
  if (name == "exponential") return DistributionFamily::Exponential;
  if (name == "gamma") return DistributionFamily::Gamma;
  if (name == "uniform") return DistributionFamily::Uniform;
  if (name == "normal") return DistributionFamily::Normal;
  throw ParseError("family", "unknown distribution family '" + std::string(name) + "'");
}

}  // namespace gbi
