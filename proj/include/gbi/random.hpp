#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace gbi {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a. Stable across platforms; used for token hashing and seed tags.
constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for one pipeline stage: splitmix64(master ^ fnv1a64(tag)) mixed with `index`.
/// Every stage of a run derives its seed this way from the single master seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                    std::uint64_t index = 0) noexcept {
  return splitmix64(splitmix64(master ^ fnv1a64(tag)) + index);
}

enum class DistributionFamily { Exponential, Gamma, Uniform, Normal };

/// A parametric distribution from the workload tables.
/// Exponential(mean), Gamma(shape, scale), Uniform(lo, hi), Normal(mean, stddev).
struct DistributionSpec {
  DistributionFamily family = DistributionFamily::Uniform;
  double a = 0.0;
  double b = 1.0;

  static DistributionSpec exponential(double mean) { return {DistributionFamily::Exponential, mean, 0.0}; }
  static DistributionSpec gamma(double shape, double scale) { return {DistributionFamily::Gamma, shape, scale}; }
  static DistributionSpec uniform(double lo, double hi) { return {DistributionFamily::Uniform, lo, hi}; }
  static DistributionSpec normal(double mean, double stddev) { return {DistributionFamily::Normal, mean, stddev}; }

  /// Throws ConfigError when parameters are outside the family's legal range.
  void validate() const;

  /// Draws one value. Normal draws are returned as-is; callers needing
  /// nonnegative weights take the absolute value.
  double sample(Rng& rng) const;

  bool operator==(const DistributionSpec&) const = default;
};

std::string to_string(DistributionFamily family);
DistributionFamily parse_distribution_family(std::string_view name);

}  // namespace gbi
