#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "foreal/types.hpp"

namespace foreal {

struct DistEntry {
  TokenId id;
  double prob;
};

// Top-K next-token distribution from one model at one position. Entries are
// sorted by probability descending with ascending-id tie-break; entries[0]
// is the argmax. Probabilities are positive and sum to at most 1.
struct TokenDistribution {
  std::vector<DistEntry> entries;

  bool empty() const { return entries.empty(); }
  TokenId argmax() const;

  // Sort into canonical order and drop non-positive entries.
  void canonicalize();

  // Probability of a specific id, 0 if not present.
  double prob_of(TokenId id) const;

  void truncate(std::size_t top_k);
};

struct SamplingParams {
  double temperature = 0.6;
  double top_p = 0.95;
  std::uint32_t top_k = 40;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError

  bool operator==(const SamplingParams&) const = default;
};

// Uniform double in [0, 1); consumes one generator value.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Temperature scaling, then top-k truncation, then nucleus truncation,
// renormalize and draw. Consumes exactly one value from the generator.
// temperature below 1e-7 degenerates to argmax (still consumes one draw).
TokenId sample_token(const TokenDistribution& dist, const SamplingParams& params,
                     std::mt19937_64& rng);

}  // namespace foreal
