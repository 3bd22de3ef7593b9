#include "foreal/policy.hpp"

#include <algorithm>

#include "foreal/errors.hpp"

namespace foreal {

void PolicyConfig::validate() const {
  if (lead_probability < 0.0 || lead_probability > 1.0) {
    throw ConfigError("lead_probability must be in [0, 1]");
  }
  if (hit_threshold < 1) {
    throw ConfigError("hit_threshold must be >= 1");
  }
  if (max_new_tokens < 1) {
    throw ConfigError("max_new_tokens must be >= 1");
  }
}

std::uint32_t local_position(std::uint64_t t, std::uint64_t sentence_start) {
  if (t < sentence_start) {
    throw ContractError("local_position: token index precedes sentence start");
  }
  return static_cast<std::uint32_t>(t - sentence_start + 1);
}

std::uint32_t update_hits(std::uint32_t h, int delta, std::uint32_t k) {
  if (delta == 0) return 0;
  return std::min(h + 1, k);
}

Source policy_decision(int gate, std::uint32_t lambda, bool transferred,
                       const PolicyConfig& cfg) {
  if (gate != 1) return Source::Draft;
  bool within_lead =
      !cfg.lead_count.has_value() || lambda <= *cfg.lead_count;
  if (within_lead || !transferred) return Source::Leader;
  return Source::Draft;
}

int sample_gate(double p, std::mt19937_64& rng) {
  if (p < 0.0 || p > 1.0) throw ConfigError("gate probability outside [0, 1]");
  // (rng() >> 11) * 2^-53 gives a uniform double in [0, 1).
  double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return u < p ? 1 : 0;
}

bool hit_check_active(std::uint32_t lambda, const PolicyConfig& cfg) {
  if (!cfg.lead_count.has_value()) return false;
  std::uint64_t n = *cfg.lead_count;
  if (cfg.eq4_counting_start) return lambda > n;
  std::uint64_t k = cfg.hit_threshold;
  return n < k || lambda > n - k;
}

bool is_sentence_boundary(std::string_view token_text) {
  return token_text.find_first_of(".?!\n") != std::string_view::npos;
}

}  // namespace foreal
