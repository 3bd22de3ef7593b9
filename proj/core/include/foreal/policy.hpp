#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

#include "foreal/types.hpp"

namespace foreal {

// The knobs governing the Leader/Draft switch. lead_count empty means
// unbounded (the Leader never yields within a led sentence).
struct PolicyConfig {
  std::optional<std::uint32_t> lead_count = 15;
  double lead_probability = 1.0;
  std::uint32_t hit_threshold = 5;
  bool force_first_lead = true;
  std::uint32_t max_new_tokens = 16384;
  // Compatibility switch: start agreement checks at lambda > n instead of
  // lambda > n - k. Off by default.
  bool eq4_counting_start = false;
  // Keep the Leader unconditionally until the first newline boundary.
  bool first_paragraph_full = false;

  void validate() const;  // throws ConfigError

  bool operator==(const PolicyConfig&) const = default;
};

// Per-sentence policy state, reset at every sentence boundary.
struct SentenceState {
  std::uint64_t sentence_index = 0;
  std::uint64_t sentence_start = 0;
  int gate = 0;
  std::uint32_t hit_counter = 0;
  bool transferred = false;
};

// Local position of a token within its sentence: t - sentence_start + 1.
std::uint32_t local_position(std::uint64_t t, std::uint64_t sentence_start);

// 1 iff the two argmax token ids coincide.
inline int agreement_indicator(TokenId draft_argmax, TokenId leader_argmax) {
  return draft_argmax == leader_argmax ? 1 : 0;
}

// Saturating consecutive-run counter: a hit extends the run up to k, a miss
// resets it. Reaching k means the handoff condition is met.
std::uint32_t update_hits(std::uint32_t h, int delta, std::uint32_t k);

// Token-level source selection. Leader iff the sentence is gated and either
// the local position is still within the lead window or control has not yet
// transferred. Transfer is sticky: no Leader re-entry within a sentence.
Source policy_decision(int gate, std::uint32_t lambda, bool transferred,
                       const PolicyConfig& cfg);

// One Bernoulli(p) draw. Consumes exactly one value from the generator.
int sample_gate(double p, std::mt19937_64& rng);

// Whether the agreement check runs at this local position.
bool hit_check_active(std::uint32_t lambda, const PolicyConfig& cfg);

// True iff the decoded token text contains '.', '?', '!' or '\n'.
bool is_sentence_boundary(std::string_view token_text);

}  // namespace foreal
