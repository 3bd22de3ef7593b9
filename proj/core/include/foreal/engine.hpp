#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "foreal/policy.hpp"
#include "foreal/provider.hpp"

namespace foreal {

enum class StopReason : std::uint8_t { Eos, MaxTokens, ProviderFailure };

const char* to_string(StopReason r);

// Per-token provenance. t and s are 0-based; lambda is 1-based within the
// sentence.
struct TokenRecord {
  std::uint64_t t = 0;
  std::uint64_t s = 0;
  std::uint32_t lambda = 1;
  Source source = Source::Draft;
  TokenId token_id = 0;
  int gate = 0;
  std::uint32_t hit_counter_after = 0;
  std::optional<int> delta;  // present only when an agreement check ran
  std::optional<TokenId> leader_argmax;
  std::optional<TokenId> draft_argmax;
  double logprob_chosen = 0.0;

  bool operator==(const TokenRecord&) const = default;
};

struct DecodeTrace {
  std::uint64_t prompt_len = 0;
  std::vector<TokenId> prompt;  // kept so a trace can be replayed standalone
  std::vector<TokenRecord> records;
  StopReason stop_reason = StopReason::MaxTokens;
  std::vector<std::uint64_t> sentence_starts;  // generation-local, starts at 0
  PolicyConfig config;
  SamplingParams sampling;
  bool valid = true;  // false when a provider failure truncated the session

  std::size_t sentence_count() const { return sentence_starts.size(); }
  std::vector<TokenId> token_ids() const;

  bool operator==(const DecodeTrace&) const = default;
};

// The collaborative session loop. Deterministic given (providers, prompt,
// cfg, params.seed). Token sampling and gate sampling consume independent
// seeded streams, so degenerate configurations reproduce the corresponding
// single-model loop token for token.
DecodeTrace decode(const ModelHandle& leader, const ModelHandle& draft,
                   std::span<const TokenId> prompt, const PolicyConfig& cfg,
                   const SamplingParams& params);

// Single-model reference loop sharing the sampling path of decode().
struct SingleTrace {
  std::vector<TokenId> tokens;
  StopReason stop_reason = StopReason::MaxTokens;
};
SingleTrace decode_single(const ModelHandle& model,
                          std::span<const TokenId> prompt,
                          const SamplingParams& params,
                          std::uint32_t max_new_tokens);

// Fraction of records emitted by the Leader.
double lead_ratio(const DecodeTrace& trace);

// Sum of log P_{source}(y_t | c_t) over the sentence span, each factor from
// the model that emitted the token.
double sentence_likelihood(const DecodeTrace& trace, std::uint64_t s);

// Re-runs decode with the same inputs and compares field by field.
bool replay_check(const DecodeTrace& trace, const ModelHandle& leader,
                  const ModelHandle& draft);

// Re-derives policy state from boundary and delta events and checks every
// record's source, lambda and sentence bookkeeping. Throws ValidationError
// on the first inconsistency.
void validate_trace(const DecodeTrace& trace, const Vocabulary& vocab);

// JSON Lines trace format: a header line with config/sampling/prompt_len
// followed by one record per line. Write -> read -> write is byte-identical.
void write_trace(const DecodeTrace& trace, std::ostream& out);
void write_trace_file(const DecodeTrace& trace, const std::string& path);
DecodeTrace read_trace(std::istream& in);
DecodeTrace read_trace_file(const std::string& path);

}  // namespace foreal
