#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "foreal/provider.hpp"

namespace foreal {

// Per-position alignment of one (leader, draft, response) triple.
// Positions are 1-based; flags[t-1] = 1 means position t is misaligned.
struct AlignmentReport {
  std::uint64_t response_len = 0;
  std::vector<std::uint8_t> flags;  // 1 = misaligned
  std::vector<TokenId> response;

  std::vector<std::uint64_t> aligned_indices() const;   // 1-based
  std::vector<TokenId> aligned_tokens() const;
  std::vector<TokenId> misaligned_tokens() const;
};

enum class CurveGranularity : std::uint8_t { ResponseLevel, SentenceLevel };

struct CurvePoint {
  std::uint64_t position = 0;  // 1-based; bucket start when bucketed
  double rate = 0.0;
  std::uint64_t support = 0;
};

struct MisalignmentCurve {
  std::vector<CurvePoint> points;
  CurveGranularity granularity = CurveGranularity::ResponseLevel;
  std::uint64_t bucket_width = 1;
};

// For each position t in 1..T, queries both models on
// <prompt; response_<t>> and marks t aligned iff the argmaxes agree
// (ascending-id tie-break).
AlignmentReport aligned_positions(const ModelHandle& leader,
                                  const ModelHandle& draft,
                                  std::span<const TokenId> prompt,
                                  std::span<const TokenId> response);

// Argmax generation with the leader; the default reference response.
std::vector<TokenId> greedy_response(const ModelHandle& model,
                                     std::span<const TokenId> prompt,
                                     std::uint32_t max_new_tokens);

// rate at position x = mean of flags[x] over all reports with length >= x,
// aggregated into buckets of bucket_width positions.
MisalignmentCurve response_level_curve(
    const std::vector<AlignmentReport>& reports, std::uint64_t bucket_width = 64);

// rate at position x = mean flag of the x-th token over all sentences (across
// reports) with length >= x. sentence_starts are 0-based per report.
MisalignmentCurve sentence_level_curve(
    const std::vector<AlignmentReport>& reports,
    const std::vector<std::vector<std::uint64_t>>& sentence_starts);

// Sentence segmentation of a report's response via is_sentence_boundary.
std::vector<std::uint64_t> segment_sentences(const Vocabulary& vocab,
                                             std::span<const TokenId> response);

// Top-m misaligned tokens by count descending, text ascending tie-break.
std::vector<std::pair<std::string, std::uint64_t>> misaligned_frequency_table(
    const std::vector<AlignmentReport>& reports, const Vocabulary& vocab,
    std::size_t top_m);

// CSV emission: "position,rate,support" / "token,count"; UTF-8, LF endings.
void write_curve_csv(const MisalignmentCurve& curve, std::ostream& out);
void write_frequency_csv(
    const std::vector<std::pair<std::string, std::uint64_t>>& table,
    std::ostream& out);

}  // namespace foreal
