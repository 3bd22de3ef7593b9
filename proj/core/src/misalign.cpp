#include "foreal/misalign.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <ostream>

#include "foreal/errors.hpp"
#include "foreal/policy.hpp"

namespace foreal {

namespace {

constexpr std::uint32_t kQueryK = 64;

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::vector<std::uint64_t> AlignmentReport::aligned_indices() const {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i] == 0) out.push_back(i + 1);
  }
  return out;
}

std::vector<TokenId> AlignmentReport::aligned_tokens() const {
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i] == 0) out.push_back(response[i]);
  }
  return out;
}

std::vector<TokenId> AlignmentReport::misaligned_tokens() const {
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i] != 0) out.push_back(response[i]);
  }
  return out;
}

AlignmentReport aligned_positions(const ModelHandle& leader,
                                  const ModelHandle& draft,
                                  std::span<const TokenId> prompt,
                                  std::span<const TokenId> response) {
  require_shared_vocabulary(leader, draft);
  if (prompt.empty()) throw ContractError("aligned_positions: empty prompt");

  AlignmentReport report;
  report.response_len = response.size();
  report.response = {response.begin(), response.end()};
  report.flags.resize(response.size());

  std::vector<TokenId> context(prompt.begin(), prompt.end());
  for (std::size_t i = 0; i < response.size(); ++i) {
    TokenId la = leader->next_distribution(context, kQueryK).argmax();
    TokenId da = draft->next_distribution(context, kQueryK).argmax();
    report.flags[i] = (la == da) ? 0 : 1;
    context.push_back(response[i]);
  }
  return report;
}

std::vector<TokenId> greedy_response(const ModelHandle& model,
                                     std::span<const TokenId> prompt,
                                     std::uint32_t max_new_tokens) {
  if (prompt.empty()) throw ContractError("greedy_response: empty prompt");
  std::vector<TokenId> context(prompt.begin(), prompt.end());
  std::vector<TokenId> out;
  for (std::uint32_t i = 0; i < max_new_tokens; ++i) {
    TokenId token = model->next_distribution(context, kQueryK).argmax();
    out.push_back(token);
    context.push_back(token);
    if (model->vocab().is_eos(token)) break;
  }
  return out;
}

MisalignmentCurve response_level_curve(
    const std::vector<AlignmentReport>& reports, std::uint64_t bucket_width) {
  if (reports.empty()) throw ContractError("response_level_curve: no reports");
  if (bucket_width < 1) throw ConfigError("bucket_width must be >= 1");

  std::uint64_t max_len = 0;
  for (const AlignmentReport& r : reports) {
    max_len = std::max(max_len, r.response_len);
  }
  MisalignmentCurve curve;
  curve.granularity = CurveGranularity::ResponseLevel;
  curve.bucket_width = bucket_width;

  for (std::uint64_t start = 1; start <= max_len; start += bucket_width) {
    std::uint64_t stop = std::min(max_len, start + bucket_width - 1);
    std::uint64_t support = 0;
    std::uint64_t ones = 0;
    for (const AlignmentReport& r : reports) {
      for (std::uint64_t x = start; x <= std::min(stop, r.response_len); ++x) {
        ++support;
        ones += r.flags[x - 1];
      }
    }
    if (support == 0) continue;
    curve.points.push_back(
        {start, static_cast<double>(ones) / static_cast<double>(support),
         support});
  }
  return curve;
}

MisalignmentCurve sentence_level_curve(
    const std::vector<AlignmentReport>& reports,
    const std::vector<std::vector<std::uint64_t>>& sentence_starts) {
  if (reports.empty()) throw ContractError("sentence_level_curve: no reports");
  if (sentence_starts.size() != reports.size()) {
    throw ValidationError("one sentence segmentation required per report");
  }

  // Per-sentence flag spans across all reports.
  std::vector<std::pair<const std::uint8_t*, std::uint64_t>> sentences;
  for (std::size_t r = 0; r < reports.size(); ++r) {
    const AlignmentReport& report = reports[r];
    const std::vector<std::uint64_t>& starts = sentence_starts[r];
    if (report.response_len == 0) {
      if (!starts.empty()) throw ValidationError("segmentation of empty response");
      continue;
    }
    if (starts.empty() || starts[0] != 0 ||
        !std::is_sorted(starts.begin(), starts.end()) ||
        starts.back() >= report.response_len) {
      throw ValidationError("inconsistent sentence segmentation");
    }
    for (std::size_t i = 0; i < starts.size(); ++i) {
      std::uint64_t begin = starts[i];
      std::uint64_t end =
          i + 1 < starts.size() ? starts[i + 1] : report.response_len;
      sentences.emplace_back(report.flags.data() + begin, end - begin);
    }
  }

  std::uint64_t max_len = 0;
  for (const auto& [_, len] : sentences) max_len = std::max(max_len, len);

  MisalignmentCurve curve;
  curve.granularity = CurveGranularity::SentenceLevel;
  for (std::uint64_t x = 1; x <= max_len; ++x) {
    std::uint64_t support = 0;
    std::uint64_t ones = 0;
    for (const auto& [flags, len] : sentences) {
      if (len >= x) {
        ++support;
        ones += flags[x - 1];
      }
    }
    curve.points.push_back(
        {x, static_cast<double>(ones) / static_cast<double>(support), support});
  }
  return curve;
}

std::vector<std::uint64_t> segment_sentences(const Vocabulary& vocab,
                                             std::span<const TokenId> response) {
  std::vector<std::uint64_t> starts;
  if (response.empty()) return starts;
  starts.push_back(0);
  for (std::size_t i = 0; i + 1 < response.size(); ++i) {
    if (is_sentence_boundary(vocab.text(response[i]))) {
      starts.push_back(i + 1);
    }
  }
  return starts;
}

std::vector<std::pair<std::string, std::uint64_t>> misaligned_frequency_table(
    const std::vector<AlignmentReport>& reports, const Vocabulary& vocab,
    std::size_t top_m) {
  if (reports.empty()) throw ContractError("frequency table: no reports");
  if (top_m < 1) throw ConfigError("top_m must be >= 1");

  std::map<TokenId, std::uint64_t> counts;
  for (const AlignmentReport& r : reports) {
    for (TokenId id : r.misaligned_tokens()) counts[id] += 1;
  }
  std::vector<std::pair<std::string, std::uint64_t>> table;
  for (const auto& [id, count] : counts) {
    table.emplace_back(vocab.text(id), count);
  }
  std::sort(table.begin(), table.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (table.size() > top_m) table.resize(top_m);
  return table;
}

void write_curve_csv(const MisalignmentCurve& curve, std::ostream& out) {
  out << "position,rate,support\n";
  for (const CurvePoint& p : curve.points) {
    out << p.position << ',' << format_double(p.rate) << ',' << p.support
        << '\n';
  }
}

void write_frequency_csv(
    const std::vector<std::pair<std::string, std::uint64_t>>& table,
    std::ostream& out) {
  out << "token,count\n";
  for (const auto& [text, count] : table) {
    out << text << ',' << count << '\n';
  }
}

}  // namespace foreal
