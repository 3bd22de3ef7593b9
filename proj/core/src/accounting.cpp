#include "foreal/accounting.hpp"

#include "foreal/errors.hpp"

namespace foreal {

const char* to_string(AccountingMode m) {
  return m == AccountingMode::GeneratorOnly ? "generator-only" : "full";
}

AccountingMode accounting_mode_from_string(const std::string& s) {
  if (s == "generator-only") return AccountingMode::GeneratorOnly;
  if (s == "full") return AccountingMode::Full;
  throw ConfigError("unknown accounting mode: " + s);
}

Flops MixedFlops::total() const {
  Flops t = leader + draft;
  if (t < leader) throw OverflowError("mixed FLOPs total overflow");
  return t;
}

MixedFlops mixed_flops_range(const DecodeTrace& trace,
                             const ModelArchSpec& leader_arch,
                             const ModelArchSpec& draft_arch,
                             AccountingMode mode, std::size_t begin,
                             std::size_t end) {
  if (!trace.valid) throw ValidationError("mixed_flops: trace flagged invalid");
  if (begin > end || end > trace.records.size()) {
    throw ContractError("mixed_flops_range: bad record range");
  }
  MixedFlops out;
  if (begin == end) return out;

  if (begin == 0) {
    // The prompt is processed once, by whichever model opens generation.
    Flops prefill = trace.records[0].source == Source::Leader
                        ? flops_prefill(trace.prompt_len, leader_arch)
                        : flops_prefill(trace.prompt_len, draft_arch);
    (trace.records[0].source == Source::Leader ? out.leader : out.draft) +=
        prefill;
  }

  for (std::size_t i = begin; i < end; ++i) {
    const TokenRecord& rec = trace.records[i];
    // KV cache length when this token was emitted.
    std::uint64_t ctx = trace.prompt_len + rec.t;
    if (rec.source == Source::Leader) {
      out.leader += flops_decode(ctx, leader_arch);
    } else {
      out.draft += flops_decode(ctx, draft_arch);
    }
    if (mode == AccountingMode::Full) {
      if (rec.source == Source::Leader) {
        // Draft ran either an agreement-check pass or a catch-up pass here.
        out.draft += flops_decode(ctx, draft_arch);
      } else {
        out.leader += flops_decode(ctx, leader_arch);
      }
    }
  }
  return out;
}

MixedFlops mixed_flops(const DecodeTrace& trace, const ModelArchSpec& leader_arch,
                       const ModelArchSpec& draft_arch, AccountingMode mode) {
  return mixed_flops_range(trace, leader_arch, draft_arch, mode, 0,
                           trace.records.size());
}

}  // namespace foreal
