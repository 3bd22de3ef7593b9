#pragma once

#include "foreal/engine.hpp"
#include "foreal/flops.hpp"

namespace foreal {

enum class AccountingMode : std::uint8_t {
  // Prompt prefill charged to the model that emits the first token; each
  // emitted token charged as one decode pass at its context length to its
  // emitting model.
  GeneratorOnly,
  // Additionally charges Draft agreement-check passes and each model's
  // catch-up over positions where it ran no forward pass, upper-bounded at
  // one decode pass per position.
  Full,
};

const char* to_string(AccountingMode m);
AccountingMode accounting_mode_from_string(const std::string& s);

struct MixedFlops {
  Flops leader = 0;
  Flops draft = 0;
  Flops total() const;
};

MixedFlops mixed_flops(const DecodeTrace& trace, const ModelArchSpec& leader_arch,
                       const ModelArchSpec& draft_arch, AccountingMode mode);

// Accounting for the half-open record range [begin, end). Prefill is charged
// only when the range starts at the first record; splitting a trace at any
// boundary and summing the pieces reproduces the whole-trace value.
MixedFlops mixed_flops_range(const DecodeTrace& trace,
                             const ModelArchSpec& leader_arch,
                             const ModelArchSpec& draft_arch,
                             AccountingMode mode, std::size_t begin,
                             std::size_t end);

}  // namespace foreal
