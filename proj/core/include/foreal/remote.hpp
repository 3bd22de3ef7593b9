#pragma once

#include <optional>
#include <string>

#include "foreal/provider.hpp"

namespace foreal {

// Client for an inference server speaking the top-k wire protocol:
//   GET  <endpoint>/meta  -> {"vocab_size": int, "eos_ids": [int...],
//                             "arch": {"hidden": int, "ffn": int, "heads": int}}
//   POST <endpoint>/topk  <- {"context": [int...], "k": int}
//                         -> {"vocab_size": int,
//                             "top": [{"id": int, "logprob": float}...]}
// The client exponentiates log-probabilities and renormalizes over the
// returned set. Transport failures are retried; malformed bodies raise
// ProtocolError.
//
// The server exchanges token ids only, so sentence-boundary detection needs
// token texts from elsewhere. `vocab_path`, when given, names a JSON file
// {"vocab": [string...], "eos": [int...]} whose size must match the
// handshake's vocab_size. Without it the vocabulary carries empty texts and
// the handle can serve analysis but not boundary-driven decoding.
ModelHandle connect_remote_model(const std::string& endpoint,
                                 const std::optional<std::string>& vocab_path =
                                     std::nullopt);

// One-shot query helper used by the provider and directly testable against
// a mock server.
TokenDistribution remote_next_distribution(const std::string& endpoint,
                                           std::span<const TokenId> context,
                                           std::uint32_t top_k,
                                           std::size_t vocab_size);

}  // namespace foreal
