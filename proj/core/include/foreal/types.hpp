#pragma once

#include <cstdint>

namespace foreal {

using TokenId = std::int32_t;

// Which model emitted a token.
enum class Source : std::uint8_t { Leader, Draft };

inline const char* to_string(Source s) {
  return s == Source::Leader ? "L" : "D";
}

}  // namespace foreal
