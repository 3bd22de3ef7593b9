#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "foreal/types.hpp"

namespace foreal {

// Token id space shared by the two models of a session. Ids are dense in
// [0, size()).
struct Vocabulary {
  std::vector<std::string> token_text;
  std::vector<TokenId> eos_ids;  // sorted, unique

  std::size_t size() const { return token_text.size(); }
  const std::string& text(TokenId id) const;
  bool is_eos(TokenId id) const;
  bool contains(TokenId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < token_text.size();
  }

  void validate() const;  // throws ValidationError

  // Size and token_text must match exactly for two models to collaborate.
  bool same_token_space(const Vocabulary& other) const;
};

// Greedy longest-match tokenization against literal token texts. Throws
// ValidationError when no token matches at some offset.
std::vector<TokenId> greedy_tokenize(const Vocabulary& vocab,
                                     std::string_view text);

std::string detokenize(const Vocabulary& vocab, std::span<const TokenId> ids);

}  // namespace foreal
