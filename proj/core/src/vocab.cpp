#include "foreal/vocab.hpp"

#include <algorithm>

#include "foreal/errors.hpp"

namespace foreal {

const std::string& Vocabulary::text(TokenId id) const {
  if (!contains(id)) throw ContractError("token id out of vocabulary");
  return token_text[static_cast<std::size_t>(id)];
}

bool Vocabulary::is_eos(TokenId id) const {
  return std::binary_search(eos_ids.begin(), eos_ids.end(), id);
}

void Vocabulary::validate() const {
  if (token_text.empty()) throw ValidationError("vocabulary is empty");
  if (!std::is_sorted(eos_ids.begin(), eos_ids.end())) {
    throw ValidationError("eos ids must be sorted");
  }
  for (TokenId id : eos_ids) {
    if (!contains(id)) throw ValidationError("eos id out of vocabulary");
  }
}

bool Vocabulary::same_token_space(const Vocabulary& other) const {
  return token_text == other.token_text;
}

std::vector<TokenId> greedy_tokenize(const Vocabulary& vocab,
                                     std::string_view text) {
  std::vector<TokenId> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t best_len = 0;
    TokenId best_id = -1;
    for (std::size_t id = 0; id < vocab.token_text.size(); ++id) {
      const std::string& tok = vocab.token_text[id];
      if (tok.empty() || tok.size() <= best_len) continue;
      if (text.compare(pos, tok.size(), tok) == 0) {
        best_len = tok.size();
        best_id = static_cast<TokenId>(id);
      }
    }
    if (best_id < 0) {
      throw ValidationError("untokenizable input at byte offset " +
                            std::to_string(pos));
    }
    out.push_back(best_id);
    pos += best_len;
  }
  return out;
}

std::string detokenize(const Vocabulary& vocab, std::span<const TokenId> ids) {
  std::string out;
  for (TokenId id : ids) out += vocab.text(id);
  return out;
}

}  // namespace foreal
