#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "foreal/flops.hpp"
#include "foreal/sampling.hpp"
#include "foreal/vocab.hpp"

namespace foreal {

// Interface through which the engine queries models. Implementations must
// tolerate concurrent calls from independent sessions; one session issues
// calls strictly sequentially.
class ModelProvider {
 public:
  virtual ~ModelProvider() = default;

  // Top-k next-token distribution at the end of context. Deterministic for
  // a fixed (model, context).
  virtual TokenDistribution next_distribution(std::span<const TokenId> context,
                                              std::uint32_t top_k) = 0;

  virtual const Vocabulary& vocab() const = 0;
  virtual const ModelArchSpec& arch() const = 0;
  virtual std::string kind() const = 0;
};

using ModelHandle = std::shared_ptr<ModelProvider>;

// One lookup rule of a toy model: applies when the context ends with
// `suffix`. Longest matching suffix wins.
struct ToyRule {
  std::vector<TokenId> suffix;
  TokenDistribution dist;
};

struct ToyModelSpec {
  Vocabulary vocabulary;
  std::vector<ToyRule> rules;
  TokenDistribution default_dist;
  ModelArchSpec arch;

  void validate() const;
};

// Deterministic table-driven provider. Identical specs yield providers with
// identical outputs.
ModelHandle build_toy_model(ToyModelSpec spec);

// Toy model spec file:
// {"vocab": [...], "eos": [...], "rules": [{"suffix": [...], "dist":
//  [[id, prob]...]}...], "default": [[id, prob]...], "arch": {...}?}
ToyModelSpec load_toy_spec(const std::string& path);

// Count-based bigram rules over a token corpus, one rule per distinct
// predecessor token.
std::vector<ToyRule> fit_bigram_rules(const Vocabulary& vocab,
                                      std::span<const TokenId> corpus);

// Throws ConfigError unless the two handles share an identical token space.
void require_shared_vocabulary(const ModelHandle& a, const ModelHandle& b);

}  // namespace foreal
