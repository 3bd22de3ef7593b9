#include "support/toy_models.hpp"

#include <map>
#include <random>
#include <string>

namespace fixtures {

using foreal::ModelArchSpec;
using foreal::ToyModelSpec;
using foreal::ToyRule;

TokenDistribution point_dist(TokenId id) {
  TokenDistribution d;
  d.entries.push_back({id, 1.0});
  return d;
}

TokenDistribution uniform_dist(const std::vector<TokenId>& ids) {
  TokenDistribution d;
  for (TokenId id : ids) {
    d.entries.push_back({id, 1.0 / static_cast<double>(ids.size())});
  }
  return d;
}

ChainPair make_chain_pair(std::uint32_t agree_from, std::uint32_t chain_len) {
  Vocabulary vocab;
  for (std::uint32_t i = 0; i < chain_len; ++i) {
    vocab.token_text.push_back("c" + std::to_string(i));
  }
  const TokenId dot = static_cast<TokenId>(chain_len);
  const TokenId eos = dot + 1;
  const TokenId decoy = 0;  // never emitted past the prompt
  vocab.token_text.push_back(".");
  vocab.token_text.push_back("<eos>");
  vocab.eos_ids = {eos};

  auto chain_spec = [&](bool is_draft) {
    ToyModelSpec spec;
    spec.vocabulary = vocab;
    for (std::uint32_t i = 0; i + 1 < chain_len; ++i) {
      // Emitting c_{i+1} happens at local position i + 1.
      TokenId next = static_cast<TokenId>(i + 1);
      TokenId target = next;
      if (is_draft && i + 1 < agree_from) target = decoy;
      spec.rules.push_back({{static_cast<TokenId>(i)}, point_dist(target)});
    }
    spec.rules.push_back(
        {{static_cast<TokenId>(chain_len - 1)}, point_dist(dot)});
    spec.rules.push_back({{dot}, point_dist(eos)});
    spec.default_dist = point_dist(decoy);
    return spec;
  };

  ChainPair pair;
  pair.leader = build_toy_model(chain_spec(false));
  pair.draft = build_toy_model(chain_spec(true));
  pair.prompt = {0};
  return pair;
}

CuePair make_cue_pair() {
  Vocabulary vocab;
  vocab.token_text.push_back("Wait");  // id 0
  for (int i = 1; i <= 9; ++i) {
    vocab.token_text.push_back("w" + std::to_string(i));  // ids 1..9
  }
  const TokenId dot = 10;
  const TokenId eos = 11;
  vocab.token_text.push_back(".");
  vocab.token_text.push_back("<eos>");
  vocab.eos_ids = {eos};

  // Leader opens every sentence "Wait w1 w2 ..."; the draft's argmax
  // diverges at the first two sentence positions ("." -> w1, "Wait" -> w2)
  // and matches the leader everywhere else.
  auto cue_spec = [&](TokenId after_dot, TokenId after_cue) {
    ToyModelSpec spec;
    spec.vocabulary = vocab;
    spec.rules.push_back({{dot}, point_dist(after_dot)});
    spec.rules.push_back({{0}, point_dist(after_cue)});
    for (TokenId i = 1; i < 9; ++i) {
      spec.rules.push_back({{i}, point_dist(i + 1)});
    }
    spec.rules.push_back({{9}, point_dist(dot)});
    spec.default_dist = point_dist(after_dot);
    return spec;
  };

  CuePair pair;
  pair.leader = build_toy_model(cue_spec(0, 1));
  pair.draft = build_toy_model(cue_spec(1, 2));
  pair.prompt = {dot};  // a boundary token, so generation opens a sentence
  pair.cue_id = 0;
  return pair;
}

CyclicPair make_cyclic_pair() {
  Vocabulary vocab;
  vocab.token_text = {"x", ".", "<eos>"};
  vocab.eos_ids = {2};

  ToyModelSpec spec;
  spec.vocabulary = vocab;
  spec.rules.push_back({{0}, point_dist(1)});
  spec.rules.push_back({{1}, point_dist(0)});
  spec.default_dist = point_dist(0);

  CyclicPair pair;
  pair.leader = build_toy_model(spec);
  pair.draft = build_toy_model(spec);
  pair.prompt = {1};
  return pair;
}

Vocabulary random_vocab() {
  Vocabulary vocab;
  for (int i = 0; i < 9; ++i) {
    vocab.token_text.push_back("t" + std::to_string(i));
  }
  vocab.token_text.push_back(".");    // id 9
  vocab.token_text.push_back("\n");   // id 10
  vocab.token_text.push_back("<eos>");  // id 11
  vocab.eos_ids = {11};
  return vocab;
}

ModelHandle make_random_model(std::uint64_t seed, const Vocabulary& vocab) {
  std::mt19937_64 rng(seed);
  const auto v = static_cast<TokenId>(vocab.size());
  std::uniform_int_distribution<TokenId> pick_id(0, v - 1);
  std::uniform_real_distribution<double> pick_w(0.05, 1.0);

  auto random_dist = [&]() {
    std::map<TokenId, double> weights;
    for (int j = 0; j < 5; ++j) weights[pick_id(rng)] += pick_w(rng);
    // Small eos and boundary mass keeps sessions finite-ish but varied.
    weights[9] += 0.4;
    weights[11] += 0.1;
    double total = 0.0;
    for (const auto& [id, w] : weights) total += w;
    TokenDistribution d;
    for (const auto& [id, w] : weights) d.entries.push_back({id, w / total});
    return d;
  };

  ToyModelSpec spec;
  spec.vocabulary = vocab;
  for (TokenId id = 0; id < v; ++id) {
    spec.rules.push_back({{id}, random_dist()});
  }
  spec.default_dist = random_dist();
  return build_toy_model(std::move(spec));
}

}  // namespace fixtures
