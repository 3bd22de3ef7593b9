#include "foreal/provider.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "foreal/errors.hpp"

namespace foreal {

namespace {

class ToyModel final : public ModelProvider {
 public:
  explicit ToyModel(ToyModelSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
  }

  TokenDistribution next_distribution(std::span<const TokenId> context,
                                      std::uint32_t top_k) override {
    if (context.empty()) throw ContractError("toy model: empty context");
    for (TokenId id : context) {
      if (!spec_.vocabulary.contains(id)) {
        throw ContractError("toy model: context id out of vocabulary");
      }
    }
    const ToyRule* best = nullptr;
    for (const ToyRule& r : spec_.rules) {
      if (r.suffix.size() > context.size()) continue;
      if (best && r.suffix.size() <= best->suffix.size()) continue;
      if (std::equal(r.suffix.begin(), r.suffix.end(),
                     context.end() - static_cast<std::ptrdiff_t>(r.suffix.size()))) {
        best = &r;
      }
    }
    TokenDistribution dist = best ? best->dist : spec_.default_dist;
    dist.truncate(top_k);
    return dist;
  }

  const Vocabulary& vocab() const override { return spec_.vocabulary; }
  const ModelArchSpec& arch() const override { return spec_.arch; }
  std::string kind() const override { return "toy"; }

 private:
  ToyModelSpec spec_;
};

void validate_dist(const TokenDistribution& dist, const Vocabulary& vocab,
                   const char* what) {
  for (const DistEntry& e : dist.entries) {
    if (!vocab.contains(e.id)) {
      throw ValidationError(std::string(what) + ": token id out of vocabulary");
    }
    if (e.prob <= 0.0) {
      throw ValidationError(std::string(what) + ": non-positive probability");
    }
  }
}

TokenDistribution parse_dist(const nlohmann::json& j) {
  TokenDistribution dist;
  for (const auto& pair : j) {
    dist.entries.push_back(
        {pair.at(0).get<TokenId>(), pair.at(1).get<double>()});
  }
  dist.canonicalize();
  return dist;
}

}  // namespace

void ToyModelSpec::validate() const {
  vocabulary.validate();
  arch.validate();
  if (default_dist.empty()) {
    throw ValidationError("toy spec: default distribution is empty");
  }
  validate_dist(default_dist, vocabulary, "toy spec default");
  for (const ToyRule& r : rules) {
    if (r.dist.empty()) throw ValidationError("toy spec: rule with empty dist");
    validate_dist(r.dist, vocabulary, "toy spec rule");
    for (TokenId id : r.suffix) {
      if (!vocabulary.contains(id)) {
        throw ValidationError("toy spec: rule suffix id out of vocabulary");
      }
    }
  }
}

ModelHandle build_toy_model(ToyModelSpec spec) {
  for (ToyRule& r : spec.rules) r.dist.canonicalize();
  spec.default_dist.canonicalize();
  return std::make_shared<ToyModel>(std::move(spec));
}

ToyModelSpec load_toy_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open toy spec: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed toy spec " + path + ": " + e.what());
  }
  ToyModelSpec spec;
  spec.vocabulary.token_text = j.at("vocab").get<std::vector<std::string>>();
  if (j.contains("eos")) {
    spec.vocabulary.eos_ids = j.at("eos").get<std::vector<TokenId>>();
    std::sort(spec.vocabulary.eos_ids.begin(), spec.vocabulary.eos_ids.end());
  }
  if (j.contains("rules")) {
    for (const auto& rj : j.at("rules")) {
      ToyRule r;
      r.suffix = rj.at("suffix").get<std::vector<TokenId>>();
      r.dist = parse_dist(rj.at("dist"));
      spec.rules.push_back(std::move(r));
    }
  }
  spec.default_dist = parse_dist(j.at("default"));
  if (j.contains("arch")) {
    const auto& aj = j.at("arch");
    spec.arch.hidden = aj.at("hidden").get<std::uint64_t>();
    spec.arch.ffn = aj.at("ffn").get<std::uint64_t>();
    spec.arch.heads = aj.at("heads").get<std::uint64_t>();
  }
  spec.validate();
  return spec;
}

std::vector<ToyRule> fit_bigram_rules(const Vocabulary& vocab,
                                      std::span<const TokenId> corpus) {
  std::map<TokenId, std::map<TokenId, std::uint64_t>> counts;
  for (std::size_t i = 0; i + 1 < corpus.size(); ++i) {
    if (!vocab.contains(corpus[i]) || !vocab.contains(corpus[i + 1])) {
      throw ValidationError("bigram corpus id out of vocabulary");
    }
    counts[corpus[i]][corpus[i + 1]] += 1;
  }
  std::vector<ToyRule> rules;
  for (const auto& [prev, nexts] : counts) {
    std::uint64_t total = 0;
    for (const auto& [id, c] : nexts) total += c;
    ToyRule r;
    r.suffix = {prev};
    for (const auto& [id, c] : nexts) {
      r.dist.entries.push_back(
          {id, static_cast<double>(c) / static_cast<double>(total)});
    }
    r.dist.canonicalize();
    rules.push_back(std::move(r));
  }
  return rules;
}

void require_shared_vocabulary(const ModelHandle& a, const ModelHandle& b) {
  if (!a || !b) throw ConfigError("model handle is null");
  if (!a->vocab().same_token_space(b->vocab())) {
    throw ConfigError(
        "leader and draft vocabularies differ; collaborative decoding "
        "requires an identical token space");
  }
}

}  // namespace foreal
