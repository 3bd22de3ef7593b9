#include "foreal/remote.hpp"

#include <cmath>
#include <fstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "foreal/errors.hpp"

namespace foreal {

namespace {

constexpr int kTransportRetries = 3;

struct SplitUrl {
  std::string host;  // scheme://host:port
  std::string path_prefix;
};

SplitUrl split_endpoint(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint must include a scheme: " + endpoint);
  }
  auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, ""};
  std::string prefix = endpoint.substr(path_start);
  if (prefix == "/") prefix.clear();
  return {endpoint.substr(0, path_start), prefix};
}

nlohmann::json parse_body(const std::string& body) {
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed response body: ") + e.what());
  }
}

class RemoteModel final : public ModelProvider {
 public:
  RemoteModel(std::string endpoint, Vocabulary vocabulary, ModelArchSpec arch)
      : endpoint_(std::move(endpoint)),
        vocabulary_(std::move(vocabulary)),
        arch_(arch) {}

  TokenDistribution next_distribution(std::span<const TokenId> context,
                                      std::uint32_t top_k) override {
    if (context.empty()) throw ContractError("remote model: empty context");
    for (TokenId id : context) {
      if (!vocabulary_.contains(id)) {
        throw ContractError("remote model: context id out of vocabulary");
      }
    }
    return remote_next_distribution(endpoint_, context, top_k,
                                    vocabulary_.size());
  }

  const Vocabulary& vocab() const override { return vocabulary_; }
  const ModelArchSpec& arch() const override { return arch_; }
  std::string kind() const override { return "remote"; }

 private:
  std::string endpoint_;
  Vocabulary vocabulary_;
  ModelArchSpec arch_;
};

}  // namespace

TokenDistribution remote_next_distribution(const std::string& endpoint,
                                           std::span<const TokenId> context,
                                           std::uint32_t top_k,
                                           std::size_t vocab_size) {
  if (top_k < 1) throw ContractError("remote query: top_k must be >= 1");
  SplitUrl url = split_endpoint(endpoint);
  nlohmann::json req;
  req["context"] = std::vector<TokenId>(context.begin(), context.end());
  req["k"] = top_k;
  std::string body = req.dump();

  httplib::Result res;
  for (int attempt = 0; attempt < kTransportRetries; ++attempt) {
    httplib::Client client(url.host);
    client.set_connection_timeout(5);
    client.set_read_timeout(30);
    res = client.Post(url.path_prefix + "/topk", body, "application/json");
    if (res) break;
  }
  if (!res) {
    throw ProviderError("transport failure querying " + endpoint,
                        /*retryable=*/true);
  }
  if (res->status != 200) {
    throw ProviderError("server returned HTTP " + std::to_string(res->status),
                        /*retryable=*/res->status >= 500);
  }

  nlohmann::json j = parse_body(res->body);
  if (j.contains("vocab_size") &&
      j.at("vocab_size").get<std::size_t>() != vocab_size) {
    throw ConfigError("vocab_size changed mid-session");
  }
  TokenDistribution dist;
  double total = 0.0;
  try {
    for (const auto& entry : j.at("top")) {
      TokenId id = entry.at("id").get<TokenId>();
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
        throw ProtocolError("token id " + std::to_string(id) +
                            " outside vocabulary of size " +
                            std::to_string(vocab_size));
      }
      double prob = std::exp(entry.at("logprob").get<double>());
      dist.entries.push_back({id, prob});
      total += prob;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed top-k payload: ") + e.what());
  }
  if (dist.empty()) throw ProtocolError("server returned an empty top-k set");
  for (DistEntry& e : dist.entries) e.prob /= total;
  dist.canonicalize();
  dist.truncate(top_k);
  return dist;
}

ModelHandle connect_remote_model(const std::string& endpoint,
                                 const std::optional<std::string>& vocab_path) {
  SplitUrl url = split_endpoint(endpoint);
  httplib::Result res;
  for (int attempt = 0; attempt < kTransportRetries; ++attempt) {
    httplib::Client client(url.host);
    client.set_connection_timeout(5);
    res = client.Get(url.path_prefix + "/meta");
    if (res) break;
  }
  if (!res) {
    throw ProviderError("handshake transport failure for " + endpoint,
                        /*retryable=*/true);
  }
  if (res->status != 200) {
    throw ProviderError("handshake returned HTTP " + std::to_string(res->status),
                        /*retryable=*/false);
  }
  nlohmann::json j = parse_body(res->body);

  std::size_t vocab_size;
  Vocabulary vocabulary;
  ModelArchSpec arch;
  try {
    vocab_size = j.at("vocab_size").get<std::size_t>();
    vocabulary.eos_ids = j.at("eos_ids").get<std::vector<TokenId>>();
    const auto& aj = j.at("arch");
    arch.hidden = aj.at("hidden").get<std::uint64_t>();
    arch.ffn = aj.at("ffn").get<std::uint64_t>();
    arch.heads = aj.at("heads").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed handshake body: ") + e.what());
  }
  arch.validate();
  std::sort(vocabulary.eos_ids.begin(), vocabulary.eos_ids.end());

  if (vocab_path) {
    std::ifstream in(*vocab_path);
    if (!in) throw ConfigError("cannot open vocab file: " + *vocab_path);
    nlohmann::json vj;
    try {
      in >> vj;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("malformed vocab file: " + std::string(e.what()));
    }
    vocabulary.token_text = vj.at("vocab").get<std::vector<std::string>>();
    if (vocabulary.token_text.size() != vocab_size) {
      throw ConfigError("vocab file size " +
                        std::to_string(vocabulary.token_text.size()) +
                        " does not match handshake vocab_size " +
                        std::to_string(vocab_size));
    }
    if (vj.contains("eos")) {
      vocabulary.eos_ids = vj.at("eos").get<std::vector<TokenId>>();
      std::sort(vocabulary.eos_ids.begin(), vocabulary.eos_ids.end());
    }
  } else {
    vocabulary.token_text.assign(vocab_size, std::string());
  }
  return std::make_shared<RemoteModel>(endpoint, std::move(vocabulary), arch);
}

}  // namespace foreal
