#include <doctest.h>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "foreal/errors.hpp"
#include "foreal/remote.hpp"

using namespace foreal;

namespace {

// In-process mock server speaking the top-k wire protocol.
class MockServer {
 public:
  explicit MockServer(std::string topk_body, std::string meta_body = "")
      : topk_body_(std::move(topk_body)), meta_body_(std::move(meta_body)) {
    server_.Get("/meta", [this](const httplib::Request&, httplib::Response& r) {
      r.set_content(meta_body_, "application/json");
    });
    server_.Post("/topk",
                 [this](const httplib::Request& req, httplib::Response& r) {
                   last_request_ = req.body;
                   hits_ += 1;
                   r.set_content(topk_body_, "application/json");
                 });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port_);
  }
  int hits() const { return hits_; }
  std::string last_request() const { return last_request_; }

 private:
  std::string topk_body_;
  std::string meta_body_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> hits_{0};
  std::string last_request_;
};

}  // namespace

TEST_CASE("logprob zero maps to probability one") {
  MockServer server(R"({"vocab_size": 16, "top": [{"id": 9, "logprob": 0.0}]})");
  std::vector<TokenId> ctx = {1, 2};
  TokenDistribution d =
      remote_next_distribution(server.endpoint(), ctx, 8, 16);
  REQUIRE(d.entries.size() == 1);
  CHECK(d.entries[0].id == 9);
  CHECK(d.entries[0].prob == doctest::Approx(1.0));

  nlohmann::json req = nlohmann::json::parse(server.last_request());
  CHECK(req.at("context") == std::vector<TokenId>{1, 2});
  CHECK(req.at("k") == 8);
}

TEST_CASE("unsorted server entries are renormalized and re-sorted") {
  MockServer server(R"({"vocab_size": 16, "top": [
    {"id": 3, "logprob": -2.0},
    {"id": 1, "logprob": -0.5},
    {"id": 2, "logprob": -0.5}
  ]})");
  std::vector<TokenId> ctx = {0};
  TokenDistribution d = remote_next_distribution(server.endpoint(), ctx, 8, 16);
  REQUIRE(d.entries.size() == 3);
  CHECK(d.entries[0].id == 1);  // tie with id 2 broken by ascending id
  CHECK(d.entries[1].id == 2);
  CHECK(d.entries[2].id == 3);
  double sum = 0.0;
  for (const auto& e : d.entries) sum += e.prob;
  CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("token id beyond the vocabulary is a protocol error") {
  MockServer server(R"({"vocab_size": 16, "top": [{"id": 16, "logprob": 0.0}]})");
  std::vector<TokenId> ctx = {0};
  CHECK_THROWS_AS(remote_next_distribution(server.endpoint(), ctx, 8, 16),
                  ProtocolError);
}

TEST_CASE("malformed body is a protocol error") {
  MockServer server("this is not json");
  std::vector<TokenId> ctx = {0};
  CHECK_THROWS_AS(remote_next_distribution(server.endpoint(), ctx, 8, 16),
                  ProtocolError);
}

TEST_CASE("unreachable server raises a retryable provider error") {
  std::vector<TokenId> ctx = {0};
  try {
    remote_next_distribution("http://127.0.0.1:1", ctx, 8, 16);
    FAIL("expected a provider error");
  } catch (const ProviderError& e) {
    CHECK(e.retryable);
  }
}

TEST_CASE("handshake builds a provider with the advertised shape") {
  MockServer server(
      R"({"vocab_size": 4, "top": [{"id": 2, "logprob": 0.0}]})",
      R"({"vocab_size": 4, "eos_ids": [3],
          "arch": {"hidden": 8, "ffn": 16, "heads": 2}})");
  ModelHandle m = connect_remote_model(server.endpoint());
  CHECK(m->kind() == "remote");
  CHECK(m->vocab().size() == 4);
  CHECK(m->vocab().is_eos(3));
  CHECK(m->arch().hidden == 8);

  std::vector<TokenId> ctx = {0, 1};
  CHECK(m->next_distribution(ctx, 8).argmax() == 2);
  std::vector<TokenId> bad = {7};
  CHECK_THROWS_AS(m->next_distribution(bad, 8), ContractError);
}

TEST_CASE("vocab sidecar must match the handshake size") {
  MockServer server(
      "{}",
      R"({"vocab_size": 4, "eos_ids": [3],
          "arch": {"hidden": 8, "ffn": 16, "heads": 2}})");
  std::string path = "remote_vocab_test.json";
  {
    std::ofstream out(path);
    out << R"({"vocab": ["a", "b", "."], "eos": [2]})";  // 3 != 4
  }
  CHECK_THROWS_AS(connect_remote_model(server.endpoint(), path), ConfigError);
  {
    std::ofstream out(path);
    out << R"({"vocab": ["a", "b", ".", "<eos>"], "eos": [3]})";
  }
  ModelHandle m = connect_remote_model(server.endpoint(), path);
  CHECK(m->vocab().text(2) == ".");
  std::remove(path.c_str());
}

TEST_CASE("malformed handshake is a protocol error") {
  MockServer server("{}", R"({"vocab_size": 4})");
  CHECK_THROWS_AS(connect_remote_model(server.endpoint()), ProtocolError);
}
