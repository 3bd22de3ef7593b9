#include <doctest.h>

#include <random>

#include "foreal/errors.hpp"
#include "foreal/policy.hpp"

using namespace foreal;

TEST_CASE("local position within a sentence") {
  CHECK(local_position(10, 10) == 1);
  CHECK(local_position(17, 10) == 8);
  CHECK_THROWS_AS(local_position(9, 10), ContractError);
}

TEST_CASE("agreement indicator") {
  CHECK(agreement_indicator(42, 42) == 1);
  CHECK(agreement_indicator(42, 43) == 0);
  CHECK(agreement_indicator(0, 0) == 1);
}

TEST_CASE("hit counter update examples") {
  CHECK(update_hits(3, 1, 5) == 4);
  CHECK(update_hits(4, 0, 5) == 0);
  CHECK(update_hits(5, 1, 5) == 5);
}

// Oracle: the counter equals the length of the trailing all-ones run of the
// delta sequence, capped at k; and it reaches k exactly when some window of
// k consecutive ones exists.
TEST_CASE("hit counter equals trailing-run oracle on all delta strings") {
  for (std::uint32_t k = 1; k <= 4; ++k) {
    for (int len = 1; len <= 12; ++len) {
      for (unsigned bits = 0; bits < (1u << len); ++bits) {
        std::uint32_t h = 0;
        bool reached = false;
        std::uint32_t run = 0;
        bool window = false;
        for (int i = 0; i < len; ++i) {
          int delta = (bits >> i) & 1;
          h = update_hits(h, delta, k);
          if (h >= k) reached = true;
          run = delta ? run + 1 : 0;
          if (run >= k) window = true;
          CHECK(h == std::min(run, k));
        }
        CHECK(reached == window);
      }
    }
  }
}

TEST_CASE("policy decision examples") {
  PolicyConfig cfg;
  cfg.lead_count = 15;
  CHECK(policy_decision(1, 3, false, cfg) == Source::Leader);
  CHECK(policy_decision(0, 1, false, cfg) == Source::Draft);
  CHECK(policy_decision(1, 20, true, cfg) == Source::Draft);
}

TEST_CASE("policy decision truth table is exhaustive") {
  for (int bounded = 0; bounded <= 1; ++bounded) {
    PolicyConfig cfg;
    if (bounded) {
      cfg.lead_count = 15;
    } else {
      cfg.lead_count.reset();
    }
    for (int gate = 0; gate <= 1; ++gate) {
      for (int transferred = 0; transferred <= 1; ++transferred) {
        for (std::uint32_t lambda = 1; lambda <= 40; ++lambda) {
          bool within = !bounded || lambda <= 15;
          Source expected = (gate == 1 && (within || !transferred))
                                ? Source::Leader
                                : Source::Draft;
          CHECK(policy_decision(gate, lambda, transferred != 0, cfg) ==
                expected);
        }
      }
    }
  }
}

TEST_CASE("gate sampling") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) CHECK(sample_gate(0.0, rng) == 0);
  for (int i = 0; i < 100; ++i) CHECK(sample_gate(1.0, rng) == 1);

  std::mt19937_64 rng2(7);
  int ones = 0;
  for (int i = 0; i < 10000; ++i) ones += sample_gate(0.5, rng2);
  double mean = ones / 10000.0;
  CHECK(mean >= 0.48);
  CHECK(mean <= 0.52);

  CHECK_THROWS_AS(sample_gate(-0.1, rng), ConfigError);
  CHECK_THROWS_AS(sample_gate(1.1, rng), ConfigError);
}

TEST_CASE("gate sampler matches an independent Bernoulli construction") {
  // Same uniform mapping, written out separately.
  std::mt19937_64 a(123), b(123);
  for (int i = 0; i < 1000; ++i) {
    double u = static_cast<double>(b() >> 11) / 9007199254740992.0;
    CHECK(sample_gate(0.3, a) == (u < 0.3 ? 1 : 0));
  }
}

TEST_CASE("agreement-check activation window") {
  PolicyConfig cfg;
  cfg.lead_count = 15;
  cfg.hit_threshold = 5;
  CHECK_FALSE(hit_check_active(10, cfg));
  CHECK(hit_check_active(11, cfg));
  CHECK(hit_check_active(16, cfg));

  cfg.eq4_counting_start = true;
  CHECK_FALSE(hit_check_active(15, cfg));
  CHECK(hit_check_active(16, cfg));
  cfg.eq4_counting_start = false;

  cfg.lead_count = 3;  // lead window shorter than the hit run
  CHECK(hit_check_active(1, cfg));

  cfg.lead_count.reset();
  CHECK_FALSE(hit_check_active(100, cfg));
}

TEST_CASE("sentence boundary characters") {
  CHECK(is_sentence_boundary("."));
  CHECK(is_sentence_boundary("?"));
  CHECK(is_sentence_boundary("!"));
  CHECK(is_sentence_boundary("\n"));
  CHECK(is_sentence_boundary("end.\n"));
  CHECK_FALSE(is_sentence_boundary(" the"));
  CHECK_FALSE(is_sentence_boundary(""));
  CHECK_FALSE(is_sentence_boundary("a,b;c"));
}

TEST_CASE("policy config validation") {
  PolicyConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lead_probability = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.lead_probability = 0.5;
  cfg.hit_threshold = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.hit_threshold = 5;
  cfg.max_new_tokens = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
