#include "foreal/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "foreal/errors.hpp"

namespace foreal {

namespace {
constexpr double kGreedyTemperature = 1e-7;
}

TokenId TokenDistribution::argmax() const {
  if (entries.empty()) throw ContractError("argmax of empty distribution");
  return entries[0].id;
}

void TokenDistribution::canonicalize() {
  entries.erase(std::remove_if(entries.begin(), entries.end(),
                               [](const DistEntry& e) { return e.prob <= 0.0; }),
                entries.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const DistEntry& a, const DistEntry& b) {
                     if (a.prob != b.prob) return a.prob > b.prob;
                     return a.id < b.id;
                   });
}

double TokenDistribution::prob_of(TokenId id) const {
  for (const DistEntry& e : entries) {
    if (e.id == id) return e.prob;
  }
  return 0.0;
}

void TokenDistribution::truncate(std::size_t top_k) {
  if (entries.size() > top_k) entries.resize(top_k);
}

void SamplingParams::validate() const {
  if (temperature <= 0.0) throw ConfigError("temperature must be positive");
  if (top_p <= 0.0 || top_p > 1.0) throw ConfigError("top_p must be in (0, 1]");
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
}

TokenId sample_token(const TokenDistribution& dist, const SamplingParams& params,
                     std::mt19937_64& rng) {
  if (dist.empty()) throw ContractError("sample_token: empty distribution");
  double u = uniform01(rng);  // drawn unconditionally to keep streams aligned
  if (params.temperature < kGreedyTemperature) return dist.entries[0].id;

  // Temperature scaling of log-probabilities preserves the sort order, so
  // top-k truncation is a prefix of the canonical entries.
  std::size_t n = std::min<std::size_t>(dist.entries.size(), params.top_k);
  std::vector<double> w(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::exp(std::log(dist.entries[i].prob) / params.temperature);
    total += w[i];
  }

  // Nucleus truncation over the temperature-scaled distribution; the top
  // entry is always retained.
  std::size_t keep = n;
  double cum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cum += w[i] / total;
    if (cum >= params.top_p) {
      keep = i + 1;
      break;
    }
  }

  double kept_total = 0.0;
  for (std::size_t i = 0; i < keep; ++i) kept_total += w[i];

  double target = u * kept_total;
  double acc = 0.0;
  for (std::size_t i = 0; i < keep; ++i) {
    acc += w[i];
    if (target < acc) return dist.entries[i].id;
  }
  return dist.entries[keep - 1].id;
}

}  // namespace foreal
