#include <benchmark/benchmark.h>

#include "foreal/flops.hpp"

using namespace foreal;

namespace {

void BM_flops_total(benchmark::State& state) {
  ModelArchSpec arch;
  arch.hidden = 1536;
  arch.ffn = 8960;
  arch.heads = 12;
  std::uint64_t gen = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) {
    Flops total = flops_total(512, gen, arch);
    benchmark::DoNotOptimize(total);
  }
  state.SetItemsProcessed(state.iterations() * gen);
}
BENCHMARK(BM_flops_total)->Arg(256)->Arg(4096);

void BM_flops_to_string(benchmark::State& state) {
  Flops value = flops_total(512, 4096, {1536, 8960, 12});
  for (auto _ : state) {
    std::string s = flops_to_string(value);
    benchmark::DoNotOptimize(s.data());
  }
}
BENCHMARK(BM_flops_to_string);

}  // namespace

BENCHMARK_MAIN();
