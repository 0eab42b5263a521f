// Microbenchmarks for the latent matching paths: nearest-neighbor lookup,
// top-k candidate fusion, and the global-attention reference, across
// codebook sizes. `benchmark --benchmark_filter=...` narrows the set.
#include <benchmark/benchmark.h>

#include "ugtsr/matching_bench.hpp"
#include "ugtsr/rng.hpp"

namespace {

using namespace ugtsr;

constexpr int kGridH = 6;
constexpr int kGridW = 6;
constexpr int kNz = 16;

LatentGrid bench_grid(std::uint64_t seed) {
  Rng rng(seed);
  LatentGrid g;
  g.h = kGridH;
  g.w = kGridW;
  g.values = Tensor::zeros({kGridH * kGridW, kNz});
  for (std::int64_t i = 0; i < g.values.size(); ++i) g.values[i] = rng.normal();
  return g;
}

Codebook bench_codebook(int K, std::uint64_t seed) {
  Rng rng(seed);
  Codebook cb;
  cb.entries = Tensor::zeros({K, kNz});
  for (std::int64_t i = 0; i < cb.entries.size(); ++i) cb.entries[i] = rng.normal();
  return cb;
}

void BM_QuantizeNearest(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const LatentGrid grid = bench_grid(11);
  const Codebook cb = bench_codebook(K, 13);
  for (auto _ : state) {
    const MatchResult m = quantize_nearest(grid, cb);
    benchmark::DoNotOptimize(m.indices.data());
  }
  state.SetComplexityN(K);
}
BENCHMARK(BM_QuantizeNearest)->RangeMultiplier(2)->Range(64, 1024)->Complexity(benchmark::oN);

void BM_QuantizeTopk(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const LatentGrid grid = bench_grid(11);
  const Codebook cb = bench_codebook(K, 13);
  const FusionParams params = FusionParams::seeded(3, kNz, 17);
  for (auto _ : state) {
    const MatchResult m = quantize_topk(grid, cb, 3, params);
    benchmark::DoNotOptimize(m.indices.data());
  }
  state.SetComplexityN(K);
}
BENCHMARK(BM_QuantizeTopk)->RangeMultiplier(2)->Range(64, 1024)->Complexity(benchmark::oN);

void BM_NaiveGlobalAttention(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const LatentGrid grid = bench_grid(11);
  const Codebook cb = bench_codebook(K, 13);
  for (auto _ : state) {
    const Tensor out = naive_global_attention(grid, cb);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetComplexityN(K);
}
BENCHMARK(BM_NaiveGlobalAttention)
    ->RangeMultiplier(2)
    ->Range(64, 1024)
    ->Complexity(benchmark::oNSquared);

}  // namespace
