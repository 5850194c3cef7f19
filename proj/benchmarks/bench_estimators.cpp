#include <benchmark/benchmark.h>

#include "bench_common.hpp"

namespace genattr::bench {
namespace {

// Permutation paths per second over document players.
void BM_PermutationPaths(benchmark::State& state) {
  auto g = docs_game(static_cast<std::size_t>(state.range(0)), 20);
  Evaluator eval(*g->reader, g->x);
  SamplerConfig cfg;
  cfg.num_paths = 50;
  for (auto _ : state) {
    benchmark::DoNotOptimize(permutation_shapley(eval, g->docs, cfg));
    ++cfg.seed;
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.num_paths));
}
BENCHMARK(BM_PermutationPaths)->Arg(4)->Arg(10)->Arg(20);

void BM_BanzhafRounds(benchmark::State& state) {
  auto g = docs_game(static_cast<std::size_t>(state.range(0)), 20);
  Evaluator eval(*g->reader, g->x);
  SamplerConfig cfg;
  cfg.num_paths = 50;
  cfg.bernoulli_p = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(banzhaf_estimate(eval, g->docs, cfg));
    ++cfg.seed;
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.num_paths));
}
BENCHMARK(BM_BanzhafRounds)->Arg(4)->Arg(10)->Arg(20);

void BM_ExactOracle(benchmark::State& state) {
  auto g = docs_game(static_cast<std::size_t>(state.range(0)), 5);
  Evaluator eval(*g->reader, g->x);
  for (auto _ : state) benchmark::DoNotOptimize(exact_shapley_oracle(eval, g->docs));
}
BENCHMARK(BM_ExactOracle)->DenseRange(3, 8);

}  // namespace
}  // namespace genattr::bench
