#include <benchmark/benchmark.h>

#include "bench_common.hpp"

namespace genattr::bench {
namespace {

// Two-level refinement against flat token-level sampling on the same input.
void BM_HierarchicalTwoLevel(benchmark::State& state) {
  auto g = docs_game(10, 29);
  Evaluator eval(*g->reader, g->x);
  SamplerConfig cfg;
  cfg.num_paths = 20;
  HierarchyConfig hc;
  hc.thresholds = {0.1};
  for (auto _ : state) {
    benchmark::DoNotOptimize(hierarchical_shapley(eval, g->h, cfg, hc));
    ++cfg.seed;
  }
  state.counters["evals_per_iter"] = benchmark::Counter(
      static_cast<double>(eval.evaluations()), benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_HierarchicalTwoLevel);

void BM_FlatTokenLevel(benchmark::State& state) {
  auto g = docs_game(10, 29);
  Evaluator eval(*g->reader, g->x);
  const FeatureList tokens = token_features(g->x.size());
  SamplerConfig cfg;
  cfg.num_paths = 20;
  for (auto _ : state) {
    benchmark::DoNotOptimize(permutation_shapley(eval, tokens, cfg));
    ++cfg.seed;
  }
  state.counters["evals_per_iter"] = benchmark::Counter(
      static_cast<double>(eval.evaluations()), benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_FlatTokenLevel);

}  // namespace
}  // namespace genattr::bench
