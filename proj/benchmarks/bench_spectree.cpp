#include <benchmark/benchmark.h>

#include "bench_common.hpp"

namespace genattr::bench {
namespace {

// Cached versus plain decoding over repeated document subsets.
void BM_EvaluateSubsets(benchmark::State& state) {
  const bool cached = state.range(0) != 0;
  auto g = docs_game(8, 10);
  SpecCache cache(*g->reader);
  Evaluator::Options opts;
  if (cached) opts.cache = &cache;
  Evaluator eval(*g->reader, g->x, opts);
  std::uint64_t bits = 0;
  for (auto _ : state) {
    Mask m(g->x.size(), false);
    for (std::size_t i = 0; i < g->docs.size(); ++i) {
      if (bits >> i & 1u) m.set_all(g->docs[i].positions);
    }
    benchmark::DoNotOptimize(eval.answer(m));
    bits = (bits + 1) & 0xff;
  }
  state.counters["decoder_calls"] =
      benchmark::Counter(static_cast<double>(g->reader->stats().decoder_calls),
                         benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_EvaluateSubsets)->Arg(0)->Arg(1);

void BM_CausalMask(benchmark::State& state) {
  Vocabulary vocab;
  SpecTree tree([&](std::span<const TokenId> t) { return vocab.decode(t); });
  std::vector<TokenId> alphabet;
  for (const char* w : {"a", "b", "c", "d"}) alphabet.push_back(vocab.intern(w));
  StreamRng rng(3, StreamDomain::synthetic, 0);
  while (tree.size() < static_cast<std::size_t>(state.range(0))) {
    std::vector<TokenId> w(1 + rng.below(6));
    for (auto& t : w) t = alphabet[rng.below(alphabet.size())];
    tree.graft(w);
  }
  for (auto _ : state) benchmark::DoNotOptimize(tree.causal_mask());
}
BENCHMARK(BM_CausalMask)->Arg(16)->Arg(64)->Arg(256);

}  // namespace
}  // namespace genattr::bench
