#include <gtest/gtest.h>

#include <json.hpp>

#include "fixtures.hpp"
#include "genattr/genattr.hpp"

namespace genattr {
namespace {

// Tokens are ids in a small vocabulary with words "A".."H".
struct Letters {
  Vocabulary vocab;
  std::map<char, TokenId> id;

  Letters() {
    for (char c = 'A'; c <= 'H'; ++c) id[c] = vocab.intern(std::string(1, c));
  }

  std::vector<TokenId> tokens(std::string_view word) const {
    std::vector<TokenId> out;
    for (char c : word) out.push_back(id.at(c));
    return out;
  }

  SpecTree tree(std::size_t capacity = SpecTree::kDefaultCapacity) const {
    return SpecTree([this](std::span<const TokenId> t) { return vocab.decode(t); }, capacity);
  }
};

TEST(Graft, SharesPrefixesAndIsIdempotent) {
  Letters L;
  SpecTree t = L.tree();
  const auto c = t.graft(L.tokens("ABC"));
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(t.size(), 3u);
  for (SpecNodeId i = 1; i < 3; ++i) EXPECT_EQ(t.node(i).parent, i - 1);
  EXPECT_FALSE(t.node(0).parent.has_value());

  const auto d = t.graft(L.tokens("ABD"));
  EXPECT_EQ(t.size(), 4u);
  EXPECT_EQ(t.node(*d).parent, SpecNodeId{1});
  EXPECT_EQ(t.node(*d).depth, 2u);
  EXPECT_TRUE(t.node(*d).terminal);

  const auto before = t.nodes().size();
  EXPECT_EQ(t.graft(L.tokens("ABC")), c);
  EXPECT_EQ(t.nodes().size(), before);
  EXPECT_EQ(t.answer_text(*c), "A B C");
  EXPECT_EQ(t.answer_index().at("A B D"), *d);
}

TEST(Graft, EmptyAnswerIsRejected) {
  Letters L;
  SpecTree t = L.tree();
  EXPECT_THROW(t.graft({}), ContractViolation);
}

TEST(Graft, CapacityRefusesNewAnswersOnly) {
  Letters L;
  SpecTree t = L.tree(2);
  EXPECT_TRUE(t.graft(L.tokens("A")).has_value());
  EXPECT_TRUE(t.graft(L.tokens("B")).has_value());
  EXPECT_FALSE(t.graft(L.tokens("C")).has_value());
  EXPECT_TRUE(t.graft(L.tokens("A")).has_value());
  EXPECT_EQ(t.num_answers(), 2u);
  EXPECT_EQ(t.size(), 2u);
}

TEST(Graft, NodeCountBoundedByDistinctAnswerTokens) {
  Letters L;
  SpecTree shared = L.tree();
  std::size_t tokens = 0;
  for (const char* w : {"ABC", "ABD", "AE", "F"}) {
    shared.graft(L.tokens(w));
    tokens += std::string_view(w).size();
  }
  EXPECT_LT(shared.size(), tokens);

  SpecTree disjoint = L.tree();
  tokens = 0;
  for (const char* w : {"ABC", "DE", "FGH"}) {
    disjoint.graft(L.tokens(w));
    tokens += std::string_view(w).size();
  }
  EXPECT_EQ(disjoint.size(), tokens);
}

TEST(PositionBias, FourNodeExample) {
  Letters L;
  SpecTree t = L.tree();
  t.graft(L.tokens("ABC"));
  t.graft(L.tokens("ABD"));
  const BiasMatrix bias = position_bias(t);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(bias(i, i), 0);
  EXPECT_EQ(bias(2, 0), 2);
  EXPECT_EQ(bias(3, 0), 2);
  EXPECT_EQ(bias(3, 2), kAbsentBias);
  EXPECT_EQ(bias(0, 1), kAbsentBias);

  const BoolMatrix mask = causal_mask(t);
  const std::vector<std::vector<int>> expect{{1, 0, 0, 0}, {1, 1, 0, 0}, {1, 1, 1, 0}, {1, 1, 0, 1}};
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = 0; b < 4; ++b) EXPECT_EQ(mask(a, b), expect[a][b]) << a << "," << b;
  }
}

TEST(PositionBias, ChainIsLowerTriangularBand) {
  Letters L;
  for (std::size_t n = 1; n <= 8; ++n) {
    SpecTree t = L.tree();
    t.graft(L.tokens(std::string("ABCDEFGH").substr(0, n)));
    const BiasMatrix bias = t.position_bias();
    const BoolMatrix mask = t.causal_mask();
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (b <= a) {
          EXPECT_EQ(bias(a, b), static_cast<std::int32_t>(a - b));
          EXPECT_EQ(mask(a, b), 1);
        } else {
          EXPECT_EQ(bias(a, b), kAbsentBias);
          EXPECT_EQ(mask(a, b), 0);
        }
      }
    }
  }
}

// Random trie over a 3-letter alphabet with at most `limit` nodes.
SpecTree random_tree(const Letters& L, StreamRng& rng, std::size_t limit) {
  SpecTree t = L.tree(1000);
  const std::size_t target = 1 + rng.below(limit);
  while (t.size() < target) {
    std::string w;
    const std::size_t len = 1 + rng.below(8);
    for (std::size_t i = 0; i < len; ++i) w += static_cast<char>('A' + rng.below(3));
    SpecTree trial = t;
    trial.graft(L.tokens(w));
    if (trial.size() > limit) break;
    t = trial;
  }
  return t;
}

TEST(CausalMask, MatchesAncestorWalkOnRandomTrees) {
  Letters L;
  StreamRng rng(2024, StreamDomain::synthetic, 9);
  for (int trial = 0; trial < 300; ++trial) {
    const SpecTree t = random_tree(L, rng, 64);
    const BiasMatrix bias = t.position_bias();
    const BoolMatrix mask = t.causal_mask();
    const std::size_t n = t.size();
    ASSERT_LE(n, 64u);
    for (std::size_t a = 0; a < n; ++a) {
      std::map<std::size_t, std::int32_t> ancestors;  // node -> offset
      std::optional<SpecNodeId> cur = static_cast<SpecNodeId>(a);
      std::int32_t offset = 0;
      while (cur) {
        ancestors[*cur] = offset++;
        cur = t.node(*cur).parent;
      }
      ASSERT_EQ(t.node(static_cast<SpecNodeId>(a)).depth + 1, ancestors.size());
      for (std::size_t b = 0; b < n; ++b) {
        const auto it = ancestors.find(b);
        ASSERT_EQ(mask(a, b), it != ancestors.end() ? 1 : 0);
        ASSERT_EQ(bias(a, b), it != ancestors.end() ? it->second : kAbsentBias);
      }
    }
    // Transitivity.
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (!mask(a, b)) continue;
        for (std::size_t c = 0; c < n; ++c) {
          if (mask(b, c)) ASSERT_TRUE(mask(a, c));
        }
      }
    }
    // Siblings carry distinct tokens and every terminal spells its answer.
    std::set<std::pair<std::int64_t, TokenId>> edges;
    for (const auto& node : t.nodes()) {
      const std::int64_t p = node.parent ? static_cast<std::int64_t>(*node.parent) : -1;
      ASSERT_TRUE(edges.insert({p, node.token}).second);
    }
    for (const auto& [text, id] : t.answer_index()) {
      ASSERT_EQ(L.vocab.decode(t.path_tokens(id)), text);
    }
  }
}

TEST(LogprobOf, SumsAlongPathAndFillsIn) {
  Letters L;
  SpecTree t = L.tree();
  const std::vector<std::optional<double>> lp{-0.1, -0.2, -0.3};
  t.graft(L.tokens("ABC"), lp);
  EXPECT_NEAR(*t.logprob_of("A B C"), -0.6, 1e-12);

  t.graft(L.tokens("ABD"));
  EXPECT_FALSE(t.logprob_of("A B D").has_value());
  const std::vector<std::optional<double>> lp2{-0.1, -0.2, -0.7};
  t.graft(L.tokens("ABD"), lp2);
  EXPECT_NEAR(*t.logprob_of("A B D"), -1.0, 1e-12);
  EXPECT_THROW(t.logprob_of("Z"), ContractViolation);
}

TEST(DebugJson, DeterministicAndComplete) {
  Letters L;
  auto build = [&] {
    SpecTree t = L.tree();
    t.graft(L.tokens("ABC"), std::vector<std::optional<double>>{-0.5, std::nullopt, -0.25});
    t.graft(L.tokens("ABD"));
    return t.debug_json();
  };
  const std::string a = build();
  EXPECT_EQ(a, build());
  const auto j = nlohmann::json::parse(a);
  EXPECT_EQ(j["nodes"].size(), 4u);
  EXPECT_EQ(j["nodes"][0]["logprob"], -0.5);
  EXPECT_TRUE(j["nodes"][1]["logprob"].is_null());
  EXPECT_EQ(j["causal_mask"][3], nlohmann::json::array({1, 1, 0, 1}));
  EXPECT_TRUE(j["position_bias"][3][2].is_null());
  EXPECT_EQ(j["position_bias"][2][0], 2);
}

Mask subset_mask(const testing::DocsFixture& f, std::uint64_t bits) {
  std::set<NodeId> active;
  for (std::size_t i = 0; i < f.docs.size(); ++i) {
    if ((bits >> i) & 1U) active.insert(f.docs[i].id);
  }
  return mask_of_node(f.h, active);
}

TEST(Speculate, HitOnKnownAnswerSkipsDecoding) {
  auto f = testing::three_doc_game();
  SpecTree t([&](std::span<const TokenId> s) { return f->reader->detokenize(s); });
  t.graft(f->reader->tokenize_answer("A"));
  const CallStats before = f->reader->stats();
  const auto [r, delta] = speculate_or_decode(t, *f->reader, f->x, subset_mask(*f, 0b001), MaskMode::pad);
  EXPECT_EQ(r.answer, "A");
  EXPECT_EQ(delta.hits, 1u);
  EXPECT_EQ(delta.misses, 0u);
  const CallStats d = f->reader->stats() - before;
  EXPECT_EQ(d.decoder_calls, 0u);
  EXPECT_EQ(d.encoder_calls, 0u);
  EXPECT_EQ(d.verification_calls, 2u);  // "A", then end of sequence
}

TEST(Speculate, MissGraftsNewRootBranch) {
  auto f = testing::three_doc_game();
  SpecTree t([&](std::span<const TokenId> s) { return f->reader->detokenize(s); });
  t.graft(f->reader->tokenize_answer("A"));
  const auto [r, delta] = speculate_or_decode(t, *f->reader, f->x, subset_mask(*f, 0b010), MaskMode::pad);
  EXPECT_EQ(r.answer, "B");
  EXPECT_EQ(delta.misses, 1u);
  EXPECT_EQ(delta.grafts, 1u);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_FALSE(t.node(1).parent.has_value());
}

TEST(Speculate, EmptyTreeBehavesAsGenerate) {
  auto f = testing::three_doc_game();
  SpecTree t([&](std::span<const TokenId> s) { return f->reader->detokenize(s); });
  const auto plain = f->reader->generate(f->x, subset_mask(*f, 0b011), MaskMode::pad);
  const CallStats before = f->reader->stats();
  const auto [r, delta] = speculate_or_decode(t, *f->reader, f->x, subset_mask(*f, 0b011), MaskMode::pad);
  EXPECT_EQ(r, plain);
  EXPECT_EQ(delta.misses, 1u);
  EXPECT_EQ(delta.verification_passes, 0u);
  EXPECT_EQ((f->reader->stats() - before).verification_calls, 0u);
}

TEST(Speculate, NoStepScoringFallsBackOrThrows) {
  class NoScoring : public Generator {
   public:
    BackendDescriptor descriptor() const override { return {"plain", false, false, false, true}; }
    TokenId eos_token() const override { return Vocabulary::kEos; }
    std::string detokenize(std::span<const TokenId>) const override { return "x"; }
    std::vector<TokenId> tokenize_answer(std::string_view) const override { return {4}; }

   protected:
    GenerationResult do_generate(const TokenSeq&, const Mask&, MaskMode) override {
      return {"x", {{4, std::nullopt}}, 1};
    }
  } backend;
  SpecTree t([](std::span<const TokenId>) { return std::string("x"); });
  const TokenSeq x({4}, 4, 1);
  const auto [r, delta] = speculate_or_decode(t, backend, x, Mask(1, true), MaskMode::pad);
  EXPECT_EQ(r.answer, "x");
  EXPECT_EQ(delta.misses, 1u);
  SpeculationOptions strict;
  strict.allow_fallback = false;
  EXPECT_THROW(speculate_or_decode(t, backend, x, Mask(1, true), MaskMode::pad, strict),
               CapabilityError);
}

// Eight documents with five distinct answers including abstention.
std::unique_ptr<testing::DocsFixture> eight_docs(bool logprobs = false) {
  ToyKeywordReader::Options o;
  o.logprobs = logprobs;
  return testing::make_docs_fixture(
      {"pad kw1", "kw2 x", "y", "kw3 z", "kw1 w", "v", "kw4 big", "kw2"},
      {{"kw1", "alpha beta"}, {"kw2", "gamma"}, {"kw3", "alpha delta"}, {"kw4", "epsilon one two"}},
      o);
}

TEST(Speculate, TransparencyUnderExhaustiveSweep) {
  auto f = eight_docs(true);
  StreamRng rng(5, StreamDomain::synthetic, 2);
  std::vector<std::uint64_t> order(256);
  std::iota(order.begin(), order.end(), std::uint64_t{0});
  for (int pass = 0; pass < 3; ++pass) {
    shuffle(std::span<std::uint64_t>(order), rng);
    SpecTree t([&](std::span<const TokenId> s) { return f->reader->detokenize(s); });
    for (int repeat = 0; repeat < 2; ++repeat) {
      for (std::uint64_t bits : order) {
        const Mask m = subset_mask(*f, bits);
        const auto plain = f->reader->generate(f->x, m, MaskMode::pad);
        const auto [r, delta] = speculate_or_decode(t, *f->reader, f->x, m, MaskMode::pad);
        ASSERT_EQ(r.answer, plain.answer) << bits;
        ASSERT_EQ(r.steps, plain.steps) << bits;
      }
    }
  }
}

TEST(Speculate, HitRateAndSavedCallAccounting) {
  auto f = eight_docs();
  SpecTree t([&](std::span<const TokenId> s) { return f->reader->detokenize(s); });
  std::set<std::string> seen;
  SpecStats total;
  std::uint64_t plain_calls = 0;
  const CallStats before = f->reader->stats();
  std::uint64_t plain_generate_calls = 0;
  for (std::uint64_t bits = 0; bits < 256; ++bits) {
    const Mask m = subset_mask(*f, bits);
    const auto [r, delta] = speculate_or_decode(t, *f->reader, f->x, m, MaskMode::pad);
    EXPECT_EQ(delta.hits, seen.contains(r.answer) ? 1u : 0u) << r.answer;
    seen.insert(r.answer);
    total += delta;
    plain_calls += f->reader->tokenize_answer(r.answer).size();
    plain_generate_calls += delta.misses;
  }
  EXPECT_LE(seen.size(), 5u);
  EXPECT_EQ(total.misses, seen.size());
  EXPECT_EQ(total.grafts, seen.size());
  EXPECT_LE(total.grafts, total.misses);
  const CallStats d = f->reader->stats() - before;
  EXPECT_EQ(d.encoder_calls, plain_generate_calls);
  EXPECT_EQ(d.decoder_calls + total.hits, plain_calls - total.decoder_calls_saved);
  EXPECT_EQ(d.verification_calls, total.raw_steps);
}

TEST(SpecCacheEvaluator, CachedOracleMatchesUncached) {
  auto f = eight_docs();
  SpecCache cache(*f->reader);
  Evaluator::Options o;
  o.cache = &cache;
  Evaluator cached(*f->reader, f->x, o);
  Evaluator plain(*f->reader, f->x);
  EXPECT_EQ(exact_shapley_oracle(cached, f->docs), exact_shapley_oracle(plain, f->docs));
  EXPECT_EQ(exact_banzhaf_oracle(cached, f->docs, 0.5), exact_banzhaf_oracle(plain, f->docs, 0.5));
  SamplerConfig c;
  c.num_paths = 50;
  c.seed = 3;
  EXPECT_EQ(permutation_shapley(cached, f->docs, c), permutation_shapley(plain, f->docs, c));
  const SpecStats s = cache.stats();
  EXPECT_GT(s.hits, 0u);
  EXPECT_LE(s.grafts, s.misses);
  EXPECT_LE(cache.tree().num_answers(), 5u);
  cache.reset();
  EXPECT_EQ(cache.stats(), SpecStats{});
  EXPECT_TRUE(cache.tree().empty());
}

TEST(SpecCacheEvaluator, ConcurrentWorkersStayTransparent) {
  auto f = eight_docs();
  SpecCache cache(*f->reader);
  Evaluator::Options o;
  o.cache = &cache;
  Evaluator cached(*f->reader, f->x, o);
  Evaluator plain(*f->reader, f->x);
  SamplerConfig c;
  c.num_paths = 200;
  c.seed = 12;
  c.workers = 4;
  EXPECT_EQ(permutation_shapley(cached, f->docs, c), permutation_shapley(plain, f->docs, c));
  const SpecStats s = cache.stats();
  EXPECT_EQ(s.hits + s.misses, cached.evaluations());
}

}  // namespace
}  // namespace genattr
