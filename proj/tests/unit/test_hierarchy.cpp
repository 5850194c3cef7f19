#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "fixtures.hpp"
#include "genattr/genattr.hpp"

namespace genattr {
namespace {

SamplerConfig config(std::uint64_t paths, std::uint64_t seed = 0) {
  SamplerConfig c;
  c.num_paths = paths;
  c.seed = seed;
  return c;
}

// Two documents of two tokens each; token 0 is the keyword for "A".
struct TwoDocToy {
  TokenSeq x{std::vector<TokenId>(4, 4), 4, Vocabulary::kPad};
  HierarchySpec h = HierarchySpec::documents(std::vector<std::size_t>{2, 2});
  FunctionGame backend{"two-doc", [](const Mask& s) {
                         return s.test(0) ? std::string("A") : std::string(kAbstention);
                       }};
};

// Reference for a two-level mixed path: averages the answer-change credits
// over every outer ordering of the documents and every inner ordering of the
// important documents' tokens.
testing::CellMap mixed_path_reference(const HierarchySpec& h, const std::set<NodeId>& important,
                                      const std::function<std::string(const Mask&)>& game) {
  const std::vector<NodeId> docs = h.players();
  std::vector<NodeId> imp(important.begin(), important.end());
  std::map<NodeId, std::vector<NodeId>> inner;
  for (NodeId d : imp) inner[d] = h.node(d).children;

  std::map<std::pair<std::size_t, std::string>, double> sum;
  double combos = 0;
  std::vector<NodeId> outer = docs;
  std::sort(outer.begin(), outer.end());

  std::function<void(std::size_t)> over_inner = [&](std::size_t k) {
    if (k < imp.size()) {
      auto& order = inner[imp[k]];
      std::sort(order.begin(), order.end());
      do {
        over_inner(k + 1);
      } while (std::next_permutation(order.begin(), order.end()));
      return;
    }
    combos += 1;
    Mask s(h.num_tokens(), false);
    std::string current = normalize_answer(game(s));
    auto reveal = [&](NodeId id) {
      for (std::size_t p : h.positions(id)) s.set(p);
      const std::string next = normalize_answer(game(s));
      if (next != current) {
        sum[{id, next}] += 1;
        current = next;
      }
    };
    for (NodeId d : outer) {
      if (important.contains(d)) {
        for (NodeId c : inner[d]) reveal(c);
      } else {
        reveal(d);
      }
    }
  };
  do {
    over_inner(0);
  } while (std::next_permutation(outer.begin(), outer.end()));
  for (auto& [cell, v] : sum) v /= combos;
  return sum;
}

double worst_cell(const AttributionTable& table, const testing::CellMap& reference) {
  double worst = 0.0;
  for (const auto& [cell, v] : reference) {
    worst = std::max(worst, std::abs(table.mass(static_cast<FeatureId>(cell.first), cell.second) - v));
  }
  return worst;
}

TEST(OneShapleyPath, ToyExampleExhaustive) {
  TwoDocToy toy;
  Evaluator eval(toy.backend, toy.x);
  const NodeId d1 = toy.h.players()[0];
  const NodeId d2 = toy.h.players()[1];
  const NodeId t1 = toy.h.node(d1).children[0];
  const NodeId t2 = toy.h.node(d1).children[1];

  AttributionTable level({t1, t2});
  AttributionTable context({d2});
  const AnswerKey baseline = eval.answer(Mask(4, false));
  for (std::uint64_t t = 0; t < 40; ++t) {
    StreamRng rng(0, StreamDomain::refine, t, 1);
    EXPECT_EQ(one_shapley_path(eval, toy.h, {d1}, baseline, rng, {&level, &context}), 3u);
  }
  EXPECT_DOUBLE_EQ(level.mass(t1, "A"), 1.0);
  EXPECT_TRUE(level.distribution(t2).empty());
  EXPECT_TRUE(context.distribution(d2).empty());

  const auto reference = mixed_path_reference(
      toy.h, {d1}, [&](const Mask& s) { return toy.backend.generate(toy.x, s, MaskMode::pad).answer; });
  EXPECT_DOUBLE_EQ(reference.at({t1, "a"}), 1.0);
  EXPECT_EQ(reference.size(), 1u);
}

TEST(OneShapleyPath, EmptyImportantSetIsFlatDocumentPath) {
  auto f = testing::make_docs_fixture({"kw1 a", "kw2 b", "c", "kw1 d"},
                                      {{"kw1", "A"}, {"kw2", "B"}});
  Evaluator eval(*f->reader, f->x);
  const AnswerKey baseline = eval.answer(Mask(f->x.size(), false));
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    AttributionTable context(feature_ids(f->docs));
    AttributionTable level_table(std::vector<FeatureId>{});
    StreamRng rng(seed, StreamDomain::permutation, 0);
    one_shapley_path(eval, f->h, std::set<NodeId>{}, baseline, rng, {&level_table, &context});
    const AttributionTable flat = permutation_shapley(eval, f->docs, config(1, seed));
    EXPECT_EQ(context.counts(), flat.counts()) << "seed " << seed;
    EXPECT_EQ(level_table.grand_total(), 0u);
  }
}

TEST(OneShapleyPath, RejectsImportantNodesOffLevel) {
  TwoDocToy toy;
  Evaluator eval(toy.backend, toy.x);
  const NodeId leaf = toy.h.node(toy.h.players()[0]).children[0];
  AttributionTable level;
  StreamRng rng(0, StreamDomain::refine, 0, 1);
  EXPECT_THROW(one_shapley_path(eval, toy.h, {leaf}, AnswerKey::abstention(), rng, {&level, nullptr}),
               ContractViolation);
  EXPECT_THROW(one_shapley_path(eval, toy.h, {99}, AnswerKey::abstention(), rng, {&level, nullptr}),
               ContractViolation);
  EXPECT_THROW(one_shapley_path(eval, toy.h, {}, AnswerKey::abstention(), rng, {nullptr, nullptr}),
               ContractViolation);
}

TEST(OneShapleyPath, SampledPathsMatchMixedOrderingReference) {
  auto f = testing::make_docs_fixture({"kw2 a kw1", "x kw1", "kw3 z"},
                                      {{"kw1", "A"}, {"kw2", "B"}, {"kw3", "C"}});
  Evaluator eval(*f->reader, f->x);
  const std::set<NodeId> important{f->docs[0].id, f->docs[2].id};
  const auto game = [&](const Mask& s) { return f->reader->answer_for(f->x, s); };
  const auto reference = mixed_path_reference(f->h, important, game);

  std::vector<FeatureId> level_ids;
  std::vector<FeatureId> context_ids{f->docs[1].id};
  for (NodeId d : important) {
    for (NodeId c : f->h.node(d).children) level_ids.push_back(c);
  }
  std::sort(level_ids.begin(), level_ids.end());
  AttributionTable level(level_ids);
  AttributionTable context(context_ids);
  const AnswerKey baseline = eval.answer(Mask(f->x.size(), false));
  for (std::uint64_t t = 0; t < 20000; ++t) {
    StreamRng rng(7, StreamDomain::refine, t, 1);
    one_shapley_path(eval, f->h, important, baseline, rng, {&level, &context});
  }
  testing::CellMap level_ref;
  testing::CellMap context_ref;
  for (const auto& [cell, v] : reference) {
    (f->h.node(static_cast<NodeId>(cell.first)).level == 1 ? level_ref : context_ref)[cell] = v;
  }
  EXPECT_LT(worst_cell(level, level_ref), 0.02);
  EXPECT_LT(worst_cell(context, context_ref), 0.02);
  // Nothing outside the reference cells.
  std::uint64_t expected_cells = 0;
  for (const auto& [id, counts] : level.counts()) {
    for (const auto& [answer, c] : counts) {
      EXPECT_TRUE(level_ref.contains({id, answer.str()})) << id << " " << answer.str();
      ++expected_cells;
    }
  }
  EXPECT_GT(expected_cells, 0u);
}

TEST(SelectImportant, ThresholdExamples) {
  auto f = testing::three_doc_game();
  Evaluator eval(*f->reader, f->x);
  const AttributionTable exact = exact_shapley_oracle(eval, f->docs);
  const NodeId d1 = f->docs[0].id;
  const NodeId d2 = f->docs[1].id;
  const NodeId d3 = f->docs[2].id;
  EXPECT_EQ(select_important(exact, 0.3), (std::set<NodeId>{d1, d2}));
  EXPECT_EQ(select_important(exact, 0.75), (std::set<NodeId>{d1}));
  EXPECT_EQ(select_important(exact, 0.0), (std::set<NodeId>{d1, d2, d3}));
  EXPECT_TRUE(select_important(exact, 1.1).empty());
  EXPECT_EQ(select_important_for_answer(exact, 0.3, AnswerKey::from_text("B")),
            (std::set<NodeId>{d2}));
}

TEST(SelectImportant, AbstentionMassIsExcludedOnRequest) {
  FunctionGame game("abstain", [](const Mask& s) {
    if (s.test(0)) return std::string("x");
    return s.test(1) ? std::string(kAbstention) : std::string("none");
  });
  const TokenSeq x(std::vector<TokenId>(2, 4), 4, Vocabulary::kPad);
  Evaluator eval(game, x);
  const AttributionTable t = exact_shapley_oracle(eval, token_features(2));
  EXPECT_DOUBLE_EQ(t.total_mass(1), 0.5);
  EXPECT_EQ(select_important(t, 0.4, true), (std::set<NodeId>{0}));
  EXPECT_EQ(select_important(t, 0.4, false), (std::set<NodeId>{0, 1}));
  EXPECT_THROW(select_important(AttributionTable({0}), 0.1), ContractViolation);
}

TEST(SelectImportant, ThresholdMonotonicity) {
  auto f = testing::make_docs_fixture({"kw1", "kw2 kw1", "kw3", "q", "kw2"},
                                      {{"kw1", "A"}, {"kw2", "B"}, {"kw3", "C"}});
  Evaluator eval(*f->reader, f->x);
  const AttributionTable t = permutation_shapley(eval, f->docs, config(500, 3));
  std::set<NodeId> previous = select_important(t, 0.0);
  for (double tau = 0.05; tau <= 1.05; tau += 0.05) {
    const std::set<NodeId> now = select_important(t, tau);
    EXPECT_TRUE(std::includes(previous.begin(), previous.end(), now.begin(), now.end()));
    previous = now;
  }
}

TEST(Hierarchical, ToyExampleSelectsKeywordDocument) {
  TwoDocToy toy;
  Evaluator eval(toy.backend, toy.x);
  HierarchyConfig hc;
  hc.thresholds = {0.25};
  const HierarchicalResult r = hierarchical_shapley(eval, toy.h, config(64, 1), hc);
  const NodeId d1 = toy.h.players()[0];
  const NodeId t1 = toy.h.node(d1).children[0];
  ASSERT_EQ(r.important_sets.size(), 1u);
  EXPECT_EQ(r.important_sets[0], (std::set<NodeId>{d1}));
  ASSERT_EQ(r.per_level.size(), 2u);
  EXPECT_DOUBLE_EQ(r.per_level[0].mass(d1, "A"), 1.0);
  EXPECT_DOUBLE_EQ(r.per_level[1].mass(t1, "A"), 1.0);
  EXPECT_EQ(r.per_level[1].universe(), toy.h.node(d1).children);
  EXPECT_EQ(r.thresholds, std::vector<double>{0.25});
}

TEST(Hierarchical, ThresholdAboveOneStopsRefinement) {
  TwoDocToy toy;
  Evaluator eval(toy.backend, toy.x);
  HierarchyConfig hc;
  hc.thresholds = {1.1};
  const HierarchicalResult r = hierarchical_shapley(eval, toy.h, config(16), hc);
  ASSERT_EQ(r.important_sets.size(), 1u);
  EXPECT_TRUE(r.important_sets[0].empty());
  ASSERT_EQ(r.per_level.size(), 2u);
  EXPECT_EQ(r.per_level[1].grand_total(), 0u);
  EXPECT_EQ(r.phases[1].evaluations, 0u);
}

TEST(Hierarchical, ZeroThresholdCostsFlatTokenLevel) {
  auto f = testing::make_docs_fixture({"kw1 a b", "kw2 c", "d e f g"}, {{"kw1", "A"}, {"kw2", "B"}});
  Evaluator eval(*f->reader, f->x);
  HierarchyConfig hc;
  hc.thresholds = {0.0};
  hc.exclude_abstention = false;
  const HierarchicalResult r = hierarchical_shapley(eval, f->h, config(25), hc);
  EXPECT_EQ(r.important_sets[0].size(), 3u);

  Evaluator flat_eval(*f->reader, f->x);
  permutation_shapley(flat_eval, token_features(f->x.size()), config(25));
  EXPECT_EQ(r.phases[1].evaluations, flat_eval.evaluations());
  EXPECT_EQ(r.phases[1].evaluations, 25u * f->x.size() + 1);
}

TEST(Hierarchical, RefinedCallsFollowFormula) {
  auto f = testing::make_docs_fixture({"kw1 a b", "c d", "kw2 e f g", "h", "i j k"},
                                      {{"kw1", "A"}, {"kw2", "B"}});
  for (std::uint64_t T : {1u, 10u, 33u}) {
    Evaluator eval(*f->reader, f->x);
    HierarchyConfig hc;
    hc.thresholds = {0.3};
    const HierarchicalResult r = hierarchical_shapley(eval, f->h, config(T, T), hc);
    const auto& imp = r.important_sets.at(0);
    std::uint64_t children = 0;
    for (NodeId k : imp) children += f->h.node(k).children.size();
    const std::uint64_t per_path = (f->docs.size() - imp.size()) + children;
    EXPECT_EQ(refined_path_cost(f->h, r.important_sets, 1), per_path);
    EXPECT_EQ(r.phases[1].evaluations, per_path * T + 1);
    EXPECT_LE(per_path + 1, f->x.size() + 1);
    EXPECT_EQ(r.phases[0].evaluations, T * f->docs.size() + 1);
  }
}

TEST(Hierarchical, ImportantSetEqualsThresholdSetAndLocality) {
  auto f = testing::make_docs_fixture({"kw1 a", "kw2 b", "c", "kw2 kw1"},
                                      {{"kw1", "A"}, {"kw2", "B"}});
  Evaluator eval(*f->reader, f->x);
  for (double tau : {0.05, 0.2, 0.5, 0.9}) {
    HierarchyConfig hc;
    hc.thresholds = {tau};
    const HierarchicalResult r = hierarchical_shapley(eval, f->h, config(200, 4), hc);
    std::set<NodeId> expect;
    for (const auto& d : f->docs) {
      const double m = r.per_level[0].total_mass(d.id, true);
      if (m >= tau) expect.insert(d.id);
    }
    EXPECT_EQ(r.important_sets[0], expect) << "tau " << tau;
    for (const auto& [id, counts] : r.per_level[1].counts()) {
      const auto parent = f->h.node(id).parent;
      ASSERT_TRUE(parent.has_value());
      EXPECT_TRUE(expect.contains(*parent));
    }
    for (const auto& [id, counts] : r.context[1].counts()) {
      EXPECT_FALSE(expect.contains(id));
      EXPECT_EQ(f->h.node(id).level, 0u);
    }
  }
}

TEST(Hierarchical, OneLevelHierarchyIsBitIdenticalToFlat) {
  StreamRng rng(77, StreamDomain::synthetic, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t docs = 2 + rng.below(5);
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < docs; ++i) {
      const std::uint64_t kind = rng.below(4);
      texts.push_back(kind == 0 ? "kw1 x" : kind == 1 ? "kw2 y" : kind == 2 ? "z" : "kw3");
    }
    auto f = testing::make_docs_fixture(texts, {{"kw1", "A"}, {"kw2", "B"}, {"kw3", "C"}});
    Evaluator eval(*f->reader, f->x);
    const SamplerConfig c = config(1 + rng.below(60), rng());
    HierarchyConfig hc;
    hc.thresholds = {};
    const HierarchicalResult r = hierarchical_shapley(eval, f->h, c, hc);
    ASSERT_EQ(r.per_level.size(), 1u);
    EXPECT_EQ(r.per_level[0], permutation_shapley(eval, f->docs, c));
  }
}

TEST(Hierarchical, ThreeTierRefinesSentencesThenWords) {
  // Preamble question pinned, then two documents of two sentences each.
  std::vector<NodeLayout> top;
  NodeLayout question = NodeLayout::span(NodeKind::sentence, 1);
  question.pinned = true;
  top.push_back(question);
  for (int d = 0; d < 2; ++d) {
    top.push_back(NodeLayout::group(NodeKind::document,
                                    {NodeLayout::span(NodeKind::sentence, 2),
                                     NodeLayout::span(NodeKind::sentence, 3)}));
  }
  const HierarchySpec h = HierarchySpec::build(top);
  ASSERT_EQ(h.num_tokens(), 11u);
  ASSERT_EQ(h.depth(), 3u);

  // Answer "A" iff token 4 (second sentence of doc 0) is visible; "B" iff token 7.
  FunctionGame backend("tiers", [](const Mask& s) {
    if (s.test(4)) return std::string("A");
    if (s.test(7)) return std::string("B");
    return std::string(kAbstention);
  });
  const TokenSeq x(std::vector<TokenId>(11, 4), 4, Vocabulary::kPad);
  Evaluator eval(backend, x);
  HierarchyConfig hc;
  hc.thresholds = {0.1, 0.6};
  const HierarchicalResult r = hierarchical_shapley(eval, h, config(300, 8), hc);
  ASSERT_EQ(r.per_level.size(), 3u);
  ASSERT_EQ(r.important_sets.size(), 2u);

  const NodeId doc0 = h.players()[0];
  const NodeId doc1 = h.players()[1];
  EXPECT_EQ(r.important_sets[0], (std::set<NodeId>{doc0, doc1}));
  const NodeId s01 = h.node(doc0).children[1];
  EXPECT_EQ(r.important_sets[1], (std::set<NodeId>{s01}));
  EXPECT_DOUBLE_EQ(r.per_level[2].mass(h.leaf_at(4), "A"), 1.0);
  for (const auto& [id, counts] : r.per_level[2].counts()) {
    EXPECT_EQ(h.node(id).parent, s01);
  }
  // Phase 2 walks: doc1's two sentences, doc0's first sentence, three words.
  EXPECT_EQ(refined_path_cost(h, r.important_sets, 2), 6u);
  EXPECT_EQ(r.phases[2].evaluations, 300u * 6u + 1u);
}

TEST(Hierarchical, ParallelWorkersMatchSerial) {
  auto f = testing::make_docs_fixture({"kw1 a b", "kw2 c", "d", "kw1 kw2"},
                                      {{"kw1", "A"}, {"kw2", "B"}});
  Evaluator eval(*f->reader, f->x);
  SamplerConfig one = config(101, 5);
  SamplerConfig many = one;
  many.workers = 3;
  HierarchyConfig hc;
  hc.thresholds = {0.2};
  const HierarchicalResult a = hierarchical_shapley(eval, f->h, one, hc);
  const HierarchicalResult b = hierarchical_shapley(eval, f->h, many, hc);
  EXPECT_EQ(a.per_level, b.per_level);
  EXPECT_EQ(a.context, b.context);
  EXPECT_EQ(a.important_sets, b.important_sets);
}

TEST(Hierarchical, SeparateRefineBudgetAndSelectionModes) {
  auto f = testing::make_docs_fixture({"kw1 a", "kw2 b", "c"}, {{"kw1", "A"}, {"kw2", "B"}});
  Evaluator eval(*f->reader, f->x);
  HierarchyConfig hc;
  hc.thresholds = {0.3};
  hc.refine_paths = 7;
  const HierarchicalResult r = hierarchical_shapley(eval, f->h, config(40, 1), hc);
  EXPECT_EQ(r.phases[1].paths, 7u);
  EXPECT_EQ(r.per_level[1].sample_count(), 7u);

  hc.selection = SelectionMass::full_context_answer;
  const HierarchicalResult only_a = hierarchical_shapley(eval, f->h, config(40, 1), hc);
  EXPECT_EQ(only_a.important_sets[0], (std::set<NodeId>{f->docs[0].id}));

  HierarchyConfig bad;
  bad.thresholds = {-0.1};
  EXPECT_THROW(hierarchical_shapley(eval, f->h, config(4), bad), ContractViolation);
  bad.thresholds = {0.1};
  bad.refine_paths = 0;
  EXPECT_THROW(hierarchical_shapley(eval, f->h, config(4), bad), ContractViolation);
}

}  // namespace
}  // namespace genattr
