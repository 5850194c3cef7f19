#pragma once

// Shared test fixtures and brute-force reference computations. The
// references below deliberately avoid the library's estimator code: they walk
// std::next_permutation orders or enumerate subsets with floating Bernoulli
// weights directly.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "genattr/genattr.hpp"

namespace genattr::testing {

// Documents laid out as [sep w...] [sep w...] ..., one hierarchy document each.
struct DocsFixture {
  Vocabulary vocab;
  TokenSeq x{{}, 3, Vocabulary::kPad};
  HierarchySpec h;
  FeatureList docs;
  std::unique_ptr<ToyKeywordReader> reader;
};

inline std::unique_ptr<DocsFixture> make_docs_fixture(
    const std::vector<std::string>& doc_texts,
    const std::vector<std::pair<std::string, std::string>>& keywords,
    ToyKeywordReader::Options options = {}) {
  auto f = std::make_unique<DocsFixture>();
  std::vector<TokenId> tokens;
  std::vector<std::size_t> lengths;
  for (const auto& text : doc_texts) {
    tokens.push_back(Vocabulary::kSep);
    const auto ids = f->vocab.encode(text);
    tokens.insert(tokens.end(), ids.begin(), ids.end());
    lengths.push_back(1 + ids.size());
  }
  auto table = make_keyword_table(f->vocab, keywords);
  f->x = TokenSeq(tokens, f->vocab.size(), Vocabulary::kPad);
  f->h = HierarchySpec::documents(lengths);
  f->docs = features_from_nodes(f->h, f->h.players());
  options.separator = Vocabulary::kSep;
  f->reader = std::make_unique<ToyKeywordReader>(std::move(table), options);
  return f;
}

// The three-document game used throughout: D1 -> "A", D2 -> "B", D3 empty.
inline std::unique_ptr<DocsFixture> three_doc_game(ToyKeywordReader::Options options = {}) {
  return make_docs_fixture({"kw1 filler", "kw2 filler", "filler filler"},
                           {{"kw1", "A"}, {"kw2", "B"}}, options);
}

// Game value as a function of which features are present.
using MemberGame = std::function<std::string(const std::vector<bool>&)>;

inline MemberGame member_game(Generator& backend, const TokenSeq& x, const FeatureList& features,
                              MaskMode mode = MaskMode::pad) {
  return [&backend, x, features, mode](const std::vector<bool>& members) {
    Mask m(x.size(), true);
    for (const auto& f : features) m.set_all(f.positions, false);
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (members[i]) m.set_all(features[i].positions);
    }
    return normalize_answer(backend.generate(x, m, mode).answer);
  };
}

// (feature index, normalized answer) -> averaged mass.
using CellMap = std::map<std::pair<std::size_t, std::string>, double>;

// Walks every ordering of n players with std::next_permutation and applies the
// answer-change rule along each one.
inline CellMap brute_force_orderings(const MemberGame& game, std::size_t n,
                                     bool blank_baseline = false) {
  std::map<std::vector<bool>, std::string> memo;
  auto value = [&](const std::vector<bool>& m) {
    auto it = memo.find(m);
    if (it == memo.end()) it = memo.emplace(m, game(m)).first;
    return it->second;
  };
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::map<std::pair<std::size_t, std::string>, long> counts;
  long orderings = 0;
  do {
    ++orderings;
    std::vector<bool> present(n, false);
    std::string current = blank_baseline ? std::string() : value(present);
    for (std::size_t i : order) {
      present[i] = true;
      const std::string next = value(present);
      if (next != current) {
        ++counts[{i, next}];
        current = next;
      }
    }
  } while (std::next_permutation(order.begin(), order.end()));
  CellMap out;
  for (const auto& [cell, c] : counts) out[cell] = static_cast<double>(c) / orderings;
  return out;
}

// Expected paired-flip positive part under independent Bernoulli(p) membership.
inline CellMap brute_force_bernoulli(const MemberGame& game, std::size_t n, double p) {
  CellMap out;
  for (std::uint64_t b = 0; b < (std::uint64_t{1} << n); ++b) {
    std::vector<bool> members(n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      members[i] = (b >> i) & 1U;
      k += members[i] ? 1 : 0;
    }
    const double w = std::pow(p, static_cast<double>(k)) *
                     std::pow(1.0 - p, static_cast<double>(n - k));
    for (std::size_t i = 0; i < n; ++i) {
      auto with = members;
      with[i] = true;
      auto without = members;
      without[i] = false;
      const std::string a = game(with);
      if (a != game(without)) out[{i, a}] += w;
    }
  }
  return out;
}

// Largest |table - reference| over every cell present in either.
inline double max_abs_diff(const AttributionTable& table, const FeatureList& features,
                           const CellMap& reference) {
  double worst = 0.0;
  for (const auto& [cell, v] : reference) {
    worst = std::max(worst, std::abs(table.mass(features[cell.first].id, cell.second) - v));
  }
  for (std::size_t i = 0; i < features.size(); ++i) {
    const AnswerDistribution d = table.distribution(features[i].id);
    for (const auto& [answer, w] : d.weights()) {
      if (!reference.contains({i, answer.str()})) worst = std::max(worst, w);
    }
  }
  return worst;
}

}  // namespace genattr::testing
