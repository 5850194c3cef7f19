#pragma once

#include <memory>
#include <string>
#include <vector>

#include "genattr/genattr.hpp"

namespace genattr::bench {

// Keyword reader over `docs` documents of `words` tokens each; documents
// 1 and docs-2 hold the two keywords.
struct DocsGame {
  Vocabulary vocab;
  std::unique_ptr<ToyKeywordReader> reader;
  TokenSeq x{{}, 3, Vocabulary::kPad};
  HierarchySpec h;
  FeatureList docs;
};

inline std::unique_ptr<DocsGame> docs_game(std::size_t docs, std::size_t words) {
  auto g = std::make_unique<DocsGame>();
  auto table = make_keyword_table(g->vocab, {{"alpha", "first answer"}, {"beta", "second"}});
  std::vector<TokenId> tokens;
  std::vector<std::size_t> lengths;
  for (std::size_t d = 0; d < docs; ++d) {
    tokens.push_back(Vocabulary::kSep);
    for (std::size_t w = 0; w < words; ++w) {
      std::string word = "w" + std::to_string(w);
      if (w == words / 2 && d == 1) word = "alpha";
      if (w == words / 3 && d + 2 == docs) word = "beta";
      tokens.push_back(g->vocab.intern(word));
    }
    lengths.push_back(words + 1);
  }
  g->x = TokenSeq(tokens, g->vocab.size(), Vocabulary::kPad);
  g->h = HierarchySpec::documents(lengths);
  g->docs = features_from_nodes(g->h, g->h.players());
  ToyKeywordReader::Options o;
  o.separator = Vocabulary::kSep;
  g->reader = std::make_unique<ToyKeywordReader>(std::move(table), o);
  return g;
}

}  // namespace genattr::bench
