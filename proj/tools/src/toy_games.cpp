#include "genattr/cli/toy_games.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "genattr/toy_models.hpp"

namespace genattr::cli {

namespace {

TokenSeq make_input(const Vocabulary& vocab, std::vector<TokenId> tokens) {
  return TokenSeq(std::move(tokens), vocab.size(), Vocabulary::kPad);
}

// Documents of words, each led by a separator token; one player per document.
ToyGame keyword_documents(std::string name, const std::vector<std::string>& docs,
                          const std::vector<std::pair<std::string, std::string>>& keywords,
                          ToyKeywordReader::Precedence precedence) {
  auto vocab = std::make_shared<Vocabulary>();
  KeywordTable table = make_keyword_table(*vocab, keywords);
  std::vector<TokenId> tokens;
  std::vector<std::size_t> lengths;
  for (const auto& doc : docs) {
    const auto words = vocab->encode(doc);
    tokens.push_back(Vocabulary::kSep);
    tokens.insert(tokens.end(), words.begin(), words.end());
    lengths.push_back(words.size() + 1);
  }
  const HierarchySpec h = HierarchySpec::documents(lengths);
  const auto players = h.players();
  ToyKeywordReader::Options opts;
  opts.precedence = precedence;
  opts.separator = Vocabulary::kSep;
  opts.doc_cache = false;
  auto backend = std::make_unique<ToyKeywordReader>(std::move(table), opts);
  TokenSeq x = make_input(*vocab, std::move(tokens));
  return {std::move(name), vocab, std::move(backend), std::move(x),
          features_from_nodes(h, players)};
}

ToyGame function_game(std::string name, std::size_t n, FunctionGame::AnswerFn fn) {
  auto vocab = std::make_shared<Vocabulary>();
  std::vector<TokenId> tokens;
  for (std::size_t i = 0; i < n; ++i) tokens.push_back(vocab->intern("p" + std::to_string(i)));
  TokenSeq x = make_input(*vocab, std::move(tokens));
  auto backend = std::make_unique<FunctionGame>(name, std::move(fn));
  return {std::move(name), vocab, std::move(backend), std::move(x), token_features(n)};
}

}  // namespace

std::vector<ToyGame> builtin_toy_games() {
  std::vector<ToyGame> games;
  games.push_back(keyword_documents("keyword_3doc", {"river paris", "lyon", "city rome"},
                                    {{"paris", "paris"}, {"lyon", "lyon"}, {"rome", "rome"}},
                                    ToyKeywordReader::Precedence::document_first));

  games.push_back(function_game("weighted_vote", 5, [](const Mask& s) {
    static constexpr int kWeights[] = {4, 3, 2, 1, 1};
    int total = 0;
    for (std::size_t i = 0; i < 5; ++i) total += s.test(i) ? kWeights[i] : 0;
    return std::string(total >= 6 ? "pass" : "fail");
  }));

  games.push_back(keyword_documents(
      "keyword_first_6doc",
      {"decoy", "filler words", "other", "gold", "decoy", "other filler"},
      {{"gold", "amber"}, {"decoy", "birch"}, {"other", "cedar"}},
      ToyKeywordReader::Precedence::keyword_first));

  {
    auto vocab = std::make_shared<Vocabulary>();
    KeywordTable table = make_keyword_table(*vocab, {{"new york", "new york"}, {"boston", "boston"}});
    TokenSeq x = make_input(*vocab, vocab->encode("the new york office near boston"));
    ToyKeywordReader::Options opts;
    opts.doc_cache = false;
    auto backend = std::make_unique<ToyKeywordReader>(std::move(table), opts);
    const std::size_t n = x.size();
    games.push_back({"multi_token_keyword", vocab, std::move(backend), std::move(x),
                     token_features(n)});
  }

  games.push_back(function_game("symmetric_and", 4, [](const Mask& s) {
    return std::string(s.count() == 4 ? "yes" : kAbstention);
  }));
  return games;
}

double max_abs_difference(const AttributionTable& a, const AttributionTable& b) {
  std::set<FeatureId> features(a.universe().begin(), a.universe().end());
  features.insert(b.universe().begin(), b.universe().end());
  double worst = 0.0;
  for (FeatureId f : features) {
    std::set<std::string> answers;
    for (const auto* t : {&a, &b}) {
      if (const auto it = t->counts().find(f); it != t->counts().end()) {
        for (const auto& [key, _] : it->second) answers.insert(key.str());
      }
    }
    for (const auto& ans : answers) {
      const double ma = a.sample_count() ? a.mass(f, ans) : 0.0;
      const double mb = b.sample_count() ? b.mass(f, ans) : 0.0;
      worst = std::max(worst, std::abs(ma - mb));
    }
  }
  return worst;
}

std::vector<OracleReport> run_oracle_suite(const OracleSuiteOptions& options) {
  std::vector<OracleReport> reports;
  for (auto& game : builtin_toy_games()) {
    Evaluator eval(*game.backend, game.x);
    OracleReport r;
    r.name = game.name;
    r.players = game.features.size();

    const AttributionTable exact = exact_shapley_oracle(eval, game.features);
    for (std::size_t i = 0; i < options.seeds; ++i) {
      SamplerConfig cfg;
      cfg.num_paths = options.paths;
      cfg.seed = options.seed + i;
      cfg.workers = options.workers;
      r.shapley_error =
          std::max(r.shapley_error, max_abs_difference(permutation_shapley(eval, game.features, cfg), exact));
    }

    r.pass = r.shapley_error <= options.tolerance;
    for (double p : options.bernoulli_ps) {
      const AttributionTable exact_b = exact_banzhaf_oracle(eval, game.features, p);
      double worst = 0.0;
      for (std::size_t i = 0; i < options.seeds; ++i) {
        SamplerConfig cfg;
        cfg.num_paths = options.paths;
        cfg.seed = options.seed + i;
        cfg.bernoulli_p = p;
        cfg.workers = options.workers;
        worst = std::max(worst, max_abs_difference(banzhaf_estimate(eval, game.features, cfg), exact_b));
      }
      r.banzhaf.emplace_back(p, worst);
      r.pass = r.pass && worst <= options.tolerance;
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace genattr::cli
