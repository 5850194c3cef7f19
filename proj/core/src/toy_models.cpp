#include "genattr/toy_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "genattr/errors.hpp"
#include "genattr/text.hpp"

namespace genattr {
namespace {

const double kTopLogprob = std::log(0.9);
const double kAltLogprob = std::log(0.1);

// Greedy continuation of a known answer: next answer token while the prefix
// agrees with it, EOS otherwise.
TokenId continuation(std::span<const TokenId> answer, std::span<const TokenId> prefix,
                     TokenId eos) {
  if (prefix.size() >= answer.size()) return eos;
  if (!std::equal(prefix.begin(), prefix.end(), answer.begin())) return eos;
  return answer[prefix.size()];
}

std::vector<DecodeStep> make_steps(const std::vector<TokenId>& tokens, bool logprobs) {
  std::vector<DecodeStep> steps;
  steps.reserve(tokens.size());
  for (TokenId t : tokens) {
    DecodeStep s{t, std::nullopt};
    if (logprobs) s.logprob = kTopLogprob;
    steps.push_back(s);
  }
  return steps;
}

StepScores two_point_scores(TokenId argmax, TokenId alternative, bool logprobs) {
  StepScores scores;
  scores.argmax = argmax;
  if (logprobs) {
    scores.logprobs[argmax] = kTopLogprob;
    if (alternative != argmax) scores.logprobs[alternative] = kAltLogprob;
  }
  return scores;
}

}  // namespace

KeywordTable make_keyword_table(Vocabulary& vocab,
                                const std::vector<std::pair<std::string, std::string>>& entries) {
  KeywordTable table;
  for (const auto& [keyword, answer] : entries) {
    Keyword k{vocab.encode(keyword), answer};
    if (k.tokens.empty()) throw ContractViolation("empty keyword for answer '" + answer + "'");
    table.push_back(std::move(k));
  }
  return table;
}

// ---------------------------------------------------------------------------
// ToyKeywordReader

ToyKeywordReader::ToyKeywordReader(KeywordTable table) : ToyKeywordReader(std::move(table), Options{}) {}

ToyKeywordReader::ToyKeywordReader(KeywordTable table, Options options)
    : table_(std::move(table)), options_(options) {
  for (auto& k : table_) {
    if (k.tokens.empty()) throw ContractViolation("keyword with no tokens");
    // Canonical spacing so that detokenized steps reproduce the answer.
    k.answer = out_.decode(out_.encode(k.answer));
  }
  for (std::size_t k = 0; k < table_.size(); ++k) by_first_[table_[k].tokens.front()].push_back(k);
  out_.encode(kAbstention);
}

BackendDescriptor ToyKeywordReader::descriptor() const {
  return {"toy-keyword", options_.logprobs, options_.doc_cache, true, true};
}

std::vector<TokenId> ToyKeywordReader::tokenize_answer(std::string_view text) const {
  return out_.encode(text);
}

std::string ToyKeywordReader::detokenize(std::span<const TokenId> tokens) const {
  return out_.decode(tokens);
}

std::string ToyKeywordReader::answer_for(const TokenSeq& x, const Mask& s) const {
  if (s.size() != x.size()) throw ContractViolation("mask length does not match input length");
  const auto& tok = x.tokens();
  const std::size_t n = tok.size();

  // Document spans.
  std::vector<std::pair<std::size_t, std::size_t>> docs;
  if (options_.separator) {
    std::size_t start = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (tok[i] != *options_.separator) continue;
      if (start < n) docs.emplace_back(start, i);
      start = i;
    }
    if (start < n) docs.emplace_back(start, n);
  } else if (n > 0) {
    docs.emplace_back(0, n);
  }

  std::size_t best_keyword = std::numeric_limits<std::size_t>::max();
  std::size_t visible_docs = 0;
  for (const auto& [begin, end] : docs) {
    bool any_visible = false;
    for (std::size_t i = begin; i < end && !any_visible; ++i) any_visible = s.test(i);
    if (!any_visible) continue;
    if (options_.window && visible_docs >= *options_.window) break;
    ++visible_docs;

    std::size_t doc_best = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = begin; i < end; ++i) {
      if (!s.test(i)) continue;
      auto candidates = by_first_.find(tok[i]);
      if (candidates == by_first_.end()) continue;
      for (std::size_t k : candidates->second) {
        if (k >= doc_best) break;
        const auto& kw = table_[k].tokens;
        if (i + kw.size() > end) continue;
        bool ok = true;
        for (std::size_t j = 0; j < kw.size() && ok; ++j) ok = tok[i + j] == kw[j] && s.test(i + j);
        if (ok) doc_best = k;
      }
    }
    if (doc_best == std::numeric_limits<std::size_t>::max()) continue;
    if (options_.precedence == Precedence::document_first) return table_[doc_best].answer;
    best_keyword = std::min(best_keyword, doc_best);
    if (best_keyword == 0) break;
  }
  if (best_keyword != std::numeric_limits<std::size_t>::max()) return table_[best_keyword].answer;
  return std::string(kAbstention);
}

GenerationResult ToyKeywordReader::do_generate(const TokenSeq& x, const Mask& s, MaskMode) {
  GenerationResult r;
  r.answer = answer_for(x, s);
  const auto tokens = out_.encode(r.answer);
  r.steps = make_steps(tokens, options_.logprobs);
  r.decoder_calls = tokens.size();
  return r;
}

StepScores ToyKeywordReader::do_score_step(const TokenSeq& x, const Mask& s, MaskMode,
                                           std::span<const TokenId> prefix) {
  const auto tokens = out_.encode(answer_for(x, s));
  const TokenId next = continuation(tokens, prefix, eos_token());
  const TokenId alt = next == eos_token() ? out_.find(kAbstention) : eos_token();
  return two_point_scores(next, alt, options_.logprobs);
}

// ---------------------------------------------------------------------------
// FunctionGame

FunctionGame::FunctionGame(std::string name, AnswerFn fn, bool logprobs)
    : name_(std::move(name)), fn_(std::move(fn)), logprobs_(logprobs) {
  out_.encode(kAbstention);
}

BackendDescriptor FunctionGame::descriptor() const { return {name_, logprobs_, true, true, true}; }

std::vector<TokenId> FunctionGame::tokenize_answer(std::string_view text) const {
  return out_.encode(text);
}

std::string FunctionGame::detokenize(std::span<const TokenId> tokens) const {
  return out_.decode(tokens);
}

GenerationResult FunctionGame::do_generate(const TokenSeq&, const Mask& s, MaskMode) {
  GenerationResult r;
  const auto tokens = out_.encode(fn_(s));
  r.answer = out_.decode(tokens);
  r.steps = make_steps(tokens, logprobs_);
  r.decoder_calls = tokens.size();
  return r;
}

StepScores FunctionGame::do_score_step(const TokenSeq&, const Mask& s, MaskMode,
                                       std::span<const TokenId> prefix) {
  const auto tokens = out_.encode(fn_(s));
  const TokenId next = continuation(tokens, prefix, eos_token());
  const TokenId alt = next == eos_token() ? out_.find(kAbstention) : eos_token();
  return two_point_scores(next, alt, logprobs_);
}

// ---------------------------------------------------------------------------
// ScalarGame

ScalarGame::ScalarGame(std::string target, LogprobFn logprob)
    : target_(std::move(target)), logprob_(std::move(logprob)) {
  auto ids = out_.encode(target_);
  if (ids.size() != 1) throw ContractViolation("scalar game target must be a single word");
  target_id_ = ids.front();
  target_ = out_.word(target_id_);
  alternative_id_ = out_.intern(std::string(kAbstention) == target_ ? "other" : kAbstention);
}

BackendDescriptor ScalarGame::descriptor() const { return {"scalar-game", true, true, true, true}; }

std::vector<TokenId> ScalarGame::tokenize_answer(std::string_view text) const {
  return out_.encode(text);
}

std::string ScalarGame::detokenize(std::span<const TokenId> tokens) const {
  return out_.decode(tokens);
}

GenerationResult ScalarGame::do_generate(const TokenSeq&, const Mask& s, MaskMode) {
  GenerationResult r;
  r.answer = target_;
  r.steps = {DecodeStep{target_id_, logprob_(s)}};
  r.decoder_calls = 1;
  return r;
}

StepScores ScalarGame::do_score_step(const TokenSeq&, const Mask& s, MaskMode,
                                     std::span<const TokenId> prefix) {
  StepScores scores;
  if (prefix.empty()) {
    const double v = logprob_(s);
    if (v > 0.0) throw BackendError("scalar game log-probability must be <= 0");
    scores.argmax = target_id_;
    scores.logprobs[target_id_] = v;
    if (v < 0.0) scores.logprobs[alternative_id_] = std::log1p(-std::exp(v));
  } else {
    scores.argmax = eos_token();
    scores.logprobs[eos_token()] = 0.0;
  }
  return scores;
}

// ---------------------------------------------------------------------------
// BigramModel

BigramModel::BigramModel(std::shared_ptr<Vocabulary> vocab, Row start, std::map<TokenId, Row> table)
    : vocab_(std::move(vocab)), start_(std::move(start)), table_(std::move(table)) {
  auto check = [](const Row& row) {
    if (row.empty()) throw ContractViolation("bigram row must not be empty");
    for (const auto& [t, lp] : row) {
      if (lp > 0.0) throw ContractViolation("bigram log-probabilities must be <= 0");
    }
  };
  check(start_);
  for (const auto& [t, row] : table_) check(row);
}

BackendDescriptor BigramModel::descriptor() const { return {"bigram", true, false, true, true}; }

std::vector<TokenId> BigramModel::tokenize_answer(std::string_view text) const {
  return (*vocab_).encode(text);
}

std::string BigramModel::detokenize(std::span<const TokenId> tokens) const {
  return vocab_->decode(tokens);
}

const BigramModel::Row& BigramModel::row_after(std::span<const TokenId> prefix) const {
  static const Row kEnd{{Vocabulary::kEos, 0.0}};
  if (prefix.empty()) return start_;
  auto it = table_.find(prefix.back());
  return it == table_.end() ? kEnd : it->second;
}

namespace {

std::pair<TokenId, double> best_of(const BigramModel::Row& row) {
  auto best = row.begin();
  for (auto it = row.begin(); it != row.end(); ++it) {
    if (it->second > best->second) best = it;  // map order: smallest id wins ties
  }
  return *best;
}

}  // namespace

GenerationResult BigramModel::do_generate(const TokenSeq&, const Mask&, MaskMode) {
  GenerationResult r;
  std::vector<TokenId> prefix;
  // One step past the bound is enough to detect overflow.
  while (prefix.size() <= max_answer_tokens()) {
    const auto [tok, lp] = best_of(row_after(prefix));
    if (tok == eos_token()) break;
    prefix.push_back(tok);
    r.steps.push_back({tok, lp});
  }
  r.answer = vocab_->decode(prefix);
  r.decoder_calls = r.steps.size();
  return r;
}

StepScores BigramModel::do_score_step(const TokenSeq&, const Mask&, MaskMode,
                                      std::span<const TokenId> prefix) {
  const Row& row = row_after(prefix);
  StepScores scores;
  scores.argmax = best_of(row).first;
  scores.logprobs = row;
  return scores;
}

}  // namespace genattr
