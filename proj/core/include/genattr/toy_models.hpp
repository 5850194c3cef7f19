#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "genattr/models.hpp"

namespace genattr {

struct Keyword {
  std::vector<TokenId> tokens;  // contiguous pattern in the input
  std::string answer;
};

// Table order is the tie-break order among keywords.
using KeywordTable = std::vector<Keyword>;

KeywordTable make_keyword_table(Vocabulary& vocab,
                                const std::vector<std::pair<std::string, std::string>>& entries);

/// Deterministic reader: answers with the answer of a keyword whose tokens are
/// all visible, "unknown" otherwise. Mask mode does not change the answer.
class ToyKeywordReader : public Generator {
 public:
  enum class Precedence {
    document_first,  // lowest document index, then keyword-table order
    keyword_first,   // keyword-table order, then lowest document index
  };

  struct Options {
    Precedence precedence = Precedence::document_first;
    // Documents start at this token; tokens before the first one are a
    // preamble that is never searched. Absent: the whole input is one document.
    std::optional<TokenId> separator;
    // Only the first `window` visible documents are read.
    std::optional<std::size_t> window;
    bool logprobs = false;
    bool doc_cache = true;
  };

  explicit ToyKeywordReader(KeywordTable table);
  ToyKeywordReader(KeywordTable table, Options options);

  BackendDescriptor descriptor() const override;
  TokenId eos_token() const override { return Vocabulary::kEos; }
  std::string detokenize(std::span<const TokenId> tokens) const override;
  std::vector<TokenId> tokenize_answer(std::string_view text) const override;

  // The rule itself, free of accounting.
  std::string answer_for(const TokenSeq& x, const Mask& s) const;

 protected:
  GenerationResult do_generate(const TokenSeq& x, const Mask& s, MaskMode mode) override;
  StepScores do_score_step(const TokenSeq& x, const Mask& s, MaskMode mode,
                           std::span<const TokenId> prefix) override;

 private:
  KeywordTable table_;
  Options options_;
  std::unordered_map<TokenId, std::vector<std::size_t>> by_first_;  // ascending indices
  mutable Vocabulary out_;
};

/// Answer given by an arbitrary pure function of the coalition.
class FunctionGame : public Generator {
 public:
  using AnswerFn = std::function<std::string(const Mask&)>;

  FunctionGame(std::string name, AnswerFn fn, bool logprobs = false);

  BackendDescriptor descriptor() const override;
  TokenId eos_token() const override { return Vocabulary::kEos; }
  std::string detokenize(std::span<const TokenId> tokens) const override;
  std::vector<TokenId> tokenize_answer(std::string_view text) const override;

 protected:
  GenerationResult do_generate(const TokenSeq& x, const Mask& s, MaskMode mode) override;
  StepScores do_score_step(const TokenSeq& x, const Mask& s, MaskMode mode,
                           std::span<const TokenId> prefix) override;

 private:
  std::string name_;
  AnswerFn fn_;
  bool logprobs_;
  mutable Vocabulary out_;
};

/// Always answers `target`; its log-probability under coalition s is given by
/// `logprob(s)` (must be <= 0). Used for the scalar log-prob game.
class ScalarGame : public Generator {
 public:
  using LogprobFn = std::function<double(const Mask&)>;

  ScalarGame(std::string target, LogprobFn logprob);

  BackendDescriptor descriptor() const override;
  TokenId eos_token() const override { return Vocabulary::kEos; }
  std::string detokenize(std::span<const TokenId> tokens) const override;
  std::vector<TokenId> tokenize_answer(std::string_view text) const override;

 protected:
  GenerationResult do_generate(const TokenSeq& x, const Mask& s, MaskMode mode) override;
  StepScores do_score_step(const TokenSeq& x, const Mask& s, MaskMode mode,
                           std::span<const TokenId> prefix) override;

 private:
  std::string target_;
  LogprobFn logprob_;
  mutable Vocabulary out_;
  TokenId target_id_;
  TokenId alternative_id_;
};

/// Greedy bigram decoder over a fixed transition table; input-independent.
/// Ties go to the smallest token id. Used as a table-lookup scoring oracle.
class BigramModel : public Generator {
 public:
  using Row = std::map<TokenId, double>;  // next token -> log-prob

  // `start` is the row used for an empty prefix.
  BigramModel(std::shared_ptr<Vocabulary> vocab, Row start, std::map<TokenId, Row> table);

  BackendDescriptor descriptor() const override;
  TokenId eos_token() const override { return Vocabulary::kEos; }
  std::string detokenize(std::span<const TokenId> tokens) const override;
  std::vector<TokenId> tokenize_answer(std::string_view text) const override;

  const Row& row_after(std::span<const TokenId> prefix) const;

 protected:
  GenerationResult do_generate(const TokenSeq& x, const Mask& s, MaskMode mode) override;
  StepScores do_score_step(const TokenSeq& x, const Mask& s, MaskMode mode,
                           std::span<const TokenId> prefix) override;

 private:
  std::shared_ptr<Vocabulary> vocab_;
  Row start_;
  std::map<TokenId, Row> table_;
};

}  // namespace genattr
