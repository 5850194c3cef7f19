#pragma once

#include <compare>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace genattr {

// The distinguished non-answer.
inline constexpr std::string_view kAbstention = "unknown";

// NFKC case-folded, punctuation stripped, whitespace collapsed and trimmed.
// Idempotent.
std::string normalize_answer(std::string_view text);

// Whitespace tokenizer used for toy data.
std::vector<std::string> split_words(std::string_view text);

// Sentence boundaries over a word list: a word ending in '.', '?' or '!' closes
// a sentence. Returns [begin, end) word ranges covering all words.
std::vector<std::pair<std::size_t, std::size_t>> split_sentences(
    const std::vector<std::string>& words);

// An interned answer string. Only constructible through normalization, so two
// answers that differ in case, punctuation or spacing share one key.
class AnswerKey {
 public:
  AnswerKey() = default;

  static AnswerKey from_text(std::string_view text) { return AnswerKey(normalize_answer(text)); }
  static AnswerKey abstention() { return AnswerKey(std::string(kAbstention)); }
  // Algorithm-literal blank baseline: the empty string, never produced by a model.
  static AnswerKey blank() { return AnswerKey(std::string()); }

  const std::string& str() const noexcept { return text_; }
  bool is_abstention() const noexcept { return text_ == kAbstention; }
  bool empty() const noexcept { return text_.empty(); }

  friend bool operator==(const AnswerKey&, const AnswerKey&) = default;
  friend auto operator<=>(const AnswerKey&, const AnswerKey&) = default;

 private:
  explicit AnswerKey(std::string text) : text_(std::move(text)) {}
  std::string text_;
};

}  // namespace genattr

template <>
struct std::hash<genattr::AnswerKey> {
  std::size_t operator()(const genattr::AnswerKey& k) const noexcept {
    return std::hash<std::string>{}(k.str());
  }
};
