#include "genattr/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <stdexcept>

namespace genattr {
namespace {

const icu::Normalizer2& nfkc_casefold() {
  static const icu::Normalizer2* instance = [] {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFKCCasefoldInstance(status);
    if (U_FAILURE(status) || n == nullptr) {
      throw std::runtime_error("ICU NFKC_Casefold normalizer unavailable");
    }
    return n;
  }();
  return *instance;
}

// Drops punctuation, collapses whitespace runs to one space, trims.
icu::UnicodeString strip_and_collapse(const icu::UnicodeString& in) {
  icu::UnicodeString out;
  bool pending_space = false;
  for (int32_t i = 0; i < in.length();) {
    const UChar32 c = in.char32At(i);
    i += U16_LENGTH(c);
    if (u_ispunct(c)) continue;
    if (u_isUWhiteSpace(c)) {
      pending_space = !out.isEmpty();
      continue;
    }
    if (pending_space) {
      out.append(static_cast<UChar>(' '));
      pending_space = false;
    }
    out.append(c);
  }
  return out;
}

}  // namespace

std::string normalize_answer(std::string_view text) {
  icu::UnicodeString current = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  // Removing characters can expose new compositions; iterate to a fixed point.
  for (int round = 0; round < 4; ++round) {
    UErrorCode status = U_ZERO_ERROR;
    icu::UnicodeString folded = nfkc_casefold().normalize(current, status);
    if (U_FAILURE(status)) throw std::runtime_error("ICU normalization failed");
    icu::UnicodeString next = strip_and_collapse(folded);
    if (next == current) break;
    current = std::move(next);
  }
  std::string out;
  current.toUTF8String(out);
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) words.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

std::vector<std::pair<std::size_t, std::size_t>> split_sentences(
    const std::vector<std::string>& words) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const char last = words[i].back();
    if (last == '.' || last == '?' || last == '!') {
      out.emplace_back(begin, i + 1);
      begin = i + 1;
    }
  }
  if (begin < words.size()) out.emplace_back(begin, words.size());
  return out;
}

}  // namespace genattr
