#pragma once

#include <cstdint>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace genattr {

using TokenId = std::int32_t;

/// Thread-safe word <-> id interning table. Ids start at 1; the first three
/// are reserved for padding, document separation and end-of-sequence.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 1;
  static constexpr TokenId kSep = 2;
  static constexpr TokenId kEos = 3;

  Vocabulary();
  Vocabulary(const Vocabulary& other);
  Vocabulary& operator=(const Vocabulary& other);

  TokenId intern(std::string_view word);
  // Returns 0 when the word is unknown.
  TokenId find(std::string_view word) const;
  std::string word(TokenId id) const;

  std::vector<TokenId> encode(std::string_view text);
  std::string decode(std::span<const TokenId> ids) const;

  // Largest assigned id; valid ids are [1, size()].
  std::int32_t size() const;

 private:
  mutable std::shared_mutex mu_;
  std::vector<std::string> words_;  // index = id - 1
  std::unordered_map<std::string, TokenId> ids_;
};

}  // namespace genattr
