#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "genattr/rng.hpp"
#include "genattr/vocabulary.hpp"

namespace genattr {

/// Input token sequence over a vocabulary [1, V] with one reserved pad id.
class TokenSeq {
 public:
  TokenSeq(std::vector<TokenId> tokens, std::int32_t vocab_size, TokenId pad_id);

  const std::vector<TokenId>& tokens() const noexcept { return tokens_; }
  std::int32_t vocab_size() const noexcept { return vocab_size_; }
  TokenId pad_id() const noexcept { return pad_id_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  TokenId operator[](std::size_t i) const { return tokens_[i]; }

  // Number of non-pad tokens.
  std::size_t content_count() const;

  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;

 private:
  std::vector<TokenId> tokens_;
  std::int32_t vocab_size_;
  TokenId pad_id_;
};

/// Coalition over input positions: bit i set means token i is visible.
class Mask {
 public:
  Mask() = default;
  explicit Mask(std::size_t size, bool value = false) : bits_(size, value) {}

  static Mask from_positions(std::size_t size, std::span<const std::size_t> positions);
  static Mask from_string(std::string_view bits);  // "1011"

  std::size_t size() const noexcept { return bits_.size(); }
  bool test(std::size_t i) const { return bits_[i]; }
  void set(std::size_t i, bool value = true) { bits_[i] = value; }
  void set_all(std::span<const std::size_t> positions, bool value = true);

  std::size_t count() const;
  std::vector<std::size_t> positions() const;
  std::string to_string() const;

  Mask& operator|=(const Mask& other);

  friend bool operator==(const Mask&, const Mask&) = default;
  std::size_t hash() const { return std::hash<std::vector<bool>>{}(bits_); }

 private:
  std::vector<bool> bits_;
};

enum class MaskMode { pad, drop };

std::string_view to_string(MaskMode mode);
MaskMode parse_mask_mode(std::string_view text);

// pad: masked positions replaced by pad_id; drop: masked positions removed.
TokenSeq apply_mask(const TokenSeq& x, const Mask& s, MaskMode mode);

/// Bijective ordering of feature indices [0, n).
class Permutation {
 public:
  explicit Permutation(std::vector<std::size_t> order);

  static Permutation identity(std::size_t n);
  static Permutation random(std::size_t n, StreamRng& rng);

  std::size_t size() const noexcept { return order_.size(); }
  std::size_t operator[](std::size_t i) const { return order_[i]; }
  const std::vector<std::size_t>& order() const noexcept { return order_; }
  auto begin() const { return order_.begin(); }
  auto end() const { return order_.end(); }

  // Advances to the lexicographically next ordering; false after the last.
  bool next();

 private:
  std::vector<std::size_t> order_;
};

}  // namespace genattr

template <>
struct std::hash<genattr::Mask> {
  std::size_t operator()(const genattr::Mask& m) const { return m.hash(); }
};
