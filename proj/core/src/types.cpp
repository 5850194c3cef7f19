#include "genattr/types.hpp"

#include <algorithm>
#include <numeric>

#include "genattr/errors.hpp"

namespace genattr {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

StreamRng::StreamRng(std::uint64_t seed, StreamDomain domain, std::uint64_t stream,
                     std::uint64_t sub_stream)
    : key_(splitmix64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(domain)) ^
                      stream) ^
           splitmix64(sub_stream + 0x632be59bd9b4e019ULL)) {}

StreamRng::result_type StreamRng::operator()() {
  return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
}

namespace {
__extension__ typedef unsigned __int128 u128;
}  // namespace

std::uint64_t StreamRng::below(std::uint64_t n) {
  // Lemire's nearly-divisionless bounded draw.
  u128 m = static_cast<u128>((*this)()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<u128>((*this)()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double StreamRng::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

TokenSeq::TokenSeq(std::vector<TokenId> tokens, std::int32_t vocab_size, TokenId pad_id)
    : tokens_(std::move(tokens)), vocab_size_(vocab_size), pad_id_(pad_id) {
  if (vocab_size_ < 1) throw ContractViolation("vocab_size must be positive");
  if (pad_id_ < 1 || pad_id_ > vocab_size_) throw ContractViolation("pad_id outside [1, V]");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i] < 1 || tokens_[i] > vocab_size_) {
      throw ContractViolation("token " + std::to_string(tokens_[i]) + " at position " +
                              std::to_string(i) + " outside [1, V]");
    }
  }
}

std::size_t TokenSeq::content_count() const {
  return static_cast<std::size_t>(std::count_if(tokens_.begin(), tokens_.end(),
                                                [&](TokenId t) { return t != pad_id_; }));
}

Mask Mask::from_positions(std::size_t size, std::span<const std::size_t> positions) {
  Mask m(size);
  m.set_all(positions);
  return m;
}

Mask Mask::from_string(std::string_view bits) {
  Mask m(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      m.set(i);
    } else if (bits[i] != '0') {
      throw ContractViolation("mask string must contain only 0 and 1");
    }
  }
  return m;
}

void Mask::set_all(std::span<const std::size_t> positions, bool value) {
  for (std::size_t p : positions) {
    if (p >= bits_.size()) throw ContractViolation("mask position out of range");
    bits_[p] = value;
  }
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true));
}

std::vector<std::size_t> Mask::positions() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) out.push_back(i);
  }
  return out;
}

std::string Mask::to_string() const {
  std::string out(bits_.size(), '0');
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) out[i] = '1';
  }
  return out;
}

Mask& Mask::operator|=(const Mask& other) {
  if (other.size() != size()) throw ContractViolation("mask size mismatch");
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (other.bits_[i]) bits_[i] = true;
  }
  return *this;
}

std::string_view to_string(MaskMode mode) { return mode == MaskMode::pad ? "pad" : "drop"; }

MaskMode parse_mask_mode(std::string_view text) {
  if (text == "pad") return MaskMode::pad;
  if (text == "drop") return MaskMode::drop;
  throw ContractViolation("mask mode must be pad or drop, got '" + std::string(text) + "'");
}

TokenSeq apply_mask(const TokenSeq& x, const Mask& s, MaskMode mode) {
  if (s.size() != x.size()) {
    throw ContractViolation("mask length " + std::to_string(s.size()) +
                            " does not match sequence length " + std::to_string(x.size()));
  }
  std::vector<TokenId> out;
  out.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (s.test(i)) {
      out.push_back(x[i]);
    } else if (mode == MaskMode::pad) {
      out.push_back(x.pad_id());
    }
  }
  return TokenSeq(std::move(out), x.vocab_size(), x.pad_id());
}

Permutation::Permutation(std::vector<std::size_t> order) : order_(std::move(order)) {
  std::vector<bool> seen(order_.size(), false);
  for (std::size_t v : order_) {
    if (v >= order_.size() || seen[v]) throw ContractViolation("not a permutation");
    seen[v] = true;
  }
}

Permutation Permutation::identity(std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  return Permutation(std::move(order));
}

Permutation Permutation::random(std::size_t n, StreamRng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(std::span<std::size_t>(order), rng);
  return Permutation(std::move(order));
}

bool Permutation::next() { return std::next_permutation(order_.begin(), order_.end()); }

}  // namespace genattr
