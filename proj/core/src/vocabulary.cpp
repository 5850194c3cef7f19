#include "genattr/vocabulary.hpp"

#include <mutex>

#include "genattr/errors.hpp"
#include "genattr/text.hpp"

namespace genattr {

Vocabulary::Vocabulary() {
  for (const char* w : {"<pad>", "<sep>", "<eos>"}) {
    words_.emplace_back(w);
    ids_.emplace(w, static_cast<TokenId>(words_.size()));
  }
}

Vocabulary::Vocabulary(const Vocabulary& other) {
  std::shared_lock lock(other.mu_);
  words_ = other.words_;
  ids_ = other.ids_;
}

Vocabulary& Vocabulary::operator=(const Vocabulary& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_);
  std::shared_lock other_lock(other.mu_);
  words_ = other.words_;
  ids_ = other.ids_;
  return *this;
}

TokenId Vocabulary::intern(std::string_view word) {
  {
    std::shared_lock lock(mu_);
    if (auto it = ids_.find(std::string(word)); it != ids_.end()) return it->second;
  }
  std::unique_lock lock(mu_);
  auto [it, inserted] = ids_.emplace(std::string(word), static_cast<TokenId>(words_.size() + 1));
  if (inserted) words_.emplace_back(word);
  return it->second;
}

TokenId Vocabulary::find(std::string_view word) const {
  std::shared_lock lock(mu_);
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? 0 : it->second;
}

std::string Vocabulary::word(TokenId id) const {
  std::shared_lock lock(mu_);
  if (id < 1 || static_cast<std::size_t>(id) > words_.size()) {
    throw ContractViolation("token id " + std::to_string(id) + " outside vocabulary");
  }
  return words_[static_cast<std::size_t>(id - 1)];
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) {
  std::vector<TokenId> ids;
  for (const auto& w : split_words(text)) ids.push_back(intern(w));
  return ids;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (!out.empty()) out.push_back(' ');
    out += word(id);
  }
  return out;
}

std::int32_t Vocabulary::size() const {
  std::shared_lock lock(mu_);
  return static_cast<std::int32_t>(words_.size());
}

}  // namespace genattr
