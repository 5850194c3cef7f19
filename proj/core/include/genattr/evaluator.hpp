#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <unordered_map>

#include "genattr/models.hpp"
#include "genattr/spectree.hpp"
#include "genattr/text.hpp"

namespace genattr {

/// Coalition value oracle v(S) for one input: maps a mask to the normalized
/// answer key, routing through the speculation cache and/or an encoding
/// session when configured. Safe to call from several workers when the
/// backend is reentrant.
class Evaluator {
 public:
  struct Options {
    MaskMode mode = MaskMode::pad;
    SpecCache* cache = nullptr;                       // not owned
    std::shared_ptr<const EncodingSession> session;  // drop-mode document subsets
  };

  Evaluator(Generator& backend, const TokenSeq& x);
  Evaluator(Generator& backend, const TokenSeq& x, Options options);

  AnswerKey answer(const Mask& s);
  GenerationResult generate(const Mask& s);

  Generator& backend() noexcept { return backend_; }
  const TokenSeq& input() const noexcept { return x_; }
  const Options& options() const noexcept { return options_; }

  // Coalition evaluations made through this evaluator.
  std::uint64_t evaluations() const noexcept { return evaluations_.load(); }

 private:
  GenerationResult decode(const Mask& s);
  std::set<NodeId> active_documents(const Mask& s) const;
  AnswerKey intern(const std::string& raw);

  Generator& backend_;
  TokenSeq x_;
  Options options_;
  std::atomic<std::uint64_t> evaluations_{0};
  std::mutex keys_mu_;
  std::unordered_map<std::string, AnswerKey> keys_;
};

}  // namespace genattr
