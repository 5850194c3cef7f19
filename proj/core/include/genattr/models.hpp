#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "genattr/hierarchy_spec.hpp"
#include "genattr/types.hpp"

namespace genattr {

struct DecodeStep {
  TokenId token = 0;
  std::optional<double> logprob;

  friend bool operator==(const DecodeStep&, const DecodeStep&) = default;
};

struct GenerationResult {
  std::string answer;
  std::vector<DecodeStep> steps;
  std::uint64_t decoder_calls = 0;

  friend bool operator==(const GenerationResult&, const GenerationResult&) = default;
};

struct CallStats {
  std::uint64_t encoder_calls = 0;
  std::uint64_t decoder_calls = 0;
  std::uint64_t verification_calls = 0;

  friend bool operator==(const CallStats&, const CallStats&) = default;
};

CallStats operator-(const CallStats& a, const CallStats& b);

struct BackendDescriptor {
  std::string name;
  bool supports_logprobs = false;
  bool supports_doc_cache = false;
  bool supports_step_scoring = false;
  bool reentrant = false;
};

// Next-token scores after a prefix. `logprobs` is empty for backends that only
// report the argmax.
struct StepScores {
  TokenId argmax = 0;
  std::map<TokenId, double> logprobs;
};

class Generator;

/// Encode-once handle over one input and its document partition. Read-only
/// after creation; valid until its backend invalidates sessions.
class EncodingSession {
 public:
  const TokenSeq& input() const noexcept { return x_; }
  const HierarchySpec& hierarchy() const noexcept { return h_; }
  std::size_t num_documents() const noexcept { return documents_.size(); }
  const std::vector<NodeId>& documents() const noexcept { return documents_; }
  // Per-document encoder output stand-in: the document's token ids.
  const std::vector<std::vector<TokenId>>& encodings() const noexcept { return encodings_; }

 private:
  friend class Generator;
  EncodingSession(TokenSeq x, HierarchySpec h, const Generator* owner, std::uint64_t epoch);

  TokenSeq x_;
  HierarchySpec h_;
  std::vector<NodeId> documents_;
  std::vector<std::vector<TokenId>> encodings_;
  const Generator* owner_;
  std::uint64_t epoch_;
};

/// The masked text generator f(x, s). Public entry points check capabilities
/// and maintain CallStats; backends implement the protected hooks.
class Generator {
 public:
  virtual ~Generator() = default;

  virtual BackendDescriptor descriptor() const = 0;
  virtual TokenId eos_token() const = 0;
  virtual std::string detokenize(std::span<const TokenId> tokens) const = 0;
  // Output-vocabulary ids of an answer text.
  virtual std::vector<TokenId> tokenize_answer(std::string_view text) const = 0;

  GenerationResult generate(const TokenSeq& x, const Mask& s, MaskMode mode);

  std::shared_ptr<const EncodingSession> precompute_encodings(const TokenSeq& x,
                                                              const HierarchySpec& h);
  GenerationResult generate_with_doc_subset(const EncodingSession& session,
                                            const std::set<NodeId>& active_docs);

  StepScores score_step(const TokenSeq& x, const Mask& s, MaskMode mode,
                        std::span<const TokenId> prefix);

  // Makes every outstanding EncodingSession stale.
  void invalidate_sessions() { epoch_.fetch_add(1); }

  CallStats stats() const;

  // Bound m on generated answer length (tokens).
  std::size_t max_answer_tokens() const noexcept { return max_answer_tokens_; }
  void set_max_answer_tokens(std::size_t m) { max_answer_tokens_ = m; }

 protected:
  virtual GenerationResult do_generate(const TokenSeq& x, const Mask& s, MaskMode mode) = 0;
  // Default: plain generation over the drop-masked session input.
  virtual GenerationResult do_generate_subset(const EncodingSession& session, const Mask& s);
  virtual StepScores do_score_step(const TokenSeq& x, const Mask& s, MaskMode mode,
                                   std::span<const TokenId> prefix);

 private:
  void check_generation(const GenerationResult& r) const;

  std::atomic<std::uint64_t> encoder_calls_{0};
  std::atomic<std::uint64_t> decoder_calls_{0};
  std::atomic<std::uint64_t> verification_calls_{0};
  std::atomic<std::uint64_t> epoch_{0};
  std::size_t max_answer_tokens_ = 64;
};

// Sum of log-probs of `target` tokens followed by EOS, via score_step.
// Throws BackendError when the backend reports no score for a target token.
double target_logprob(Generator& backend, const TokenSeq& x, const Mask& s, MaskMode mode,
                      std::span<const TokenId> target);

}  // namespace genattr
