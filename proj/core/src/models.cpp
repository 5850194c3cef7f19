#include "genattr/models.hpp"

#include <cmath>

#include "genattr/errors.hpp"

namespace genattr {

CallStats operator-(const CallStats& a, const CallStats& b) {
  return {a.encoder_calls - b.encoder_calls, a.decoder_calls - b.decoder_calls,
          a.verification_calls - b.verification_calls};
}

EncodingSession::EncodingSession(TokenSeq x, HierarchySpec h, const Generator* owner,
                                 std::uint64_t epoch)
    : x_(std::move(x)), h_(std::move(h)), owner_(owner), epoch_(epoch) {
  documents_ = h_.players();
  for (NodeId doc : documents_) {
    const auto& n = h_.node(doc);
    encodings_.emplace_back(x_.tokens().begin() + static_cast<std::ptrdiff_t>(n.begin),
                            x_.tokens().begin() + static_cast<std::ptrdiff_t>(n.end));
  }
}

void Generator::check_generation(const GenerationResult& r) const {
  if (r.steps.size() > max_answer_tokens_) {
    throw GenerationOverflow("answer of " + std::to_string(r.steps.size()) +
                             " tokens exceeds the bound of " + std::to_string(max_answer_tokens_));
  }
  for (const auto& step : r.steps) {
    if (step.logprob && *step.logprob > 0.0) {
      throw BackendError("backend reported a positive log-probability");
    }
  }
}

GenerationResult Generator::generate(const TokenSeq& x, const Mask& s, MaskMode mode) {
  if (s.size() != x.size()) {
    throw ContractViolation("mask length " + std::to_string(s.size()) +
                            " does not match input length " + std::to_string(x.size()));
  }
  GenerationResult r = do_generate(x, s, mode);
  check_generation(r);
  encoder_calls_.fetch_add(1);
  decoder_calls_.fetch_add(r.decoder_calls);
  return r;
}

std::shared_ptr<const EncodingSession> Generator::precompute_encodings(const TokenSeq& x,
                                                                       const HierarchySpec& h) {
  if (!descriptor().supports_doc_cache) {
    throw CapabilityError(descriptor().name + " does not support document encoding caches");
  }
  if (h.num_tokens() != x.size()) {
    throw ContractViolation("hierarchy does not cover the input sequence");
  }
  std::shared_ptr<const EncodingSession> session(
      new EncodingSession(x, h, this, epoch_.load()));
  encoder_calls_.fetch_add(session->num_documents());
  return session;
}

GenerationResult Generator::generate_with_doc_subset(const EncodingSession& session,
                                                     const std::set<NodeId>& active_docs) {
  if (!descriptor().supports_doc_cache) {
    throw CapabilityError(descriptor().name + " does not support document encoding caches");
  }
  if (session.owner_ != this || session.epoch_ != epoch_.load()) {
    throw StaleSession("encoding session is stale or belongs to another backend");
  }
  const auto& h = session.hierarchy();
  std::set<NodeId> visible;
  for (NodeId doc : active_docs) {
    if (!h.contains(doc) || h.node(doc).level != 0 || h.node(doc).pinned) {
      throw ContractViolation("unknown document id " + std::to_string(doc));
    }
    visible.insert(doc);
  }
  for (NodeId top : h.top_level()) {
    if (h.node(top).pinned) visible.insert(top);
  }
  GenerationResult r = do_generate_subset(session, mask_of_node(h, visible));
  check_generation(r);
  decoder_calls_.fetch_add(r.decoder_calls);
  return r;
}

GenerationResult Generator::do_generate_subset(const EncodingSession& session, const Mask& s) {
  return do_generate(session.input(), s, MaskMode::drop);
}

StepScores Generator::score_step(const TokenSeq& x, const Mask& s, MaskMode mode,
                                 std::span<const TokenId> prefix) {
  if (!descriptor().supports_step_scoring) {
    throw CapabilityError(descriptor().name + " does not support step scoring");
  }
  if (s.size() != x.size()) throw ContractViolation("mask length does not match input length");
  StepScores scores = do_score_step(x, s, mode, prefix);
  verification_calls_.fetch_add(1);
  return scores;
}

StepScores Generator::do_score_step(const TokenSeq&, const Mask&, MaskMode,
                                    std::span<const TokenId>) {
  throw CapabilityError(descriptor().name + " does not support step scoring");
}

CallStats Generator::stats() const {
  return {encoder_calls_.load(), decoder_calls_.load(), verification_calls_.load()};
}

double target_logprob(Generator& backend, const TokenSeq& x, const Mask& s, MaskMode mode,
                      std::span<const TokenId> target) {
  if (!backend.descriptor().supports_logprobs) {
    throw CapabilityError(backend.descriptor().name + " does not report log-probabilities");
  }
  std::vector<TokenId> prefix;
  double total = 0.0;
  for (std::size_t i = 0; i <= target.size(); ++i) {
    const TokenId want = i < target.size() ? target[i] : backend.eos_token();
    const StepScores scores = backend.score_step(x, s, mode, prefix);
    auto it = scores.logprobs.find(want);
    if (it == scores.logprobs.end()) {
      if (i == target.size()) break;  // EOS unscored: the target's own mass only
      throw BackendError("target answer is not scorable at step " + std::to_string(i));
    }
    total += it->second;
    if (i < target.size()) prefix.push_back(want);
  }
  if (!std::isfinite(total)) throw BackendError("target answer has zero probability");
  return total;
}

}  // namespace genattr
