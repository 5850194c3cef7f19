#include "genattr/evaluator.hpp"

#include "genattr/errors.hpp"

namespace genattr {

Evaluator::Evaluator(Generator& backend, const TokenSeq& x) : Evaluator(backend, x, Options{}) {}

Evaluator::Evaluator(Generator& backend, const TokenSeq& x, Options options)
    : backend_(backend), x_(x), options_(std::move(options)) {
  if (options_.session) {
    if (!(options_.session->input() == x_)) {
      throw ContractViolation("encoding session was built for a different input");
    }
    if (options_.mode != MaskMode::drop) {
      throw ContractViolation("document-subset evaluation requires drop mode");
    }
  }
}

std::set<NodeId> Evaluator::active_documents(const Mask& s) const {
  const auto& h = options_.session->hierarchy();
  std::set<NodeId> active;
  for (NodeId doc : options_.session->documents()) {
    const auto& n = h.node(doc);
    std::size_t visible = 0;
    for (std::size_t p = n.begin; p < n.end; ++p) visible += s.test(p) ? 1 : 0;
    if (visible == n.width()) {
      active.insert(doc);
    } else if (visible != 0) {
      throw ContractViolation("document-subset evaluation needs whole documents; document " +
                              std::to_string(doc) + " is partially masked");
    }
  }
  return active;
}

GenerationResult Evaluator::decode(const Mask& s) {
  if (options_.session) {
    return backend_.generate_with_doc_subset(*options_.session, active_documents(s));
  }
  return backend_.generate(x_, s, options_.mode);
}

GenerationResult Evaluator::generate(const Mask& s) {
  if (s.size() != x_.size()) throw ContractViolation("mask length does not match input length");
  evaluations_.fetch_add(1);
  if (options_.cache) {
    return options_.cache->lookup_or_decode(backend_, x_, s, options_.mode,
                                            [&] { return decode(s); });
  }
  return decode(s);
}

AnswerKey Evaluator::intern(const std::string& raw) {
  std::scoped_lock lock(keys_mu_);
  auto it = keys_.find(raw);
  if (it == keys_.end()) it = keys_.emplace(raw, AnswerKey::from_text(raw)).first;
  return it->second;
}

AnswerKey Evaluator::answer(const Mask& s) { return intern(generate(s).answer); }

}  // namespace genattr
