#include "genattr/spectree.hpp"

#include <mutex>

#include <json.hpp>

#include "genattr/errors.hpp"

namespace genattr {

SpecTree::SpecTree(Detokenizer detokenize, std::size_t capacity)
    : detokenize_(std::move(detokenize)), capacity_(capacity) {
  if (!detokenize_) throw ContractViolation("speculation tree needs a detokenizer");
}

std::optional<SpecNodeId> SpecTree::child(std::optional<SpecNodeId> parent, TokenId token) const {
  const std::int64_t key = parent ? static_cast<std::int64_t>(*parent) : -1;
  auto it = edges_.find({key, token});
  if (it == edges_.end()) return std::nullopt;
  return it->second;
}

std::optional<SpecNodeId> SpecTree::graft(std::span<const TokenId> answer_tokens,
                                          std::span<const std::optional<double>> logprobs) {
  if (answer_tokens.empty()) throw ContractViolation("cannot graft an empty answer");
  if (!logprobs.empty() && logprobs.size() != answer_tokens.size()) {
    throw ContractViolation("log-prob list length must match the answer");
  }
  auto logprob_at = [&](std::size_t i) -> std::optional<double> {
    return logprobs.empty() ? std::nullopt : logprobs[i];
  };

  // Longest existing prefix.
  std::optional<SpecNodeId> cur;
  std::size_t matched = 0;
  while (matched < answer_tokens.size()) {
    auto next = child(cur, answer_tokens[matched]);
    if (!next) break;
    cur = next;
    ++matched;
  }
  const bool already_indexed = matched == answer_tokens.size() && nodes_[*cur].terminal;
  if (!already_indexed && answer_index_.size() >= capacity_) return std::nullopt;

  // Fill in log-probs along the shared prefix.
  {
    std::optional<SpecNodeId> walk;
    for (std::size_t i = 0; i < matched; ++i) {
      walk = child(walk, answer_tokens[i]);
      auto& node = nodes_[*walk];
      if (!node.logprob) node.logprob = logprob_at(i);
    }
  }
  if (already_indexed) return cur;

  for (std::size_t i = matched; i < answer_tokens.size(); ++i) {
    SpecNode node;
    node.id = static_cast<SpecNodeId>(nodes_.size());
    node.token = answer_tokens[i];
    node.parent = cur;
    node.depth = cur ? nodes_[*cur].depth + 1 : 0;
    node.logprob = logprob_at(i);
    nodes_.push_back(node);
    edges_.emplace(std::pair{cur ? static_cast<std::int64_t>(*cur) : std::int64_t{-1}, node.token},
                   node.id);
    cur = node.id;
  }
  nodes_[*cur].terminal = true;
  answer_index_.emplace(detokenize_(answer_tokens), *cur);
  return cur;
}

void SpecTree::clear() {
  nodes_.clear();
  edges_.clear();
  answer_index_.clear();
}

std::vector<TokenId> SpecTree::path_tokens(SpecNodeId id) const {
  std::vector<TokenId> out(nodes_.at(id).depth + 1);
  std::optional<SpecNodeId> cur = id;
  for (std::size_t i = out.size(); i > 0; --i) {
    out[i - 1] = nodes_[*cur].token;
    cur = nodes_[*cur].parent;
  }
  return out;
}

std::string SpecTree::answer_text(SpecNodeId terminal) const {
  const auto tokens = path_tokens(terminal);
  return detokenize_(tokens);
}

bool SpecTree::is_ancestor_or_self(SpecNodeId ancestor, SpecNodeId id) const {
  std::optional<SpecNodeId> cur = id;
  while (cur) {
    if (*cur == ancestor) return true;
    cur = nodes_.at(*cur).parent;
  }
  return false;
}

std::optional<double> SpecTree::logprob_of(const std::string& answer) const {
  auto it = answer_index_.find(answer);
  if (it == answer_index_.end()) throw ContractViolation("answer '" + answer + "' not in tree");
  double sum = 0.0;
  std::optional<SpecNodeId> cur = it->second;
  while (cur) {
    const auto& node = nodes_[*cur];
    if (!node.logprob) return std::nullopt;
    sum += *node.logprob;
    cur = node.parent;
  }
  return sum;
}

BiasMatrix SpecTree::position_bias() const {
  const std::size_t n = nodes_.size();
  BiasMatrix bias(n, n, kAbsentBias);
  for (std::size_t a = 0; a < n; ++a) {
    std::optional<SpecNodeId> cur = static_cast<SpecNodeId>(a);
    while (cur) {
      bias(a, *cur) = static_cast<std::int32_t>(nodes_[a].depth) -
                      static_cast<std::int32_t>(nodes_[*cur].depth);
      cur = nodes_[*cur].parent;
    }
  }
  return bias;
}

BoolMatrix SpecTree::causal_mask() const {
  const BiasMatrix bias = position_bias();
  BoolMatrix mask(bias.rows(), bias.cols(), 0);
  for (std::size_t a = 0; a < bias.rows(); ++a) {
    for (std::size_t b = 0; b < bias.cols(); ++b) mask(a, b) = bias(a, b) != kAbsentBias ? 1 : 0;
  }
  return mask;
}

std::string SpecTree::debug_json() const {
  using nlohmann::json;
  json j;
  j["nodes"] = json::array();
  for (const auto& node : nodes_) {
    json jn;
    jn["id"] = node.id;
    jn["token"] = node.token;
    jn["parent"] = node.parent ? json(*node.parent) : json(nullptr);
    jn["depth"] = node.depth;
    jn["logprob"] = node.logprob ? json(*node.logprob) : json(nullptr);
    jn["terminal"] = node.terminal;
    j["nodes"].push_back(std::move(jn));
  }
  json answers = json::object();
  for (const auto& [text, id] : answer_index_) answers[text] = id;
  j["answers"] = std::move(answers);
  const BiasMatrix bias = position_bias();
  const BoolMatrix mask = causal_mask();
  j["position_bias"] = json::array();
  j["causal_mask"] = json::array();
  for (std::size_t a = 0; a < bias.rows(); ++a) {
    json brow = json::array();
    json mrow = json::array();
    for (std::size_t b = 0; b < bias.cols(); ++b) {
      brow.push_back(bias(a, b) == kAbsentBias ? json(nullptr) : json(bias(a, b)));
      mrow.push_back(static_cast<int>(mask(a, b)));
    }
    j["position_bias"].push_back(std::move(brow));
    j["causal_mask"].push_back(std::move(mrow));
  }
  return j.dump(2);
}

BiasMatrix position_bias(const SpecTree& tree) { return tree.position_bias(); }
BoolMatrix causal_mask(const SpecTree& tree) { return tree.causal_mask(); }

SpecStats& SpecStats::operator+=(const SpecStats& o) {
  hits += o.hits;
  misses += o.misses;
  grafts += o.grafts;
  decoder_calls_saved += o.decoder_calls_saved;
  verification_passes += o.verification_passes;
  raw_steps += o.raw_steps;
  return *this;
}

namespace {

// One tree pass: follow the backend's argmax through the trie. Returns the
// speculated result on a hit.
std::optional<GenerationResult> verify(const SpecTree& tree, Generator& backend, const TokenSeq& x,
                                       const Mask& s, MaskMode mode, SpecStats& stats) {
  if (tree.empty()) return std::nullopt;
  ++stats.verification_passes;
  std::optional<SpecNodeId> cur;
  std::vector<TokenId> prefix;
  std::vector<DecodeStep> steps;
  while (prefix.size() <= backend.max_answer_tokens()) {
    const StepScores scores = backend.score_step(x, s, mode, prefix);
    ++stats.raw_steps;
    if (scores.argmax == backend.eos_token()) {
      if (!cur || !tree.node(*cur).terminal) return std::nullopt;
      GenerationResult r;
      r.answer = tree.answer_text(*cur);
      r.steps = std::move(steps);
      r.decoder_calls = 0;
      ++stats.hits;
      stats.decoder_calls_saved += r.steps.size() - 1;
      return r;
    }
    auto next = tree.child(cur, scores.argmax);
    if (!next) return std::nullopt;
    DecodeStep step{scores.argmax, tree.node(*next).logprob};
    if (auto it = scores.logprobs.find(scores.argmax); it != scores.logprobs.end()) {
      step.logprob = it->second;
    }
    steps.push_back(step);
    prefix.push_back(scores.argmax);
    cur = next;
  }
  return std::nullopt;
}

// Returns true when the tree gained an answer.
bool graft_result(SpecTree& tree, const GenerationResult& r) {
  if (r.steps.empty()) return false;
  std::vector<TokenId> tokens;
  std::vector<std::optional<double>> logprobs;
  for (const auto& step : r.steps) {
    tokens.push_back(step.token);
    logprobs.push_back(step.logprob);
  }
  const std::size_t before = tree.num_answers();
  tree.graft(tokens, logprobs);
  return tree.num_answers() > before;
}

bool can_verify(Generator& backend, const SpeculationOptions& options) {
  if (backend.descriptor().supports_step_scoring) return true;
  if (!options.allow_fallback) {
    throw CapabilityError(backend.descriptor().name +
                          " cannot verify speculations (no step scoring)");
  }
  return false;
}

}  // namespace

std::pair<GenerationResult, SpecStats> speculate_or_decode(SpecTree& tree, Generator& backend,
                                                           const TokenSeq& x, const Mask& s,
                                                           MaskMode mode,
                                                           SpeculationOptions options) {
  SpecStats delta;
  if (!can_verify(backend, options)) {
    ++delta.misses;
    return {backend.generate(x, s, mode), delta};
  }
  if (auto hit = verify(tree, backend, x, s, mode, delta)) return {std::move(*hit), delta};
  GenerationResult r = backend.generate(x, s, mode);
  ++delta.misses;
  if (graft_result(tree, r)) ++delta.grafts;
  return {std::move(r), delta};
}

SpecCache::SpecCache(const Generator& backend, std::size_t capacity)
    : tree_([&backend](std::span<const TokenId> t) { return backend.detokenize(t); }, capacity) {}

GenerationResult SpecCache::lookup_or_decode(Generator& backend, const TokenSeq& x, const Mask& s,
                                             MaskMode mode, const Decoder& decode) {
  auto plain = [&] { return decode ? decode() : backend.generate(x, s, mode); };
  SpecStats delta;
  if (can_verify(backend, options_)) {
    std::optional<GenerationResult> hit;
    {
      std::shared_lock lock(mu_);
      hit = verify(tree_, backend, x, s, mode, delta);
    }
    if (hit) {
      std::unique_lock lock(mu_);
      stats_ += delta;
      return std::move(*hit);
    }
  }
  GenerationResult r = plain();
  std::unique_lock lock(mu_);
  ++delta.misses;
  if (backend.descriptor().supports_step_scoring && graft_result(tree_, r)) ++delta.grafts;
  stats_ += delta;
  return r;
}

SpecStats SpecCache::stats() const {
  std::shared_lock lock(mu_);
  return stats_;
}

SpecTree SpecCache::tree() const {
  std::shared_lock lock(mu_);
  return tree_;
}

void SpecCache::reset() {
  std::unique_lock lock(mu_);
  tree_.clear();
  stats_ = {};
}

}  // namespace genattr
