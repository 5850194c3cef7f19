#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "genattr/models.hpp"

namespace genattr {

using SpecNodeId = std::uint32_t;

struct SpecNode {
  SpecNodeId id = 0;
  TokenId token = 0;
  std::optional<SpecNodeId> parent;  // absent for roots
  std::size_t depth = 0;             // roots have depth 0
  std::optional<double> logprob;
  bool terminal = false;
};

template <class T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

// Depth offset, or kAbsentBias where the column node is not an ancestor-or-self.
inline constexpr std::int32_t kAbsentBias = std::numeric_limits<std::int32_t>::min();
using BiasMatrix = Matrix<std::int32_t>;
using BoolMatrix = Matrix<std::uint8_t>;

/// Trie of decoded answers in node insertion order.
class SpecTree {
 public:
  using Detokenizer = std::function<std::string(std::span<const TokenId>)>;

  static constexpr std::size_t kDefaultCapacity = 256;

  explicit SpecTree(Detokenizer detokenize, std::size_t capacity = kDefaultCapacity);

  // Shares the longest existing prefix and appends the divergent suffix.
  // Idempotent; fills in missing log-probs on re-graft. Returns nullopt when
  // the answer is new and the tree already holds `capacity` answers.
  std::optional<SpecNodeId> graft(std::span<const TokenId> answer_tokens,
                                  std::span<const std::optional<double>> logprobs = {});

  void clear();

  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }
  std::size_t num_answers() const noexcept { return answer_index_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const SpecNode& node(SpecNodeId id) const { return nodes_.at(id); }
  const std::vector<SpecNode>& nodes() const noexcept { return nodes_; }
  const std::map<std::string, SpecNodeId>& answer_index() const noexcept { return answer_index_; }

  // Child of `parent` (nullopt = virtual root) carrying `token`.
  std::optional<SpecNodeId> child(std::optional<SpecNodeId> parent, TokenId token) const;
  std::vector<TokenId> path_tokens(SpecNodeId id) const;
  std::string answer_text(SpecNodeId terminal) const;
  bool is_ancestor_or_self(SpecNodeId ancestor, SpecNodeId node) const;

  // Sum of node log-probs along the answer's path; nullopt if any is missing.
  // Throws ContractViolation for an answer that is not indexed.
  std::optional<double> logprob_of(const std::string& answer) const;

  BiasMatrix position_bias() const;
  BoolMatrix causal_mask() const;

  // Deterministic JSON: nodes in insertion order, bias matrix, causal mask.
  std::string debug_json() const;

 private:
  Detokenizer detokenize_;
  std::size_t capacity_;
  std::vector<SpecNode> nodes_;
  std::map<std::pair<std::int64_t, TokenId>, SpecNodeId> edges_;  // (parent or -1, token)
  std::map<std::string, SpecNodeId> answer_index_;
};

BiasMatrix position_bias(const SpecTree& tree);
BoolMatrix causal_mask(const SpecTree& tree);

struct SpecStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t grafts = 0;
  std::uint64_t decoder_calls_saved = 0;
  // Tree passes run, hit or not (one pass per lookup on a non-empty tree).
  std::uint64_t verification_passes = 0;
  // score_step calls made inside those passes.
  std::uint64_t raw_steps = 0;

  SpecStats& operator+=(const SpecStats& other);
  friend bool operator==(const SpecStats&, const SpecStats&) = default;
};

struct SpeculationOptions {
  // Backends without step scoring fall back to plain decoding instead of throwing.
  bool allow_fallback = true;
};

/// Verify the greedy decoding against the tree in one pass; on a miss decode
/// autoregressively and graft. The answer always equals plain generate.
std::pair<GenerationResult, SpecStats> speculate_or_decode(SpecTree& tree, Generator& backend,
                                                           const TokenSeq& x, const Mask& s,
                                                           MaskMode mode,
                                                           SpeculationOptions options = {});

/// Per-example speculation cache shared by concurrent workers: verification
/// runs under a shared lock, grafts under an exclusive one.
class SpecCache {
 public:
  SpecCache(const Generator& backend, std::size_t capacity = SpecTree::kDefaultCapacity);

  // `decode` runs on a miss; it defaults to plain generate.
  using Decoder = std::function<GenerationResult()>;
  GenerationResult lookup_or_decode(Generator& backend, const TokenSeq& x, const Mask& s,
                                    MaskMode mode, const Decoder& decode = {});

  SpecStats stats() const;
  // Copy of the current tree.
  SpecTree tree() const;
  void reset();

 private:
  mutable std::shared_mutex mu_;
  SpecTree tree_;
  SpecStats stats_;
  SpeculationOptions options_;
};

}  // namespace genattr
