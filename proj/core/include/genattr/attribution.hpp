#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "genattr/text.hpp"

namespace genattr {

// Hierarchy node id or token position, depending on the feature list.
using FeatureId = std::uint32_t;

/// Sparse answer -> weight map read out of an AttributionTable.
class AnswerDistribution {
 public:
  AnswerDistribution() = default;
  explicit AnswerDistribution(std::map<AnswerKey, double> weights, bool normalized = false);

  const std::map<AnswerKey, double>& weights() const noexcept { return weights_; }
  double weight(std::string_view answer) const;
  double total(bool exclude_abstention = false) const;
  bool empty() const noexcept { return weights_.empty(); }
  bool normalized() const noexcept { return normalized_; }

  // Copy rescaled to sum to one. Empty distributions stay empty.
  AnswerDistribution normalize() const;

 private:
  std::map<AnswerKey, double> weights_;
  bool normalized_ = false;
};

/// Per-feature answer masses held as exact integer counts over a common
/// divisor (sample_count). Division happens only at read time, which keeps
/// merges associative and bit-exact.
class AttributionTable {
 public:
  using Counts = std::map<AnswerKey, std::uint64_t>;

  AttributionTable() = default;
  explicit AttributionTable(std::vector<FeatureId> universe);

  void add(FeatureId feature, const AnswerKey& answer, std::uint64_t count = 1);
  void add_samples(std::uint64_t n) { sample_count_ += n; }

  std::uint64_t count(FeatureId feature, std::string_view answer) const;
  std::uint64_t total_count(FeatureId feature, bool exclude_abstention = false) const;
  double mass(FeatureId feature, std::string_view answer) const;
  double total_mass(FeatureId feature, bool exclude_abstention = false) const;
  AnswerDistribution distribution(FeatureId feature) const;

  const std::vector<FeatureId>& universe() const noexcept { return universe_; }
  bool has_feature(FeatureId feature) const { return counts_.contains(feature); }
  const std::map<FeatureId, Counts>& counts() const noexcept { return counts_; }
  std::uint64_t sample_count() const noexcept { return sample_count_; }
  // Sum of counts across every feature and answer.
  std::uint64_t grand_total() const;

  friend bool operator==(const AttributionTable&, const AttributionTable&) = default;

 private:
  std::vector<FeatureId> universe_;  // sorted
  std::map<FeatureId, Counts> counts_;
  std::uint64_t sample_count_ = 0;
};

// Pointwise sum of counts and sample counts. Throws ContractViolation when the
// feature universes differ. A default-constructed table acts as identity.
AttributionTable merge_attributions(const AttributionTable& a, const AttributionTable& b);

/// Scalar per-feature attributions (log-prob game).
struct ScalarAttribution {
  std::map<FeatureId, double> values;
  std::map<FeatureId, double> std_errors;
  std::uint64_t sample_count = 0;
};

}  // namespace genattr
