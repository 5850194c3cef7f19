#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "genattr/attribution.hpp"
#include "genattr/evaluator.hpp"
#include "genattr/hierarchy_spec.hpp"

namespace genattr {

using Rational = boost::multiprecision::cpp_rational;

enum class BaselineMode {
  evaluate_empty,  // text_curr starts at f(x, empty coalition)
  literal_blank,   // text_curr starts at "" as in the reference pseudo-code
};

std::string_view to_string(BaselineMode mode);
BaselineMode parse_baseline_mode(std::string_view text);

struct SamplerConfig {
  std::uint64_t num_paths = 100;
  std::uint64_t seed = 0;
  double bernoulli_p = 0.5;
  BaselineMode baseline_mode = BaselineMode::evaluate_empty;
  std::size_t workers = 1;

  void validate() const;
};

/// A player: a set of token positions toggled together.
struct Feature {
  FeatureId id = 0;
  std::vector<std::size_t> positions;
};

using FeatureList = std::vector<Feature>;

FeatureList features_from_nodes(const HierarchySpec& h, std::span<const NodeId> nodes);
// One feature per position, id = position.
FeatureList token_features(std::size_t num_tokens);
std::vector<FeatureId> feature_ids(const FeatureList& features);

// Positions no feature covers; they stay visible in every coalition.
Mask fixed_visible(std::size_t num_tokens, const FeatureList& features);

// (d-1) / (C(d,k) k (d-k)), defined for 1 <= k <= d-1.
Rational shapley_weight(std::size_t d, std::size_t k);

/// Shapley subset distribution P_Sh over coalition sizes 1..d-1.
class ShapleyWeightTable {
 public:
  explicit ShapleyWeightTable(std::size_t d);

  std::size_t d() const noexcept { return d_; }
  // Normalized probability of one particular subset of size k.
  const Rational& subset_probability(std::size_t k) const;
  // Probability that a draw has size k (subset probability times C(d, k)).
  Rational size_probability(std::size_t k) const;
  // Draws a size in [1, d-1].
  std::size_t sample_size(StreamRng& rng) const;

 private:
  std::size_t d_;
  std::vector<Rational> subset_prob_;  // index k
  std::vector<double> size_cdf_;
};

// Permutation sampling with the answer-change counting rule: when adding a
// feature changes the generated answer, that feature gets one count on the new
// answer. Consumes T*n + 1 evaluations (T*n under literal_blank).
AttributionTable permutation_shapley(Evaluator& eval, const FeatureList& features,
                                     const SamplerConfig& cfg);

// Bernoulli(p) base coalition per round, paired flips per feature, positive
// part of the one-hot difference. n + 1 evaluations per round.
AttributionTable banzhaf_estimate(Evaluator& eval, const FeatureList& features,
                                  const SamplerConfig& cfg);

// Classic permutation Shapley on v(S) = log p(target | S).
ScalarAttribution permutation_shapley_logprob(Generator& backend, const TokenSeq& x,
                                              const FeatureList& features,
                                              std::string_view target_answer,
                                              const SamplerConfig& cfg,
                                              MaskMode mode = MaskMode::pad);

inline constexpr std::size_t kMaxOracleFeatures = 8;

// Exact expectation of the counting rule over all n! orderings.
AttributionTable exact_shapley_oracle(Evaluator& eval, const FeatureList& features,
                                      BaselineMode baseline = BaselineMode::evaluate_empty);

// Exact Bernoulli(p) expectation of the paired-flip positive part.
AttributionTable exact_banzhaf_oracle(Evaluator& eval, const FeatureList& features, double p);

// Closest fraction num/den to p with den^n representable in 63 bits.
std::pair<std::uint64_t, std::uint64_t> exact_probability(double p, std::size_t n);

}  // namespace genattr
