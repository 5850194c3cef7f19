#include "genattr/engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include "genattr/errors.hpp"
#include "parallel.hpp"
#include "path_ledger.hpp"

namespace genattr {

namespace {

using boost::multiprecision::cpp_int;

cpp_int binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  cpp_int r = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

std::uint64_t factorial_u64(std::size_t n) {
  std::uint64_t r = 1;
  for (std::size_t i = 2; i <= n; ++i) r *= i;
  return r;
}

std::size_t effective_workers(Evaluator& eval, const SamplerConfig& cfg) {
  return eval.backend().descriptor().reentrant ? cfg.workers : 1;
}

Mask coalition_mask(const Mask& base, const FeatureList& features, std::uint64_t members) {
  Mask m = base;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if ((members >> i) & 1U) m.set_all(features[i].positions);
  }
  return m;
}

void check_features(const Evaluator& eval, const FeatureList& features) {
  const std::size_t d = eval.input().size();
  std::vector<bool> owned(d, false);
  for (const auto& f : features) {
    for (std::size_t p : f.positions) {
      if (p >= d) throw ContractViolation("feature position out of range");
      if (owned[p]) throw ContractViolation("features overlap at position " + std::to_string(p));
      owned[p] = true;
    }
  }
}

void check_oracle_size(const FeatureList& features) {
  if (features.size() > kMaxOracleFeatures) {
    throw ContractViolation("exact oracle supports at most " + std::to_string(kMaxOracleFeatures) +
                            " features");
  }
}

}  // namespace

std::string_view to_string(BaselineMode mode) {
  return mode == BaselineMode::evaluate_empty ? "evaluate_empty" : "literal_blank";
}

BaselineMode parse_baseline_mode(std::string_view text) {
  if (text == "evaluate_empty") return BaselineMode::evaluate_empty;
  if (text == "literal_blank") return BaselineMode::literal_blank;
  throw ContractViolation("unknown baseline mode: " + std::string(text));
}

void SamplerConfig::validate() const {
  if (num_paths == 0) throw ContractViolation("num_paths must be at least 1");
  if (!(bernoulli_p > 0.0 && bernoulli_p < 1.0)) {
    throw ContractViolation("bernoulli_p must lie in (0, 1)");
  }
  if (workers == 0) throw ContractViolation("workers must be at least 1");
}

FeatureList features_from_nodes(const HierarchySpec& h, std::span<const NodeId> nodes) {
  FeatureList out;
  out.reserve(nodes.size());
  for (NodeId id : nodes) out.push_back({id, h.positions(id)});
  return out;
}

FeatureList token_features(std::size_t num_tokens) {
  FeatureList out(num_tokens);
  for (std::size_t i = 0; i < num_tokens; ++i) {
    out[i].id = static_cast<FeatureId>(i);
    out[i].positions = {i};
  }
  return out;
}

std::vector<FeatureId> feature_ids(const FeatureList& features) {
  std::vector<FeatureId> ids;
  ids.reserve(features.size());
  for (const auto& f : features) ids.push_back(f.id);
  return ids;
}

Mask fixed_visible(std::size_t num_tokens, const FeatureList& features) {
  Mask m(num_tokens, true);
  for (const auto& f : features) m.set_all(f.positions, false);
  return m;
}

Rational shapley_weight(std::size_t d, std::size_t k) {
  if (d < 2 || k < 1 || k >= d) throw ContractViolation("shapley_weight needs 1 <= k <= d-1");
  const cpp_int den = binomial(d, k) * k * (d - k);
  return Rational(cpp_int(d - 1), den);
}

ShapleyWeightTable::ShapleyWeightTable(std::size_t d) : d_(d) {
  if (d < 2) throw ContractViolation("ShapleyWeightTable needs d >= 2");
  subset_prob_.assign(d, Rational(0));
  Rational z = 0;
  for (std::size_t k = 1; k < d; ++k) {
    subset_prob_[k] = shapley_weight(d, k);
    z += subset_prob_[k] * Rational(binomial(d, k));
  }
  for (std::size_t k = 1; k < d; ++k) subset_prob_[k] /= z;

  size_cdf_.assign(d, 0.0);
  double acc = 0.0;
  for (std::size_t k = 1; k < d; ++k) {
    acc += static_cast<double>(size_probability(k));
    size_cdf_[k] = acc;
  }
  size_cdf_[d - 1] = 1.0;
}

const Rational& ShapleyWeightTable::subset_probability(std::size_t k) const {
  if (k < 1 || k >= d_) throw ContractViolation("subset size out of range");
  return subset_prob_[k];
}

Rational ShapleyWeightTable::size_probability(std::size_t k) const {
  return subset_probability(k) * Rational(binomial(d_, k));
}

std::size_t ShapleyWeightTable::sample_size(StreamRng& rng) const {
  const double u = rng.uniform();
  for (std::size_t k = 1; k < d_; ++k) {
    if (u < size_cdf_[k]) return k;
  }
  return d_ - 1;
}

AttributionTable permutation_shapley(Evaluator& eval, const FeatureList& features,
                                     const SamplerConfig& cfg) {
  cfg.validate();
  check_features(eval, features);
  const std::size_t n = features.size();
  const Mask base = fixed_visible(eval.input().size(), features);
  const AnswerKey baseline = cfg.baseline_mode == BaselineMode::evaluate_empty
                                 ? eval.answer(base)
                                 : AnswerKey::blank();

  const std::size_t workers = effective_workers(eval, cfg);
  std::vector<AttributionTable> tables(std::min<std::uint64_t>(workers, cfg.num_paths),
                                       AttributionTable(feature_ids(features)));

  detail::run_paths(cfg.num_paths, workers, [&](std::uint64_t t, std::size_t w) {
    StreamRng rng(cfg.seed, StreamDomain::permutation, t);
    const Permutation order = Permutation::random(n, rng);
    AttributionTable& table = tables[w];
    detail::PathLedger ledger(baseline);
    Mask s = base;
    AnswerKey current = baseline;
    for (std::size_t idx : order) {
      s.set_all(features[idx].positions);
      AnswerKey next = eval.answer(s);
      if (next != current) {
        table.add(features[idx].id, next);
        ledger.transition(current, next);
        current = std::move(next);
      }
    }
    ledger.check(current);
    table.add_samples(1);
  });
  return detail::merge_all(tables);
}

AttributionTable banzhaf_estimate(Evaluator& eval, const FeatureList& features,
                                  const SamplerConfig& cfg) {
  cfg.validate();
  check_features(eval, features);
  const std::size_t n = features.size();
  const Mask fixed = fixed_visible(eval.input().size(), features);

  const std::size_t workers = effective_workers(eval, cfg);
  std::vector<AttributionTable> tables(std::min<std::uint64_t>(workers, cfg.num_paths),
                                       AttributionTable(feature_ids(features)));

  detail::run_paths(cfg.num_paths, workers, [&](std::uint64_t r, std::size_t w) {
    StreamRng rng(cfg.seed, StreamDomain::banzhaf, r);
    std::vector<bool> in_base(n);
    for (std::size_t i = 0; i < n; ++i) in_base[i] = rng.bernoulli(cfg.bernoulli_p);

    auto build = [&](std::size_t flip, bool flip_value) {
      Mask m = fixed;
      for (std::size_t i = 0; i < n; ++i) {
        const bool member = i == flip ? flip_value : in_base[i];
        if (member) m.set_all(features[i].positions);
      }
      return m;
    };

    const AnswerKey at_base = eval.answer(build(n, false));
    AttributionTable& table = tables[w];
    for (std::size_t i = 0; i < n; ++i) {
      const AnswerKey with = in_base[i] ? at_base : eval.answer(build(i, true));
      const AnswerKey without = in_base[i] ? eval.answer(build(i, false)) : at_base;
      if (with != without) table.add(features[i].id, with);
    }
    table.add_samples(1);
  });
  return detail::merge_all(tables);
}

ScalarAttribution permutation_shapley_logprob(Generator& backend, const TokenSeq& x,
                                              const FeatureList& features,
                                              std::string_view target_answer,
                                              const SamplerConfig& cfg, MaskMode mode) {
  cfg.validate();
  if (!backend.descriptor().supports_logprobs) {
    throw CapabilityError("backend " + backend.descriptor().name + " does not expose log-probs");
  }
  for (const auto& f : features) {
    for (std::size_t p : f.positions) {
      if (p >= x.size()) throw ContractViolation("feature position out of range");
    }
  }
  const std::vector<TokenId> target = backend.tokenize_answer(target_answer);
  const std::size_t n = features.size();
  const Mask base = fixed_visible(x.size(), features);
  const double v_base = target_logprob(backend, x, base, mode, target);

  // contributions[t * n + i]; summed in path order for reproducible floats.
  std::vector<double> contributions(cfg.num_paths * n, 0.0);
  const std::size_t workers = backend.descriptor().reentrant ? cfg.workers : 1;
  detail::run_paths(cfg.num_paths, workers, [&](std::uint64_t t, std::size_t) {
    StreamRng rng(cfg.seed, StreamDomain::logprob, t);
    const Permutation order = Permutation::random(n, rng);
    Mask s = base;
    double prev = v_base;
    for (std::size_t idx : order) {
      s.set_all(features[idx].positions);
      const double v = target_logprob(backend, x, s, mode, target);
      contributions[t * n + idx] = v - prev;
      prev = v;
    }
  });

  ScalarAttribution out;
  out.sample_count = cfg.num_paths;
  const double T = static_cast<double>(cfg.num_paths);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::uint64_t t = 0; t < cfg.num_paths; ++t) sum += contributions[t * n + i];
    const double mean = sum / T;
    double sq = 0.0;
    for (std::uint64_t t = 0; t < cfg.num_paths; ++t) {
      const double dlt = contributions[t * n + i] - mean;
      sq += dlt * dlt;
    }
    const double se = cfg.num_paths > 1 ? std::sqrt(sq / (T - 1.0) / T) : 0.0;
    out.values[features[i].id] = mean;
    out.std_errors[features[i].id] = se;
  }
  return out;
}

AttributionTable exact_shapley_oracle(Evaluator& eval, const FeatureList& features,
                                      BaselineMode baseline) {
  check_oracle_size(features);
  check_features(eval, features);
  const std::size_t n = features.size();
  const Mask base = fixed_visible(eval.input().size(), features);
  const std::uint64_t subsets = std::uint64_t{1} << n;

  std::vector<AnswerKey> answers(subsets);
  for (std::uint64_t s = 0; s < subsets; ++s) {
    if (s == 0 && baseline == BaselineMode::literal_blank) {
      answers[s] = AnswerKey::blank();
    } else {
      answers[s] = eval.answer(coalition_mask(base, features, s));
    }
  }

  std::vector<std::uint64_t> fact(n + 1);
  for (std::size_t k = 0; k <= n; ++k) fact[k] = factorial_u64(k);

  AttributionTable table(feature_ids(features));
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t bit = std::uint64_t{1} << i;
    for (std::uint64_t s = 0; s < subsets; ++s) {
      if (s & bit) continue;
      const AnswerKey& with = answers[s | bit];
      if (with == answers[s]) continue;
      const auto k = static_cast<std::size_t>(std::popcount(s));
      table.add(features[i].id, with, fact[k] * fact[n - 1 - k]);
    }
  }
  table.add_samples(fact[n]);
  return table;
}

std::pair<std::uint64_t, std::uint64_t> exact_probability(double p, std::size_t n) {
  if (!(p > 0.0 && p < 1.0)) throw ContractViolation("probability must lie in (0, 1)");
  const std::size_t exponent = std::max<std::size_t>(n, 1);
  const auto max_den =
      static_cast<std::uint64_t>(std::floor(std::pow(2.0, 63.0 / static_cast<double>(exponent))));

  // Continued-fraction convergents h/k of p.
  std::uint64_t h_prev = 0, h = 1, k_prev = 1, k = 0;
  double rest = p;
  std::pair<std::uint64_t, std::uint64_t> best{0, 1};
  for (int iter = 0; iter < 64; ++iter) {
    const double a_f = std::floor(rest);
    if (a_f > 1e18) break;
    const auto a = static_cast<std::uint64_t>(a_f);
    const std::uint64_t h_next = a * h + h_prev;
    const std::uint64_t k_next = a * k + k_prev;
    if (k_next > max_den) break;
    h_prev = h;
    h = h_next;
    k_prev = k;
    k = k_next;
    best = {h, k};
    if (std::abs(static_cast<double>(h) / static_cast<double>(k) - p) <= 1e-12) return best;
    const double frac = rest - a_f;
    if (frac <= 0.0) break;
    rest = 1.0 / frac;
  }
  if (best.first > 0 &&
      std::abs(static_cast<double>(best.first) / static_cast<double>(best.second) - p) <= 1e-12) {
    return best;
  }
  throw ContractViolation("probability " + std::to_string(p) +
                          " has no exact small fraction for the oracle");
}

AttributionTable exact_banzhaf_oracle(Evaluator& eval, const FeatureList& features, double p) {
  check_oracle_size(features);
  check_features(eval, features);
  const std::size_t n = features.size();
  const auto [num, den] = exact_probability(p, n);
  const Mask base = fixed_visible(eval.input().size(), features);
  const std::uint64_t subsets = std::uint64_t{1} << n;

  std::vector<AnswerKey> answers(subsets);
  for (std::uint64_t s = 0; s < subsets; ++s) {
    answers[s] = eval.answer(coalition_mask(base, features, s));
  }

  auto ipow = [](std::uint64_t b, std::size_t e) {
    std::uint64_t r = 1;
    for (std::size_t i = 0; i < e; ++i) r *= b;
    return r;
  };
  std::vector<std::uint64_t> weight(n + 1);
  for (std::size_t k = 0; k <= n; ++k) weight[k] = ipow(num, k) * ipow(den - num, n - k);

  AttributionTable table(feature_ids(features));
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t bit = std::uint64_t{1} << i;
    for (std::uint64_t b = 0; b < subsets; ++b) {
      const AnswerKey& with = answers[b | bit];
      if (with == answers[b & ~bit]) continue;
      table.add(features[i].id, with, weight[static_cast<std::size_t>(std::popcount(b))]);
    }
  }
  table.add_samples(ipow(den, n));
  return table;
}

}  // namespace genattr
