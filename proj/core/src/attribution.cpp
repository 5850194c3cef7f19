#include "genattr/attribution.hpp"

#include <algorithm>
#include <cmath>

#include "genattr/errors.hpp"

namespace genattr {

AnswerDistribution::AnswerDistribution(std::map<AnswerKey, double> weights, bool normalized)
    : weights_(std::move(weights)), normalized_(normalized) {
  for (const auto& [k, w] : weights_) {
    if (!(w >= 0.0)) throw ContractViolation("answer weights must be non-negative");
  }
  if (normalized_ && !weights_.empty()) {
    double sum = 0.0;
    for (const auto& [k, w] : weights_) sum += w;
    if (std::abs(sum - 1.0) > 1e-9) throw ContractViolation("normalized weights must sum to 1");
  }
}

double AnswerDistribution::weight(std::string_view answer) const {
  auto it = weights_.find(AnswerKey::from_text(answer));
  return it == weights_.end() ? 0.0 : it->second;
}

double AnswerDistribution::total(bool exclude_abstention) const {
  double sum = 0.0;
  for (const auto& [k, w] : weights_) {
    if (exclude_abstention && k.is_abstention()) continue;
    sum += w;
  }
  return sum;
}

AnswerDistribution AnswerDistribution::normalize() const {
  const double sum = total();
  if (weights_.empty() || sum <= 0.0) return AnswerDistribution(weights_, false);
  std::map<AnswerKey, double> out;
  for (const auto& [k, w] : weights_) out.emplace(k, w / sum);
  AnswerDistribution d;
  d.weights_ = std::move(out);
  d.normalized_ = true;
  return d;
}

AttributionTable::AttributionTable(std::vector<FeatureId> universe) : universe_(std::move(universe)) {
  std::sort(universe_.begin(), universe_.end());
  if (std::adjacent_find(universe_.begin(), universe_.end()) != universe_.end()) {
    throw ContractViolation("duplicate feature id in attribution universe");
  }
  for (FeatureId f : universe_) counts_.emplace(f, Counts{});
}

void AttributionTable::add(FeatureId feature, const AnswerKey& answer, std::uint64_t count) {
  auto it = counts_.find(feature);
  if (it == counts_.end()) {
    throw ContractViolation("feature " + std::to_string(feature) + " not in table universe");
  }
  if (count == 0) return;
  it->second[answer] += count;
}

std::uint64_t AttributionTable::count(FeatureId feature, std::string_view answer) const {
  auto it = counts_.find(feature);
  if (it == counts_.end()) return 0;
  auto jt = it->second.find(AnswerKey::from_text(answer));
  return jt == it->second.end() ? 0 : jt->second;
}

std::uint64_t AttributionTable::total_count(FeatureId feature, bool exclude_abstention) const {
  auto it = counts_.find(feature);
  if (it == counts_.end()) return 0;
  std::uint64_t sum = 0;
  for (const auto& [k, c] : it->second) {
    if (exclude_abstention && k.is_abstention()) continue;
    sum += c;
  }
  return sum;
}

double AttributionTable::mass(FeatureId feature, std::string_view answer) const {
  if (sample_count_ == 0) return 0.0;
  return static_cast<double>(count(feature, answer)) / static_cast<double>(sample_count_);
}

double AttributionTable::total_mass(FeatureId feature, bool exclude_abstention) const {
  if (sample_count_ == 0) return 0.0;
  return static_cast<double>(total_count(feature, exclude_abstention)) /
         static_cast<double>(sample_count_);
}

AnswerDistribution AttributionTable::distribution(FeatureId feature) const {
  std::map<AnswerKey, double> w;
  auto it = counts_.find(feature);
  if (it != counts_.end() && sample_count_ > 0) {
    for (const auto& [k, c] : it->second) {
      if (c > 0) w.emplace(k, static_cast<double>(c) / static_cast<double>(sample_count_));
    }
  }
  return AnswerDistribution(std::move(w));
}

std::uint64_t AttributionTable::grand_total() const {
  std::uint64_t sum = 0;
  for (const auto& [f, counts] : counts_) {
    for (const auto& [k, c] : counts) sum += c;
  }
  return sum;
}

AttributionTable merge_attributions(const AttributionTable& a, const AttributionTable& b) {
  const bool a_blank = a.universe().empty() && a.sample_count() == 0;
  const bool b_blank = b.universe().empty() && b.sample_count() == 0;
  if (a_blank) return b;
  if (b_blank) return a;
  if (a.universe() != b.universe()) {
    throw ContractViolation("cannot merge attribution tables over different feature universes");
  }
  AttributionTable out = a;
  for (const auto& [f, counts] : b.counts()) {
    for (const auto& [k, c] : counts) out.add(f, k, c);
  }
  out.add_samples(b.sample_count());
  return out;
}

}  // namespace genattr
