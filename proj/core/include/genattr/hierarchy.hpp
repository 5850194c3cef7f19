#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "genattr/engine.hpp"

namespace genattr {

enum class SelectionMass {
  total,                // all non-abstention answer mass of the node
  full_context_answer,  // only mass on the answer produced with every player visible
};

struct HierarchyConfig {
  // thresholds[l] selects the level-l nodes to refine into level l+1. The
  // number of refinement phases is thresholds.size(), capped by the hierarchy.
  std::vector<double> thresholds{0.1, 0.1};
  // Paths per refinement phase; defaults to SamplerConfig::num_paths.
  std::optional<std::uint64_t> refine_paths;
  bool exclude_abstention = true;
  SelectionMass selection = SelectionMass::total;
};

struct PhaseStats {
  std::uint64_t paths = 0;
  std::uint64_t evaluations = 0;  // includes the phase baseline
};

struct HierarchicalResult {
  // per_level[l]: counts for level-l nodes; for l >= 1 only children of
  // important_sets[l-1] appear.
  std::vector<AttributionTable> per_level;
  std::vector<std::set<NodeId>> important_sets;
  std::vector<double> thresholds;
  // context[l]: counts that phase l credited to atomic nodes above level l.
  std::vector<AttributionTable> context;
  std::vector<PhaseStats> phases;
};

// Nodes whose count / sample_count reaches tau.
std::set<NodeId> select_important(const AttributionTable& table, double tau,
                                  bool exclude_abstention = true);
// Same, using only the mass on `answer`.
std::set<NodeId> select_important_for_answer(const AttributionTable& table, double tau,
                                             const AnswerKey& answer);

struct PathTables {
  AttributionTable* level = nullptr;    // nodes at the refinement level
  AttributionTable* context = nullptr;  // atomic nodes above it
};

/// One mixed-granularity permutation path. Top-level players are visited in a
/// random order; a node listed in important[its level] (for levels below
/// `level`) is expanded through a fresh random order of its children,
/// any other node is unmasked atomically. Returns the number of evaluations.
std::uint64_t one_shapley_path(Evaluator& eval, const HierarchySpec& h,
                               const std::vector<std::set<NodeId>>& important, std::size_t level,
                               const AnswerKey& baseline, StreamRng& rng, PathTables tables);

// Two-level form: `important` are documents refined into their children.
std::uint64_t one_shapley_path(Evaluator& eval, const HierarchySpec& h,
                               const std::set<NodeId>& important, const AnswerKey& baseline,
                               StreamRng& rng, PathTables tables);

HierarchicalResult hierarchical_shapley(Evaluator& eval, const HierarchySpec& h,
                                        const SamplerConfig& cfg, const HierarchyConfig& hcfg);

// Evaluations phase `level` costs per path for the given important sets,
// without the baseline.
std::uint64_t refined_path_cost(const HierarchySpec& h,
                                const std::vector<std::set<NodeId>>& important, std::size_t level);

}  // namespace genattr
