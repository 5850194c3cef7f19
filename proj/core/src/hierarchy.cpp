#include "genattr/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "genattr/errors.hpp"
#include "parallel.hpp"
#include "path_ledger.hpp"

namespace genattr {

namespace {

bool expands(const HierarchySpec& h, NodeId id, const std::vector<std::set<NodeId>>& important,
             std::size_t level) {
  const HierarchyNode& node = h.node(id);
  return node.level < level && !node.is_leaf() && node.level < important.size() &&
         important[node.level].contains(id);
}

// Visits the atomic units of a phase-`level` path in structural order.
void for_each_unit(const HierarchySpec& h, NodeId id,
                   const std::vector<std::set<NodeId>>& important, std::size_t level,
                   const std::function<void(NodeId)>& fn) {
  if (expands(h, id, important, level)) {
    for (NodeId child : h.node(id).children) for_each_unit(h, child, important, level, fn);
  } else {
    fn(id);
  }
}

void check_important(const HierarchySpec& h, const std::vector<std::set<NodeId>>& important) {
  for (std::size_t l = 0; l < important.size(); ++l) {
    for (NodeId id : important[l]) {
      if (!h.contains(id) || h.node(id).level != l || h.node(id).pinned) {
        throw ContractViolation("important node " + std::to_string(id) + " is not a level-" +
                                std::to_string(l) + " player");
      }
    }
  }
}

struct PhaseUniverse {
  std::vector<FeatureId> level;
  std::vector<FeatureId> context;
};

PhaseUniverse phase_universe(const HierarchySpec& h,
                             const std::vector<std::set<NodeId>>& important, std::size_t level) {
  PhaseUniverse u;
  for (NodeId top : h.players()) {
    for_each_unit(h, top, important, level, [&](NodeId id) {
      (h.node(id).level == level ? u.level : u.context).push_back(id);
    });
  }
  std::sort(u.level.begin(), u.level.end());
  std::sort(u.context.begin(), u.context.end());
  return u;
}

}  // namespace

std::set<NodeId> select_important(const AttributionTable& table, double tau,
                                  bool exclude_abstention) {
  if (table.sample_count() == 0) throw ContractViolation("select_important needs samples");
  if (std::isnan(tau)) throw ContractViolation("threshold is NaN");
  std::set<NodeId> out;
  const double T = static_cast<double>(table.sample_count());
  for (FeatureId f : table.universe()) {
    if (static_cast<double>(table.total_count(f, exclude_abstention)) / T >= tau) out.insert(f);
  }
  return out;
}

std::set<NodeId> select_important_for_answer(const AttributionTable& table, double tau,
                                             const AnswerKey& answer) {
  if (table.sample_count() == 0) throw ContractViolation("select_important needs samples");
  std::set<NodeId> out;
  const double T = static_cast<double>(table.sample_count());
  for (FeatureId f : table.universe()) {
    const std::uint64_t c = table.count(f, answer.str());
    if (static_cast<double>(c) / T >= tau) out.insert(f);
  }
  return out;
}

std::uint64_t one_shapley_path(Evaluator& eval, const HierarchySpec& h,
                               const std::vector<std::set<NodeId>>& important, std::size_t level,
                               const AnswerKey& baseline, StreamRng& rng, PathTables tables) {
  if (tables.level == nullptr) throw ContractViolation("one_shapley_path needs a level table");
  if (h.num_tokens() != eval.input().size()) {
    throw ContractViolation("hierarchy does not cover the input");
  }

  const std::vector<NodeId> players = h.players();
  check_important(h, important);
  Mask s(h.num_tokens(), false);
  s.set_all(h.pinned_positions());
  AnswerKey current = baseline;
  detail::PathLedger ledger(baseline);
  std::uint64_t evaluations = 0;

  std::function<void(NodeId)> visit = [&](NodeId id) {
    const HierarchyNode& node = h.node(id);
    if (expands(h, id, important, level)) {
      const Permutation inner = Permutation::random(node.children.size(), rng);
      for (std::size_t k : inner) visit(node.children[k]);
      return;
    }
    s.set_all(h.positions(id));
    AnswerKey next = eval.answer(s);
    ++evaluations;
    if (next == current) return;
    if (node.level == level) {
      tables.level->add(id, next);
    } else if (tables.context != nullptr) {
      tables.context->add(id, next);
    }
    ledger.transition(current, next);
    current = std::move(next);
  };

  const Permutation outer = Permutation::random(players.size(), rng);
  for (std::size_t k : outer) visit(players[k]);
  ledger.check(current);
  tables.level->add_samples(1);
  if (tables.context != nullptr) tables.context->add_samples(1);
  return evaluations;
}

std::uint64_t one_shapley_path(Evaluator& eval, const HierarchySpec& h,
                               const std::set<NodeId>& important, const AnswerKey& baseline,
                               StreamRng& rng, PathTables tables) {
  return one_shapley_path(eval, h, {important}, 1, baseline, rng, tables);
}

std::uint64_t refined_path_cost(const HierarchySpec& h,
                                const std::vector<std::set<NodeId>>& important, std::size_t level) {
  std::uint64_t cost = 0;
  for (NodeId top : h.players()) for_each_unit(h, top, important, level, [&](NodeId) { ++cost; });
  return cost;
}

HierarchicalResult hierarchical_shapley(Evaluator& eval, const HierarchySpec& h,
                                        const SamplerConfig& cfg, const HierarchyConfig& hcfg) {
  cfg.validate();
  for (double tau : hcfg.thresholds) {
    if (std::isnan(tau) || tau < 0.0) throw ContractViolation("thresholds must be non-negative");
  }
  if (hcfg.refine_paths && *hcfg.refine_paths == 0) {
    throw ContractViolation("refine_paths must be at least 1");
  }
  if (h.num_tokens() != eval.input().size()) {
    throw ContractViolation("hierarchy does not cover the input");
  }

  HierarchicalResult result;
  const bool evaluate_empty = cfg.baseline_mode == BaselineMode::evaluate_empty;

  // Phase 0: flat over the top-level players.
  const std::vector<NodeId> players = h.players();
  const std::uint64_t before = eval.evaluations();
  result.per_level.push_back(permutation_shapley(eval, features_from_nodes(h, players), cfg));
  result.context.emplace_back();
  result.phases.push_back({cfg.num_paths, eval.evaluations() - before});

  std::optional<AnswerKey> full_answer;
  const std::size_t max_phases = h.depth() > 0 ? h.depth() - 1 : 0;
  const std::size_t phases = std::min(hcfg.thresholds.size(), max_phases);
  const std::uint64_t paths = hcfg.refine_paths.value_or(cfg.num_paths);
  const std::size_t workers = eval.backend().descriptor().reentrant ? cfg.workers : 1;

  for (std::size_t level = 1; level <= phases; ++level) {
    const double tau = hcfg.thresholds[level - 1];
    const AttributionTable& coarse = result.per_level.back();
    std::set<NodeId> chosen;
    if (hcfg.selection == SelectionMass::full_context_answer) {
      if (!full_answer) full_answer = eval.answer(Mask(eval.input().size(), true));
      chosen = select_important_for_answer(coarse, tau, *full_answer);
    } else {
      chosen = select_important(coarse, tau, hcfg.exclude_abstention);
    }
    result.important_sets.push_back(chosen);
    result.thresholds.push_back(tau);
    if (chosen.empty()) {
      result.per_level.emplace_back();
      result.context.emplace_back();
      result.phases.push_back({0, 0});
      break;
    }

    const PhaseUniverse universe = phase_universe(h, result.important_sets, level);
    const std::size_t slots = std::min<std::uint64_t>(workers, paths);
    std::vector<AttributionTable> level_tables(slots, AttributionTable(universe.level));
    std::vector<AttributionTable> context_tables(slots, AttributionTable(universe.context));
    std::vector<std::uint64_t> path_evals(slots, 0);

    const std::uint64_t phase_start = eval.evaluations();
    AnswerKey baseline = AnswerKey::blank();
    if (evaluate_empty) {
      Mask empty(eval.input().size(), false);
      empty.set_all(h.pinned_positions());
      baseline = eval.answer(empty);
    }

    detail::run_paths(paths, workers, [&](std::uint64_t t, std::size_t w) {
      StreamRng rng(cfg.seed, StreamDomain::refine, t, level);
      path_evals[w] += one_shapley_path(eval, h, result.important_sets, level, baseline, rng,
                                        {&level_tables[w], &context_tables[w]});
    });

    const std::uint64_t spent = eval.evaluations() - phase_start;
    const std::uint64_t per_path = refined_path_cost(h, result.important_sets, level);
    std::uint64_t walked = 0;
    for (std::uint64_t e : path_evals) walked += e;
    if (walked != per_path * paths || spent != walked + (evaluate_empty ? 1 : 0)) {
      throw std::logic_error("refined phase spent " + std::to_string(spent) +
                             " evaluations, expected " +
                             std::to_string(per_path * paths + (evaluate_empty ? 1 : 0)));
    }

    result.per_level.push_back(detail::merge_all(level_tables));
    result.context.push_back(detail::merge_all(context_tables));
    result.phases.push_back({paths, spent});
  }
  return result;
}

}  // namespace genattr
