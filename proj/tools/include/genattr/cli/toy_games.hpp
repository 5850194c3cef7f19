#pragma once

#include <memory>
#include <string>
#include <vector>

#include "genattr/engine.hpp"
#include "genattr/models.hpp"

namespace genattr::cli {

/// A small cooperative game with a known exact solution: a backend, the
/// input it reads and the players.
struct ToyGame {
  std::string name;
  std::shared_ptr<Vocabulary> vocab;
  std::unique_ptr<Generator> backend;
  TokenSeq x;
  FeatureList features;
};

// The built-in suite, every game with at most six players:
//   keyword_3doc        keyword reader over three documents
//   weighted_vote       weights (4,3,2,1,1), quota 6
//   keyword_first_6doc  keyword-first reader, several competing answers
//   multi_token_keyword token players, one keyword spanning two tokens
//   symmetric_and       four players, answer only when all are present
std::vector<ToyGame> builtin_toy_games();

// Largest |a - b| over every (feature, answer) cell present in either table.
double max_abs_difference(const AttributionTable& a, const AttributionTable& b);

/// Estimator-versus-oracle errors for one game.
struct OracleReport {
  std::string name;
  std::size_t players = 0;
  double shapley_error = 0.0;                        // worst over seeds
  std::vector<std::pair<double, double>> banzhaf;  // (p, worst error over seeds)
  bool pass = false;
};

struct OracleSuiteOptions {
  std::uint64_t paths = 20000;
  std::uint64_t seed = 0;  // seeds used: seed, seed + 1, ...
  std::size_t seeds = 5;
  std::vector<double> bernoulli_ps{0.5, 0.1};
  double tolerance = 0.02;
  std::size_t workers = 1;
};

std::vector<OracleReport> run_oracle_suite(const OracleSuiteOptions& options);

}  // namespace genattr::cli
