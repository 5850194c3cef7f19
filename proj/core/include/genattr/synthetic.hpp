#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "genattr/harness.hpp"

namespace genattr {

struct SyntheticOptions {
  std::size_t records = 200;
  std::size_t passages = 10;
  std::size_t max_decoys = 3;  // passages carrying the shared wrong answer
  std::size_t filler_words = 12;
  std::uint64_t seed = 7;
};

/// Planted-relevance benchmark: each record has one relevant passage (holding
/// the gold keyword, planted at a uniform rank), up to max_decoys decoys that
/// all point at one wrong answer, and keyword-free distractors.
struct SyntheticBenchmark {
  std::vector<EvalRecord> records;
  // keyword text -> answer; gold keywords come before decoy keywords.
  std::vector<std::pair<std::string, std::string>> keywords;
};

SyntheticBenchmark make_planted_benchmark(const SyntheticOptions& options = {});

}  // namespace genattr
