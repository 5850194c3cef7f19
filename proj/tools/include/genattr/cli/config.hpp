#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "genattr/engine.hpp"
#include "genattr/harness.hpp"
#include "genattr/hierarchy.hpp"
#include "genattr/synthetic.hpp"

namespace genattr::cli {

// Unknown key, malformed value or inconsistent settings. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BackendKind { toy, toy_keyword_first, toy_window, remote };
enum class EstimatorKind { shapley, banzhaf };

std::string_view to_string(BackendKind kind);
std::string_view to_string(EstimatorKind kind);
std::string_view to_string(HierarchyDepth depth);

/// Every knob a command reads. Filled from a flat `key = value` file, then
/// from command-line overrides, then validated before any model call.
struct RunConfig {
  // Backend.
  BackendKind backend = BackendKind::toy;
  std::string endpoint;   // remote only; falls back to GENATTR_ENDPOINT
  std::size_t window = 1;  // toy-window: documents read
  std::size_t retries = 2;
  std::uint64_t timeout_ms = 30000;

  // Data. "synthetic" selects the built-in planted benchmark.
  std::string dataset = "synthetic";
  std::string keywords;  // optional TSV of keyword<TAB>answer for the toy readers
  std::size_t records = 200;
  std::size_t passages = 10;
  std::size_t max_decoys = 3;
  std::size_t filler_words = 12;
  std::size_t limit = 0;  // 0 keeps every record

  // Sampling. Unset paths means the command default.
  std::optional<std::uint64_t> paths;
  std::uint64_t seed = 0;
  double bernoulli_p = 0.5;
  BaselineMode baseline = BaselineMode::evaluate_empty;
  std::vector<double> thresholds{0.1, 0.1};
  std::optional<std::uint64_t> refine_paths;
  SelectionMass selection = SelectionMass::total;
  HierarchyDepth depth = HierarchyDepth::sentences;
  EstimatorKind estimator = EstimatorKind::shapley;
  std::size_t workers = 1;

  // Evaluation.
  bool cache = false;
  bool doc_cache = false;
  MaskMode mode = MaskMode::pad;
  std::size_t k_max = 10;
  bool repass = false;
  double distill_threshold = 0.1;

  // Oracle check.
  double tolerance = 0.02;
  std::size_t oracle_seeds = 5;

  // Output.
  bool reproducible = false;
  std::string out;

  // Throws ConfigError on the first unknown key or malformed value.
  void set(std::string_view key, std::string_view value);
  // Cross-field checks; throws ConfigError.
  void validate() const;

  SamplerConfig sampler(std::uint64_t default_paths) const;
  HierarchyConfig hierarchy() const;
  SyntheticOptions synthetic() const;

  // Canonical key/value listing, echoed into result JSON.
  std::map<std::string, std::string> to_map() const;
};

// Every key `set` accepts.
const std::vector<std::string>& config_keys();

// `key = value` lines; '#' starts a comment; blank lines are skipped.
// Returns pairs in file order. Throws ConfigError naming the line.
std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text);
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

// File entries first, overrides afterwards so flags win; then validates.
RunConfig make_config(const std::vector<std::pair<std::string, std::string>>& file_entries,
                      const std::vector<std::pair<std::string, std::string>>& overrides);

}  // namespace genattr::cli
