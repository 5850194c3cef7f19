#include "genattr/cli/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "genattr/remote.hpp"

namespace genattr::cli {

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::toy: return "toy";
    case BackendKind::toy_keyword_first: return "toy-keyword-first";
    case BackendKind::toy_window: return "toy-window";
    case BackendKind::remote: return "remote";
  }
  return "?";
}

std::string_view to_string(EstimatorKind kind) {
  return kind == EstimatorKind::shapley ? "shapley" : "banzhaf";
}

std::string_view to_string(HierarchyDepth depth) {
  switch (depth) {
    case HierarchyDepth::documents: return "documents";
    case HierarchyDepth::words: return "words";
    case HierarchyDepth::sentences: return "sentences";
  }
  return "?";
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) +
                    ": expected " + std::string(want));
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
    bad_value(key, v, "a non-negative integer");
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(out)) {
    bad_value(key, v, "a finite number");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "on or off");
}

std::vector<double> parse_list(std::string_view key, std::string_view v) {
  std::vector<double> out;
  std::string item;
  std::stringstream ss{std::string(v)};
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  return out;
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    std::ostringstream os;
    os << xs[i];
    out += os.str();
  }
  return out;
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;

template <class T>
Setter size_field(T RunConfig::*field) {
  return [field](RunConfig& c, std::string_view k, std::string_view v) {
    c.*field = static_cast<T>(parse_u64(k, v));
  };
}

Setter double_field(double RunConfig::*field) {
  return [field](RunConfig& c, std::string_view k, std::string_view v) {
    c.*field = parse_double(k, v);
  };
}

Setter bool_field(bool RunConfig::*field) {
  return [field](RunConfig& c, std::string_view k, std::string_view v) {
    c.*field = parse_bool(k, v);
  };
}

Setter string_field(std::string RunConfig::*field) {
  return [field](RunConfig& c, std::string_view, std::string_view v) { c.*field = v; };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"backend",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         if (v == "toy") c.backend = BackendKind::toy;
         else if (v == "toy-keyword-first") c.backend = BackendKind::toy_keyword_first;
         else if (v == "toy-window") c.backend = BackendKind::toy_window;
         else if (v == "remote") c.backend = BackendKind::remote;
         else bad_value(k, v, "toy, toy-keyword-first, toy-window or remote");
       }},
      {"endpoint", string_field(&RunConfig::endpoint)},
      {"window", size_field(&RunConfig::window)},
      {"retries", size_field(&RunConfig::retries)},
      {"timeout_ms", size_field(&RunConfig::timeout_ms)},
      {"dataset", string_field(&RunConfig::dataset)},
      {"keywords", string_field(&RunConfig::keywords)},
      {"records", size_field(&RunConfig::records)},
      {"passages", size_field(&RunConfig::passages)},
      {"max_decoys", size_field(&RunConfig::max_decoys)},
      {"filler_words", size_field(&RunConfig::filler_words)},
      {"limit", size_field(&RunConfig::limit)},
      {"paths", [](RunConfig& c, std::string_view k, std::string_view v) { c.paths = parse_u64(k, v); }},
      {"seed", size_field(&RunConfig::seed)},
      {"bernoulli_p", double_field(&RunConfig::bernoulli_p)},
      {"baseline",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         try {
           c.baseline = parse_baseline_mode(v);
         } catch (const std::exception&) {
           bad_value(k, v, "evaluate_empty or literal_blank");
         }
       }},
      {"threshold",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.thresholds = parse_list(k, v); }},
      {"refine_paths",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.refine_paths = parse_u64(k, v); }},
      {"selection",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         if (v == "total") c.selection = SelectionMass::total;
         else if (v == "full_context_answer") c.selection = SelectionMass::full_context_answer;
         else bad_value(k, v, "total or full_context_answer");
       }},
      {"depth",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         if (v == "documents") c.depth = HierarchyDepth::documents;
         else if (v == "words") c.depth = HierarchyDepth::words;
         else if (v == "sentences") c.depth = HierarchyDepth::sentences;
         else bad_value(k, v, "documents, words or sentences");
       }},
      {"estimator",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         if (v == "shapley") c.estimator = EstimatorKind::shapley;
         else if (v == "banzhaf") c.estimator = EstimatorKind::banzhaf;
         else bad_value(k, v, "shapley or banzhaf");
       }},
      {"workers", size_field(&RunConfig::workers)},
      {"cache", bool_field(&RunConfig::cache)},
      {"doc_cache", bool_field(&RunConfig::doc_cache)},
      {"mode",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         if (v == "pad") c.mode = MaskMode::pad;
         else if (v == "drop") c.mode = MaskMode::drop;
         else bad_value(k, v, "pad or drop");
       }},
      {"k_max", size_field(&RunConfig::k_max)},
      {"repass", bool_field(&RunConfig::repass)},
      {"distill_threshold", double_field(&RunConfig::distill_threshold)},
      {"tolerance", double_field(&RunConfig::tolerance)},
      {"oracle_seeds", size_field(&RunConfig::oracle_seeds)},
      {"reproducible", bool_field(&RunConfig::reproducible)},
      {"out", string_field(&RunConfig::out)},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [k, _] : setters()) out.push_back(k);
    return out;
  }();
  return keys;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  it->second(*this, key, trim(value));
}

void RunConfig::validate() const {
  if (backend == BackendKind::remote && endpoint.empty() && !std::getenv(kEndpointEnv)) {
    throw ConfigError(std::string("remote backend needs endpoint or ") + kEndpointEnv);
  }
  if (window == 0) throw ConfigError("window must be at least 1");
  if (timeout_ms == 0) throw ConfigError("timeout_ms must be positive");
  if (paths && *paths == 0) throw ConfigError("paths must be at least 1");
  if (refine_paths && *refine_paths == 0) throw ConfigError("refine_paths must be at least 1");
  if (!(bernoulli_p > 0.0 && bernoulli_p < 1.0)) {
    throw ConfigError("bernoulli_p must lie strictly between 0 and 1");
  }
  if (thresholds.empty()) throw ConfigError("threshold needs at least one value");
  for (double t : thresholds) {
    if (t < 0.0) throw ConfigError("threshold values must be non-negative");
  }
  if (distill_threshold < 0.0) throw ConfigError("distill_threshold must be non-negative");
  if (workers == 0) throw ConfigError("workers must be at least 1");
  if (k_max == 0) throw ConfigError("k_max must be at least 1");
  if (tolerance <= 0.0) throw ConfigError("tolerance must be positive");
  if (oracle_seeds == 0) throw ConfigError("oracle_seeds must be at least 1");
  if (doc_cache && mode != MaskMode::drop) throw ConfigError("doc_cache requires mode = drop");
  if (dataset == "synthetic") {
    if (records == 0) throw ConfigError("records must be at least 1");
    if (passages < 2) throw ConfigError("passages must be at least 2");
    if (max_decoys + 1 > passages) throw ConfigError("max_decoys must leave room for the relevant passage");
  } else if (!std::filesystem::is_regular_file(dataset)) {
    throw ConfigError("dataset file not found: " + dataset);
  }
  if (!keywords.empty() && !std::filesystem::is_regular_file(keywords)) {
    throw ConfigError("keywords file not found: " + keywords);
  }
}

SamplerConfig RunConfig::sampler(std::uint64_t default_paths) const {
  SamplerConfig s;
  s.num_paths = paths.value_or(default_paths);
  s.seed = seed;
  s.bernoulli_p = bernoulli_p;
  s.baseline_mode = baseline;
  s.workers = workers;
  return s;
}

HierarchyConfig RunConfig::hierarchy() const {
  HierarchyConfig h;
  h.thresholds = thresholds;
  h.refine_paths = refine_paths;
  h.selection = selection;
  return h;
}

SyntheticOptions RunConfig::synthetic() const {
  SyntheticOptions o;
  o.records = records;
  o.passages = passages;
  o.max_decoys = max_decoys;
  o.filler_words = filler_words;
  o.seed = seed;
  return o;
}

std::map<std::string, std::string> RunConfig::to_map() const {
  auto num = [](auto v) { return std::to_string(v); };
  auto dbl = [](double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  };
  auto onoff = [](bool b) { return std::string(b ? "on" : "off"); };
  return {
      {"backend", std::string(to_string(backend))},
      {"endpoint", endpoint},
      {"window", num(window)},
      {"retries", num(retries)},
      {"timeout_ms", num(timeout_ms)},
      {"dataset", dataset},
      {"keywords", keywords},
      {"records", num(records)},
      {"passages", num(passages)},
      {"max_decoys", num(max_decoys)},
      {"filler_words", num(filler_words)},
      {"limit", num(limit)},
      {"paths", paths ? num(*paths) : std::string("default")},
      {"seed", num(seed)},
      {"bernoulli_p", dbl(bernoulli_p)},
      {"baseline", std::string(genattr::to_string(baseline))},
      {"threshold", join(thresholds)},
      {"refine_paths", refine_paths ? num(*refine_paths) : std::string("default")},
      {"selection", selection == SelectionMass::total ? "total" : "full_context_answer"},
      {"depth", std::string(to_string(depth))},
      {"estimator", std::string(to_string(estimator))},
      {"workers", num(workers)},
      {"cache", onoff(cache)},
      {"doc_cache", onoff(doc_cache)},
      {"mode", std::string(genattr::to_string(mode))},
      {"k_max", num(k_max)},
      {"repass", onoff(repass)},
      {"distill_threshold", dbl(distill_threshold)},
      {"tolerance", dbl(tolerance)},
      {"oracle_seeds", num(oracle_seeds)},
      {"reproducible", onoff(reproducible)},
      {"out", out},
  };
}

std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(number) + ": empty key");
    out.emplace_back(std::move(key), trim(std::string_view(body).substr(eq + 1)));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

RunConfig make_config(const std::vector<std::pair<std::string, std::string>>& file_entries,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  for (const auto& [k, v] : file_entries) cfg.set(k, v);
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  cfg.validate();
  return cfg;
}

}  // namespace genattr::cli
