#include "genattr/cli/commands.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "genattr/cli/report.hpp"
#include "genattr/cli/toy_games.hpp"
#include "genattr/errors.hpp"
#include "genattr/remote.hpp"
#include "genattr/spectree.hpp"
#include "genattr/toy_models.hpp"

namespace genattr::cli {

using Json = nlohmann::ordered_json;

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"explain", "rerank",     "distill",
                                                 "sweep",   "oracle-check", "synthesize"};
  return names;
}

namespace {

constexpr std::uint64_t kDefaultPaths = 100;
constexpr std::uint64_t kOraclePaths = 20000;

Json stats_json(const CallStats& s) {
  return {{"encoder_calls", s.encoder_calls},
          {"decoder_calls", s.decoder_calls},
          {"verification_calls", s.verification_calls}};
}

Json spec_json(const SpecStats& s) {
  return {{"hits", s.hits},
          {"misses", s.misses},
          {"grafts", s.grafts},
          {"decoder_calls_saved", s.decoder_calls_saved},
          {"verification_passes", s.verification_passes},
          {"raw_steps", s.raw_steps}};
}

Json config_json(const RunConfig& cfg) {
  Json j = Json::object();
  for (const auto& [k, v] : cfg.to_map()) j[k] = v;
  return j;
}

std::vector<std::pair<std::string, std::string>> read_keyword_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read keywords file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw ConfigError("keywords line " + std::to_string(number) + ": expected keyword<TAB>answer");
    }
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

/// Records, vocabulary and backend shared by the dataset commands.
struct Workspace {
  std::shared_ptr<Vocabulary> vocab = std::make_shared<Vocabulary>();
  std::vector<EvalRecord> records;
  std::unique_ptr<Generator> backend;
};

Workspace open_workspace(const RunConfig& cfg, spdlog::logger& log) {
  Workspace ws;
  std::vector<std::pair<std::string, std::string>> keywords;
  if (cfg.dataset == "synthetic") {
    SyntheticBenchmark bench = make_planted_benchmark(cfg.synthetic());
    ws.records = std::move(bench.records);
    keywords = std::move(bench.keywords);
  } else {
    ws.records = load_dataset(cfg.dataset);
  }
  if (!cfg.keywords.empty()) {
    keywords = read_keyword_file(cfg.keywords);
  } else if (cfg.dataset != "synthetic") {
    // Without a keyword file the toy readers answer any gold answer they can see.
    std::set<std::string> seen;
    for (const auto& r : ws.records) {
      for (const auto& g : r.gold_answers) {
        if (seen.insert(g).second) keywords.emplace_back(g, g);
      }
    }
  }
  if (cfg.limit > 0 && ws.records.size() > cfg.limit) ws.records.resize(cfg.limit);
  log.info("loaded {} record(s) from {}", ws.records.size(), cfg.dataset);

  if (cfg.backend == BackendKind::remote) {
    RemoteConfig rc;
    rc.endpoint = cfg.endpoint;
    rc.retries = cfg.retries;
    rc.timeout = std::chrono::milliseconds(cfg.timeout_ms);
    ws.backend = std::make_unique<RemoteGenerator>(RemoteConfig::from_env(rc), ws.vocab);
    return ws;
  }
  ToyKeywordReader::Options opts;
  opts.separator = Vocabulary::kSep;
  opts.doc_cache = cfg.doc_cache;
  if (cfg.backend == BackendKind::toy_keyword_first) {
    opts.precedence = ToyKeywordReader::Precedence::keyword_first;
  }
  if (cfg.backend == BackendKind::toy_window) opts.window = cfg.window;
  ws.backend = std::make_unique<ToyKeywordReader>(make_keyword_table(*ws.vocab, keywords), opts);
  return ws;
}

/// Evaluator plumbing for one record: optional speculation cache and
/// encode-once session.
struct RecordEval {
  std::unique_ptr<SpecCache> cache;
  std::unique_ptr<Evaluator> eval;
};

RecordEval make_eval(const RunConfig& cfg, Generator& backend, const RecordContext& ctx,
                     bool documents_only) {
  RecordEval r;
  Evaluator::Options opts;
  opts.mode = cfg.mode;
  if (cfg.cache) {
    r.cache = std::make_unique<SpecCache>(backend);
    opts.cache = r.cache.get();
  }
  if (cfg.doc_cache && documents_only) opts.session = backend.precompute_encodings(ctx.x, ctx.h);
  r.eval = std::make_unique<Evaluator>(backend, ctx.x, std::move(opts));
  return r;
}

AttributionTable document_table(const RunConfig& cfg, Evaluator& eval, const RecordContext& ctx) {
  const FeatureList features = features_from_nodes(ctx.h, ctx.doc_nodes);
  const SamplerConfig s = cfg.sampler(kDefaultPaths);
  return cfg.estimator == EstimatorKind::shapley ? permutation_shapley(eval, features, s)
                                                 : banzhaf_estimate(eval, features, s);
}

std::string span_text(const Vocabulary& vocab, const TokenSeq& x, const HierarchyNode& n) {
  std::vector<TokenId> ids(x.tokens().begin() + static_cast<std::ptrdiff_t>(n.begin),
                           x.tokens().begin() + static_cast<std::ptrdiff_t>(n.end));
  return vocab.decode(ids);
}

Json table_nodes(const AttributionTable& table, const RecordContext& ctx, const Vocabulary& vocab) {
  Json nodes = Json::array();
  for (FeatureId id : table.universe()) {
    const HierarchyNode& n = ctx.h.node(id);
    Json masses = Json::object();
    if (const auto it = table.counts().find(id); it != table.counts().end()) {
      for (const auto& [answer, _] : it->second) masses[answer.str()] = table.mass(id, answer.str());
    }
    nodes.push_back({{"id", id},
                     {"kind", std::string(to_string(n.kind))},
                     {"span", {n.begin, n.end}},
                     {"text", span_text(vocab, ctx.x, n)},
                     {"masses", std::move(masses)},
                     {"total", table.sample_count() ? table.total_mass(id, true) : 0.0}});
  }
  return nodes;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << body;
}

std::string safe_file_stem(const std::string& id) {
  std::string out;
  for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out.empty() ? "record" : out;
}

Json header(std::string_view command, const RunConfig& cfg) {
  return {{"command", std::string(command)}, {"config", config_json(cfg)}};
}

// ---- commands -------------------------------------------------------------

Json cmd_explain(const RunConfig& cfg, spdlog::logger& log) {
  if (cfg.doc_cache) throw ConfigError("explain refines inside documents; doc_cache must be off");
  Workspace ws = open_workspace(cfg, log);
  if (!cfg.out.empty()) std::filesystem::create_directories(cfg.out);

  Json result = header("explain", cfg);
  Json records = Json::array();
  CallStats total_calls;
  SpecStats total_spec;
  for (const auto& record : ws.records) {
    const RecordContext ctx = build_context(record, *ws.vocab, cfg.depth);
    const CallStats before = ws.backend->stats();
    RecordEval re = make_eval(cfg, *ws.backend, ctx, false);
    const std::string answer = re.eval->answer(Mask(ctx.x.size(), true)).str();
    const HierarchicalResult hr =
        hierarchical_shapley(*re.eval, ctx.h, cfg.sampler(kDefaultPaths), cfg.hierarchy());
    const CallStats calls = ws.backend->stats() - before;

    Json levels = Json::array();
    for (std::size_t l = 0; l < hr.per_level.size(); ++l) {
      Json level = {{"level", l}};
      if (l < hr.important_sets.size()) {
        level["threshold"] = hr.thresholds[l];
        level["important"] = Json(std::vector<NodeId>(hr.important_sets[l].begin(),
                                                      hr.important_sets[l].end()));
      }
      level["paths"] = hr.phases[l].paths;
      level["evaluations"] = hr.phases[l].evaluations;
      level["nodes"] = table_nodes(hr.per_level[l], ctx, *ws.vocab);
      if (l > 0 && hr.context[l].sample_count() > 0) {
        level["context"] = table_nodes(hr.context[l], ctx, *ws.vocab);
      }
      levels.push_back(std::move(level));
    }

    Json rec = {{"query_id", record.query_id},
                {"question", record.question},
                {"gold_answers", record.gold_answers},
                {"answer", answer},
                {"correct", answer_match(answer, record.gold_answers)},
                {"levels", std::move(levels)},
                {"call_stats", stats_json(calls)}};
    if (re.cache) {
      rec["spec_stats"] = spec_json(re.cache->stats());
      total_spec += re.cache->stats();
    }
    total_calls.encoder_calls += calls.encoder_calls;
    total_calls.decoder_calls += calls.decoder_calls;
    total_calls.verification_calls += calls.verification_calls;

    if (!cfg.out.empty()) {
      const std::filesystem::path stem = std::filesystem::path(cfg.out) / safe_file_stem(record.query_id);
      write_file(stem.string() + ".json", rec.dump(2) + "\n");
      write_file(stem.string() + ".html", render_explain_html(rec, cfg.reproducible));
    }
    log.info("explained {}: answer '{}', {} decoder call(s)", record.query_id, answer,
             calls.decoder_calls);
    records.push_back(std::move(rec));
  }
  result["records"] = std::move(records);
  result["call_stats"] = stats_json(total_calls);
  if (cfg.cache) result["spec_stats"] = spec_json(total_spec);
  return result;
}

Json cmd_rerank(const RunConfig& cfg, spdlog::logger& log) {
  Workspace ws = open_workspace(cfg, log);
  const CallStats before = ws.backend->stats();
  std::vector<RankedList> retriever, reranked;
  Json per_record = Json::array();
  SpecStats spec;
  for (const auto& record : ws.records) {
    const RecordContext ctx = build_context(record, *ws.vocab, HierarchyDepth::documents);
    RecordEval re = make_eval(cfg, *ws.backend, ctx, true);
    const AttributionTable table = document_table(cfg, *re.eval, ctx);
    if (re.cache) spec += re.cache->stats();
    retriever.push_back(retriever_order(record));
    reranked.push_back(rerank_by_attribution(record, table, ctx.doc_nodes));
    per_record.push_back({{"query_id", record.query_id},
                          {"retriever", retriever.back().ids},
                          {"attribution", reranked.back().ids},
                          {"scores", reranked.back().scores}});
  }
  const auto base_curve = recall_at_k(ws.records, retriever, cfg.k_max);
  const auto attr_curve = recall_at_k(ws.records, reranked, cfg.k_max);
  Json result = header("rerank", cfg);
  result["records"] = ws.records.size();
  result["recall"] = {{"retriever", base_curve}, {"attribution", attr_curve}};
  result["auc"] = {{"retriever", auc(base_curve)}, {"attribution", auc(attr_curve)}};
  result["call_stats"] = stats_json(ws.backend->stats() - before);
  if (cfg.cache) result["spec_stats"] = spec_json(spec);
  result["per_record"] = std::move(per_record);
  log.info("rerank AUC: retriever {:.2f}, attribution {:.2f}", auc(base_curve), auc(attr_curve));
  return result;
}

Json cmd_distill(const RunConfig& cfg, spdlog::logger& log) {
  Workspace ws = open_workspace(cfg, log);
  const CallStats before = ws.backend->stats();
  std::vector<std::vector<std::string>> distilled, voted;
  Json per_record = Json::array();
  for (const auto& record : ws.records) {
    const RecordContext ctx = build_context(record, *ws.vocab, HierarchyDepth::documents);
    RecordEval re = make_eval(cfg, *ws.backend, ctx, true);
    const AttributionTable table = document_table(cfg, *re.eval, ctx);
    distilled.push_back(distill_with_repass(record, table, ctx.doc_nodes, cfg.k_max, cfg.repass,
                                            cfg.distill_threshold, *ws.backend, *ws.vocab));
    voted.push_back(majority_vote(record, *ws.backend, *ws.vocab, cfg.k_max));
    per_record.push_back({{"query_id", record.query_id},
                          {"gold_answers", record.gold_answers},
                          {"distill", distilled.back()},
                          {"majority_vote", voted.back()}});
  }
  Json d = Json::array(), m = Json::array();
  for (std::size_t k = 1; k <= cfg.k_max; ++k) {
    d.push_back(top_k_accuracy(ws.records, distilled, k));
    m.push_back(top_k_accuracy(ws.records, voted, k));
  }
  Json result = header("distill", cfg);
  result["records"] = ws.records.size();
  result["top_k"] = {{"distill", d}, {"majority_vote", m}};
  result["call_stats"] = stats_json(ws.backend->stats() - before);
  result["per_record"] = std::move(per_record);
  log.info("top-1 accuracy: distill {:.3f}, majority vote {:.3f}", d.front().get<double>(),
           m.front().get<double>());
  return result;
}

Json cmd_sweep(const RunConfig& cfg, spdlog::logger& log) {
  Workspace ws = open_workspace(cfg, log);
  std::vector<double> sums;
  std::vector<std::size_t> counts;
  std::size_t used = 0;
  for (const auto& record : ws.records) {
    const auto gold = std::find_if(record.passages.begin(), record.passages.end(),
                                   [&](const Passage& p) { return is_relevant(p, record.gold_answers); });
    if (gold == record.passages.end()) continue;
    const auto curve = position_sweep(record, *ws.backend, *ws.vocab, gold->id);
    if (curve.size() > sums.size()) {
      sums.resize(curve.size(), 0.0);
      counts.resize(curve.size(), 0);
    }
    for (std::size_t j = 0; j < curve.size(); ++j) {
      sums[j] += curve[j];
      ++counts[j];
    }
    ++used;
  }
  Json curve = Json::array();
  for (std::size_t j = 0; j < sums.size(); ++j) curve.push_back(sums[j] / static_cast<double>(counts[j]));
  Json result = header("sweep", cfg);
  result["records"] = used;
  result["skipped"] = ws.records.size() - used;
  result["accuracy_by_position"] = std::move(curve);
  result["records_by_position"] = counts;
  return result;
}

Json cmd_oracle_check(const RunConfig& cfg, spdlog::logger& log, bool& breach) {
  OracleSuiteOptions opts;
  opts.paths = cfg.paths.value_or(kOraclePaths);
  opts.seed = cfg.seed;
  opts.seeds = cfg.oracle_seeds;
  opts.tolerance = cfg.tolerance;
  opts.workers = cfg.workers;
  if (std::find(opts.bernoulli_ps.begin(), opts.bernoulli_ps.end(), cfg.bernoulli_p) ==
      opts.bernoulli_ps.end()) {
    opts.bernoulli_ps.push_back(cfg.bernoulli_p);
  }
  Json games = Json::array();
  breach = false;
  for (const auto& r : run_oracle_suite(opts)) {
    Json banzhaf = Json::array();
    for (const auto& [p, err] : r.banzhaf) banzhaf.push_back({{"p", p}, {"max_error", err}});
    games.push_back({{"game", r.name},
                     {"players", r.players},
                     {"shapley_max_error", r.shapley_error},
                     {"banzhaf", std::move(banzhaf)},
                     {"pass", r.pass}});
    breach = breach || !r.pass;
    log.info("{}: shapley error {:.4f} ({})", r.name, r.shapley_error, r.pass ? "pass" : "FAIL");
  }
  Json result = header("oracle-check", cfg);
  result["paths"] = opts.paths;
  result["seeds"] = opts.seeds;
  result["tolerance"] = opts.tolerance;
  result["games"] = std::move(games);
  result["pass"] = !breach;
  return result;
}

Json cmd_synthesize(const RunConfig& cfg, std::ostream& out, bool& printed) {
  if (cfg.dataset != "synthetic") throw ConfigError("synthesize builds the synthetic benchmark; unset dataset");
  const SyntheticBenchmark bench = make_planted_benchmark(cfg.synthetic());
  if (cfg.out.empty()) {
    write_dataset(out, bench.records);
    printed = true;
    return {};
  }
  std::filesystem::create_directories(cfg.out);
  const auto dir = std::filesystem::path(cfg.out);
  {
    std::ofstream f(dir / "dataset.jsonl", std::ios::binary);
    write_dataset(f, bench.records);
  }
  std::string tsv;
  for (const auto& [k, a] : bench.keywords) tsv += k + "\t" + a + "\n";
  write_file(dir / "keywords.tsv", tsv);
  Json result = header("synthesize", cfg);
  result["records"] = bench.records.size();
  result["files"] = {(dir / "dataset.jsonl").string(), (dir / "keywords.tsv").string()};
  return result;
}

std::string_view error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const SchemaError*>(&e)) return "schema";
  if (dynamic_cast<const TransportError*>(&e)) return "transport";
  if (dynamic_cast<const BackendError*>(&e)) return "backend";
  if (dynamic_cast<const PathFailure*>(&e)) return "path_failure";
  if (dynamic_cast<const CapabilityError*>(&e)) return "capability";
  if (dynamic_cast<const ContractViolation*>(&e)) return "contract";
  return "runtime";
}

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
  auto log = std::make_shared<spdlog::logger>("genattr", sink);
  log->set_pattern("[%l] %v");
  log->set_level(spdlog::level::info);
  return log;
}

}  // namespace

void emit_error(std::ostream& err, std::string_view kind, std::string_view message, int code) {
  const Json j = {{"error",
                   {{"kind", std::string(kind)}, {"message", std::string(message)}, {"exit_code", code}}}};
  err << j.dump() << "\n";
}

int run_command(std::string_view name, const RunConfig& config, std::ostream& out,
                std::ostream& err) {
  auto log = make_logger(err);
  const auto start = std::chrono::steady_clock::now();
  try {
    Json result;
    bool breach = false;
    bool printed = false;
    if (name == "explain") result = cmd_explain(config, *log);
    else if (name == "rerank") result = cmd_rerank(config, *log);
    else if (name == "distill") result = cmd_distill(config, *log);
    else if (name == "sweep") result = cmd_sweep(config, *log);
    else if (name == "oracle-check") result = cmd_oracle_check(config, *log, breach);
    else if (name == "synthesize") result = cmd_synthesize(config, out, printed);
    else throw ConfigError("unknown command '" + std::string(name) + "'");

    if (!printed) {
      if (!config.reproducible) {
        result["elapsed_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                   std::chrono::steady_clock::now() - start)
                                   .count();
      }
      const std::string body = result.dump(2) + "\n";
      out << body;
      if (!config.out.empty() && name != "explain" && name != "synthesize") {
        std::filesystem::create_directories(config.out);
        write_file(std::filesystem::path(config.out) / (std::string(name) + ".json"), body);
      }
    }
    out.flush();
    if (breach) {
      emit_error(err, "oracle_tolerance", "estimator error above tolerance", kExitOracleBreach);
      return kExitOracleBreach;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    const int code = dynamic_cast<const ConfigError*>(&e) ? kExitConfig : kExitRuntime;
    log->error("{}", e.what());
    emit_error(err, error_kind(e), e.what(), code);
    return code;
  }
}

}  // namespace genattr::cli
