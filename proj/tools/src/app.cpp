#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "genattr/cli/commands.hpp"

namespace genattr::cli {

namespace {

struct FlagValues {
  std::string config_path;
  std::map<std::string, std::optional<std::string>> values;  // config key -> flag value
  std::vector<std::string> sets;
  bool repass = false;
  bool reproducible = false;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Answer attribution for masked text generators", "genattr"};
  app.fallthrough();
  app.require_subcommand(1, 1);

  FlagValues flags;
  app.add_option("--config", flags.config_path, "flat key = value config file");
  // Flags that map one-to-one onto config keys.
  const std::vector<std::pair<std::string, std::string>> keyed = {
      {"--backend", "backend"},     {"--endpoint", "endpoint"}, {"--paths", "paths"},
      {"--seed", "seed"},           {"--threshold", "threshold"},
      {"--bernoulli-p", "bernoulli_p"}, {"--cache", "cache"},   {"--mode", "mode"},
      {"--k-max", "k_max"},         {"--workers", "workers"},   {"--out", "out"},
      {"--dataset", "dataset"},     {"--depth", "depth"},       {"--estimator", "estimator"},
  };
  for (const auto& [flag, key] : keyed) {
    app.add_option(flag, flags.values[key], "overrides config key " + key);
  }
  app.add_flag("--repass", flags.repass, "re-read the distilled documents before ranking answers");
  app.add_flag("--reproducible", flags.reproducible, "omit timings and timestamps from outputs");
  app.add_option("--set", flags.sets, "any config key as KEY=VALUE (repeatable)");

  const std::map<std::string, std::string> descriptions = {
      {"explain", "hierarchical attribution per record, JSON and HTML"},
      {"rerank", "rerank passages by attribution; recall curves and AUC"},
      {"distill", "top-K answer accuracy from attribution versus majority vote"},
      {"sweep", "accuracy as the gold passage moves through the context"},
      {"oracle-check", "sampled estimators against exact oracles on built-in games"},
      {"synthesize", "write the planted-relevance benchmark"},
  };
  for (const auto& name : command_names()) app.add_subcommand(name, descriptions.at(name));

  std::vector<std::string> argv_store = {"genattr"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    emit_error(err, "usage", e.what(), kExitConfig);
    return kExitConfig;
  }

  RunConfig config;
  try {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& [key, value] : flags.values) {
      if (value) overrides.emplace_back(key, *value);
    }
    if (flags.repass) overrides.emplace_back("repass", "on");
    if (flags.reproducible) overrides.emplace_back("reproducible", "on");
    for (const auto& kv : flags.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
      overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    const auto file = flags.config_path.empty() ? std::vector<std::pair<std::string, std::string>>{}
                                                : read_config_file(flags.config_path);
    config = make_config(file, overrides);
  } catch (const ConfigError& e) {
    emit_error(err, "config", e.what(), kExitConfig);
    return kExitConfig;
  }
  return run_command(app.get_subcommands().front()->get_name(), config, out, err);
}

}  // namespace genattr::cli
