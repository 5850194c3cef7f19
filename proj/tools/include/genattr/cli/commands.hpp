#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "genattr/cli/config.hpp"

namespace genattr::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitRuntime = 1,
  kExitConfig = 2,
  kExitOracleBreach = 3,
};

// explain, rerank, distill, sweep, oracle-check, synthesize.
const std::vector<std::string>& command_names();

// Runs one command with an already validated config. Result JSON goes to
// `out`, logs and error JSON to `err`. Returns the process exit code.
int run_command(std::string_view name, const RunConfig& config, std::ostream& out,
                std::ostream& err);

// One-line machine-readable error object.
void emit_error(std::ostream& err, std::string_view kind, std::string_view message, int code);

// Full command line (argv[0] excluded): flag parsing, config loading, dispatch.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace genattr::cli
