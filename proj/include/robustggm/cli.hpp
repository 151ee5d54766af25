#pragma once

#include <json.hpp>

#include <ostream>
#include <string>
#include <vector>

namespace robustggm {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,       // numerical failure or replay mismatch
  kExitUsage = 2,
  kExitIo = 3,            // unreadable/unwritable files, malformed data
  kExitPartialFailure = 4 // more than 10% of study units failed
};

/// Runs one command from fully resolved options (every default
/// materialized), writes its outputs and `<out>.manifest.json`, and returns an
/// exit code. `threads` only affects speed.
int execute_command(const std::string& command, const nlohmann::json& options, int threads,
                    std::ostream& log);

/// Entry point behind tools/robustggm. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace robustggm
