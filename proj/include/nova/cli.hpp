#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nova {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // a verification or oracle check failed
inline constexpr int kExitConfig = 2;
inline constexpr int kExitConvergence = 3;

/// Runs the `nova` tool on argv-style arguments (args[0] is the program
/// name). Normal output goes to `out`, diagnostics to `err`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nova
