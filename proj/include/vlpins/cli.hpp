#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vlpins {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInternal = 3;

/// Runs `vlpins <command> ...`; args excludes the program name.
/// Commands: simulate, estimate, evaluate.
int runCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vlpins
