#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vaporcell::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitComputation = 2;

/// Runs one subcommand. `args` excludes the program name. The summary is
/// printed to `out` and, with --summary, written to a file.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vaporcell::cli
