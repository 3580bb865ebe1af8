#pragma once

#include <iosfwd>

namespace cmest::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kStatisticalFailure = 1;
inline constexpr int kUsageError = 2;

/// Runs the command line `argv` (argv[0] is the program name), writing normal
/// output to `out` and diagnostics to `err`. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cmest::cli
