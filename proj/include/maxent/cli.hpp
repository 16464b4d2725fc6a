#pragma once

#include <ostream>

namespace maxent {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 1,
  kExitNotConverged = 2,
  kExitInfiniteEntropy = 3,
};

/// Entry point of the `maxent` tool. Regular output goes to `out`,
/// diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace maxent
