#pragma once

#include <iosfwd>

namespace coep {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitCheckpoint = 3,
  kExitContract = 4,
  kExitInternal = 5,
};

/// Parses and runs one command. Errors are reported on `err` as
/// "error[code=N]: message", or as a JSON object with --json.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace coep
