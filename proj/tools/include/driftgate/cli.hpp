#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace driftgate {

enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitInput = 2,
  kExitDegenerate = 3,
};

/// Runs the command line `args` (without the program name). Normal output
/// goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace driftgate
