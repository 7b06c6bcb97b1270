#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hlta::cli {

enum ExitCode { kOk = 0, kUsage = 2, kDataError = 3, kInvariant = 4 };

/// Runs the command line `args` (without the program name). Normal output
/// goes to `out`, diagnostics to `err`; progress logging goes to stderr.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hlta::cli
