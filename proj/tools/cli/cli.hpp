#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace earlyrisk::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2 };

/// Runs one command line. `args` excludes the program name. Data goes to
/// `out`, diagnostics to `err`; `in` feeds the preprocess subcommand.
int dispatch(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
             std::ostream& err);

}  // namespace earlyrisk::cli
