#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace intrinsic::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kData = 2,
  kConvergence = 3,
};

/// Parses `args` (program name first) and runs one subcommand. Results go to
/// `out`; the resolved configuration and diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace intrinsic::cli
