#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bpa::cli {

inline constexpr const char* kToolVersion = "0.3.0";

/// Exit codes: 0 success, 1 usage, 2 input, 3 numeric.
enum ExitCode : int { kOk = 0, kUsage = 1, kInput = 2, kNumeric = 3 };

/// Runs one command line (args[0] is the program name). Diagnostics go to
/// `err`, short progress and summaries to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bpa::cli
