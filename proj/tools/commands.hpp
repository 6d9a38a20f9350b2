#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace gsvi::cli {

/// Exit codes: 0 success, 1 runtime or solver failure, 2 bad input (parse,
/// usage, invalid model, empty training set).
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitBadInput = 2;

/// Runs the command line in-process. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gsvi::cli
