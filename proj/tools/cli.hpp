#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fbmtest::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

/// Runs the command line `args` (args[0] is the program name) and returns
/// the process exit code: 0 success, 2 usage or input error, 3 numerical
/// failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fbmtest::cli
