#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace visreplay::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;

/// Runs one command line (program name first).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace visreplay::cli
