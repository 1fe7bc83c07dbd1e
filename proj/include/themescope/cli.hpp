#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace themescope::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (args excludes the program name). Domain errors
/// and missing stages return 1, usage errors 2.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace themescope::cli
