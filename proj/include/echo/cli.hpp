#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace echo::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitItemErrors = 1;  // finished, but some queries failed (gateway or item errors)
inline constexpr int kExitConfig = 2;      // bad configuration, arguments or input files

// Runs one command line (args excludes the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace echo::cli
