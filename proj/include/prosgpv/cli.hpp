#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace prosgpv {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

/// Runs the command line `args` (program name first) and returns the exit
/// code: 0 success, 2 usage, configuration or input error, 3 numerical
/// failure. Output files are written only after all computation succeeds.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Default location of the vertebral column data file.
std::string default_spine_path();

}  // namespace prosgpv
