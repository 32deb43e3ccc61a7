#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace fluidq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

/// Runs the command line `args` (without the program name). Diagnostics go
/// to `out`, errors to `err`. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

/// Parses a comma-separated list of reals or `logrange(a,b,k)`: k points
/// spaced evenly in log scale from a to b inclusive. Throws ModelError.
std::vector<double> parse_points(std::string_view text);

/// 64-bit FNV-1a of the bytes, as 16 hex digits.
std::string fingerprint(std::string_view bytes);

}  // namespace fluidq::cli
