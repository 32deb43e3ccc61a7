#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace fluidq {

/// Scientific notation with 17 significant digits and a bare exponent,
/// e.g. "1.0000000000000000e0", "2.5000000000000000e-1". Round-trips binary64.
std::string format_real(double x);

/// One matrix row per line, comma separated, format_real() entries.
void write_csv(std::ostream& out, const Eigen::MatrixXd& m);

/// Parses a comma separated table of reals. Blank lines and lines whose first
/// field is not numeric (headers) are skipped.
std::vector<std::vector<double>> read_csv(std::string_view text);

}  // namespace fluidq
