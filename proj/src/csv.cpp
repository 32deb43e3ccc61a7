#include "fluidq/csv.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>

namespace fluidq {

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res =
      std::to_chars(buf, buf + sizeof buf, x, std::chars_format::scientific, 16);
  std::string s(buf, res.ptr);
  const auto e = s.find('e');
  std::string mantissa = s.substr(0, e);
  std::string_view exponent(s.c_str() + e + 1);
  bool negative = false;
  if (!exponent.empty() && (exponent[0] == '+' || exponent[0] == '-')) {
    negative = exponent[0] == '-';
    exponent.remove_prefix(1);
  }
  while (exponent.size() > 1 && exponent[0] == '0') exponent.remove_prefix(1);
  return mantissa + "e" + (negative ? "-" : "") + std::string(exponent);
}

void write_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_real(m(i, j));
    }
    out << '\n';
  }
}

namespace {

bool parse_field(std::string_view field, double& value) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) {
    field.remove_prefix(1);
  }
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' ||
                            field.back() == '\r')) {
    field.remove_suffix(1);
  }
  if (field == "inf") {
    value = INFINITY;
    return true;
  }
  if (field == "-inf") {
    value = -INFINITY;
    return true;
  }
  if (field == "nan") {
    value = NAN;
    return true;
  }
  const auto res =
      std::from_chars(field.data(), field.data() + field.size(), value);
  return res.ec == std::errc() && res.ptr == field.data() + field.size();
}

}  // namespace

std::vector<std::vector<double>> read_csv(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::string_view rest(line);
    bool ok = true;
    while (true) {
      const auto comma = rest.find(',');
      double value = 0.0;
      if (!parse_field(rest.substr(0, comma), value)) {
        ok = false;
        break;
      }
      row.push_back(value);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (ok && !row.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace fluidq
