#include "fluidq/model.hpp"

#include <charconv>
#include <cmath>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "fluidq/csv.hpp"
#include "fluidq/error.hpp"
#include "fluidq/gth.hpp"

namespace fluidq {

namespace {

// Every phase reachable from phase 0 along nonzero off-diagonal entries of
// `adjacency` (or of its transpose).
bool all_reachable(const Eigen::MatrixXd& adjacency, bool transpose) {
  const int n = static_cast<int>(adjacency.rows());
  std::vector<bool> seen(n, false);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = true;
  int count = 1;
  while (!frontier.empty()) {
    const int i = frontier.front();
    frontier.pop();
    for (int j = 0; j < n; ++j) {
      const double a = transpose ? adjacency(j, i) : adjacency(i, j);
      if (i != j && a > 0.0 && !seen[j]) {
        seen[j] = true;
        ++count;
        frontier.push(j);
      }
    }
  }
  return count == n;
}

std::string phase_name(int i) { return "phase " + std::to_string(i + 1); }

std::vector<std::string_view> split_tokens(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
    }
    std::size_t j = i;
    while (j < line.size() &&
           !std::isspace(static_cast<unsigned char>(line[j]))) {
      ++j;
    }
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

double parse_real(std::string_view token, int line_no) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto res =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size() ||
      !std::isfinite(value)) {
    throw ModelError("model file line " + std::to_string(line_no) +
                     ": malformed real '" + std::string(token) + "'");
  }
  return value;
}

int parse_count(const std::vector<std::string_view>& tokens,
                std::string_view key, int line_no) {
  if (tokens.size() != 2 || tokens[0] != key) {
    throw ModelError("model file line " + std::to_string(line_no) +
                     ": expected '" + std::string(key) + " <int>'");
  }
  int value = 0;
  const auto tok = tokens[1];
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw ModelError("model file line " + std::to_string(line_no) +
                     ": malformed integer '" + std::string(tok) + "'");
  }
  if (value <= 0) {
    throw ModelError(std::string(key) + " must be positive");
  }
  return value;
}

}  // namespace

FluidQueueModel FluidQueueModel::create(int n_plus, int n_minus,
                                        const Eigen::MatrixXd& t_offdiag,
                                        const Eigen::VectorXd& c) {
  if (n_plus <= 0 || n_minus <= 0) {
    throw ModelError("nplus and nminus must be positive");
  }
  const int n = n_plus + n_minus;
  if (t_offdiag.rows() != n || t_offdiag.cols() != n || c.size() != n) {
    throw ModelError("generator and rate vector must have size nplus+nminus");
  }
  FluidQueueModel m;
  m.n_plus_ = n_plus;
  m.n_minus_ = n_minus;
  m.t_offdiag_ = Eigen::MatrixXd::Zero(n, n);
  m.exit_rates_ = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    double exit = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double t = t_offdiag(i, j);
      if (!std::isfinite(t)) {
        throw ModelError("generator entry (" + std::to_string(i + 1) + "," +
                         std::to_string(j + 1) + ") is not finite");
      }
      if (t < 0.0) {
        throw ModelError("negative off-diagonal entry (" +
                         std::to_string(i + 1) + "," + std::to_string(j + 1) +
                         ") in the generator");
      }
      m.t_offdiag_(i, j) = t;
      exit += t;
    }
    m.exit_rates_(i) = exit;
  }
  m.t_diag_ = -m.exit_rates_;

  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(c(i))) {
      throw ModelError(phase_name(i) + " has a non-finite rate");
    }
    if (c(i) == 0.0) {
      throw ModelError(phase_name(i) + " has zero rate");
    }
    if ((i < n_plus) != (c(i) > 0.0)) {
      throw ModelError(phase_name(i) +
                       ": sign of the rate is inconsistent with nplus");
    }
  }
  m.c_ = c;

  if (!all_reachable(m.t_offdiag_, false) || !all_reachable(m.t_offdiag_, true)) {
    throw ModelError("generator is reducible (phase graph is not strongly "
                     "connected)");
  }
  return m;
}

Eigen::MatrixXd FluidQueueModel::generator() const {
  Eigen::MatrixXd t = t_offdiag_;
  t.diagonal() = t_diag_;
  return t;
}

bool FluidQueueModel::operator==(const FluidQueueModel& other) const {
  return n_plus_ == other.n_plus_ && n_minus_ == other.n_minus_ &&
         t_offdiag_ == other.t_offdiag_ && c_ == other.c_;
}

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::kSda:
      return "sda";
    case Scheme::kSdaSs:
      return "sda-ss";
    case Scheme::kAdda:
      return "adda";
  }
  return "?";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "sda") return Scheme::kSda;
  if (name == "sda-ss") return Scheme::kSdaSs;
  if (name == "adda") return Scheme::kAdda;
  throw ModelError("unknown scheme '" + std::string(name) + "'");
}

FluidQueueModel parse_model(std::string_view text) {
  std::vector<std::pair<int, std::vector<std::string_view>>> lines;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    auto tokens = split_tokens(line);
    if (!tokens.empty()) lines.emplace_back(line_no, std::move(tokens));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  if (lines.size() < 3) {
    throw ModelError("model file: expected nplus, nminus and c lines");
  }
  const int n_plus = parse_count(lines[0].second, "nplus", lines[0].first);
  const int n_minus = parse_count(lines[1].second, "nminus", lines[1].first);
  const int n = n_plus + n_minus;

  const auto& c_tokens = lines[2].second;
  if (c_tokens.empty() || c_tokens[0] != "c" ||
      static_cast<int>(c_tokens.size()) != n + 1) {
    throw ModelError("model file line " + std::to_string(lines[2].first) +
                     ": expected 'c' followed by " + std::to_string(n) +
                     " rates");
  }
  Eigen::VectorXd c(n);
  for (int i = 0; i < n; ++i) c(i) = parse_real(c_tokens[i + 1], lines[2].first);

  if (static_cast<int>(lines.size()) != 3 + n) {
    throw ModelError("model file: expected " + std::to_string(n) +
                     " generator rows, found " +
                     std::to_string(static_cast<int>(lines.size()) - 3));
  }
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const auto& [no, row] = lines[3 + i];
    if (static_cast<int>(row.size()) != n) {
      throw ModelError("model file line " + std::to_string(no) +
                       ": expected " + std::to_string(n) + " entries");
    }
    for (int j = 0; j < n; ++j) {
      const double value = parse_real(row[j], no);
      if (i != j) t(i, j) = value;
    }
  }
  return FluidQueueModel::create(n_plus, n_minus, t, c);
}

std::string format_model(const FluidQueueModel& model, std::string_view comment) {
  std::ostringstream out;
  if (!comment.empty()) {
    std::istringstream lines{std::string(comment)};
    std::string line;
    while (std::getline(lines, line)) out << "# " << line << '\n';
  }
  out << "nplus " << model.n_plus() << '\n';
  out << "nminus " << model.n_minus() << '\n';
  out << 'c';
  for (Eigen::Index i = 0; i < model.rates().size(); ++i) {
    out << ' ' << format_real(model.rates()(i));
  }
  out << '\n';
  const Eigen::MatrixXd t = model.generator();
  for (int i = 0; i < model.n(); ++i) {
    for (int j = 0; j < model.n(); ++j) {
      if (j > 0) out << ' ';
      out << format_real(t(i, j));
    }
    out << '\n';
  }
  return out.str();
}

PhaseDistribution stationary_phase_distribution(const FluidQueueModel& model) {
  const int n = model.n();
  const auto rep = TripletRepresentation::from_offdiag(
      -model.t_offdiag(), Eigen::VectorXd::Ones(n), Eigen::VectorXd::Zero(n));
  PhaseDistribution d;
  try {
    d.xi = gth_left_kernel(rep).transpose();
  } catch (const GthError& e) {
    throw NumericError(std::string("stationary phase distribution: ") +
                       e.what());
  }
  double up = 0.0;
  double down = 0.0;
  for (int i = 0; i < n; ++i) {
    if (i < model.n_plus()) {
      up += d.xi(i) * model.rates()(i);
    } else {
      down += d.xi(i) * -model.rates()(i);
    }
  }
  d.drift = up - down;
  return d;
}

std::pair<double, double> optimal_parameters(const FluidQueueModel& model) {
  double alpha = INFINITY;
  double beta = INFINITY;
  for (int i = 0; i < model.n(); ++i) {
    const double ratio = std::abs(model.rates()(i)) / model.exit_rates()(i);
    if (i < model.n_plus()) {
      beta = std::min(beta, ratio);
    } else {
      alpha = std::min(alpha, ratio);
    }
  }
  return {alpha, beta};
}

std::pair<double, double> subtraction_free_parameters(
    const FluidQueueModel& model) {
  double inv_alpha = 0.0;
  double inv_beta = 0.0;
  const auto& t = model.t_offdiag();
  for (int k = 0; k < model.n(); ++k) {
    const double ck = std::abs(model.rates()(k));
    for (int j = 0; j < model.n(); ++j) {
      if (j == k) continue;
      (k < model.n_plus() ? inv_beta : inv_alpha) += t(k, j) / ck;
    }
  }
  return {1.0 / inv_alpha, 1.0 / inv_beta};
}

DoublingParameters make_parameters(const FluidQueueModel& model, Scheme scheme,
                                   double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) {
    throw ModelError("eta must lie in (0, 1]");
  }
  DoublingParameters p;
  std::tie(p.alpha_opt, p.beta_opt) = optimal_parameters(model);
  p.eta = eta;
  p.scheme = scheme;
  switch (scheme) {
    case Scheme::kSda:
      p.alpha = p.beta = eta * std::min(p.alpha_opt, p.beta_opt);
      break;
    case Scheme::kSdaSs:
      p.alpha = 0.0;
      p.beta = eta * p.beta_opt;
      break;
    case Scheme::kAdda:
      p.alpha = eta * p.alpha_opt;
      p.beta = eta * p.beta_opt;
      break;
  }
  validate_parameters(p);
  return p;
}

DoublingParameters make_subtraction_free_parameters(
    const FluidQueueModel& model) {
  DoublingParameters p;
  std::tie(p.alpha_opt, p.beta_opt) = optimal_parameters(model);
  std::tie(p.alpha, p.beta) = subtraction_free_parameters(model);
  p.eta = 1.0;
  p.scheme = Scheme::kAdda;
  p.subtraction_free = true;
  validate_parameters(p);
  return p;
}

void validate_parameters(const DoublingParameters& p) {
  auto finite_nonneg = [](double x) { return std::isfinite(x) && x >= 0.0; };
  if (!finite_nonneg(p.alpha) || !finite_nonneg(p.beta)) {
    throw ModelError("alpha and beta must be finite and nonnegative");
  }
  if (p.alpha == 0.0 && p.beta == 0.0) {
    throw ModelError("alpha and beta must not both be zero");
  }
  // The subtraction-free choice equals the optimum when a phase class has a
  // single member; allow the last-bit disagreement between the two formulas.
  const double slack = p.subtraction_free ? 1.0 + 4.0 * kMachinePrecision : 1.0;
  if (p.alpha > p.alpha_opt * slack) {
    throw ModelError("alpha exceeds alpha_opt (R would have a negative "
                     "diagonal entry)");
  }
  if (p.beta > p.beta_opt * slack) {
    throw ModelError("beta exceeds beta_opt (R would have a negative "
                     "diagonal entry)");
  }
  if (p.scheme == Scheme::kSdaSs && p.alpha != 0.0) {
    throw ModelError("SDA-ss requires alpha = 0");
  }
  if (p.scheme == Scheme::kSda && p.alpha != p.beta) {
    throw ModelError("SDA requires alpha = beta");
  }
}

FluidQueueModel weakly_connected_model() {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(6, 6);
  t(0, 5) = 4.0;
  t(1, 2) = t(1, 3) = t(1, 4) = 5.0;
  t(1, 5) = 1e-8;
  t(2, 1) = t(2, 3) = t(2, 4) = 5.0;
  t(3, 1) = t(3, 2) = t(3, 4) = 5.0;
  t(4, 1) = t(4, 2) = t(4, 3) = 5.0;
  t(5, 0) = 4.0;
  t(5, 1) = 1.0;
  Eigen::VectorXd c(6);
  c << 1.0, 1.0, 1.0, -1.001, -1.001, -1.001;
  return FluidQueueModel::create(3, 3, t, c);
}

FluidQueueModel cascading_model(double kappa) {
  if (!(std::isfinite(kappa) && kappa > 0.0)) {
    throw ModelError("kappa must be a positive finite rate");
  }
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(8, 8);
  for (int i = 0; i < 7; ++i) t(i, 7) = 1.0;
  // The cascade 8 → 4 → 7 → 3 → 6 → 2 → 5 → 1 of 0.01 rates.
  t(7, 3) = 0.01;
  t(3, 6) = 0.01;
  t(6, 2) = 0.01;
  t(2, 5) = 0.01;
  t(5, 1) = 0.01;
  t(1, 4) = 0.01;
  t(4, 0) = 0.01;
  Eigen::VectorXd c(8);
  c << kappa, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0;
  return FluidQueueModel::create(4, 4, t, c);
}

}  // namespace fluidq
