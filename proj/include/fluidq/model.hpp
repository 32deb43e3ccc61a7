#pragma once

#include <limits>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

namespace fluidq {

/// Unit roundoff used throughout the tolerances (the binary64 epsilon).
inline constexpr double kMachinePrecision =
    std::numeric_limits<double>::epsilon();

/// A Markov-modulated fluid queue: irreducible generator T and nonzero fluid
/// rates c, with the up phases (c_i > 0) listed first.
///
/// Only the off-diagonal part of T is ever taken as input. The diagonal is
/// derived as the negated off-diagonal row sum so that T·1 = 0 holds by
/// construction and no caller can feed in a diagonal that disagrees with it.
class FluidQueueModel {
 public:
  /// Validates and builds a model. `t_offdiag` is n×n; its diagonal is
  /// ignored. Throws ModelError on any violated invariant.
  static FluidQueueModel create(int n_plus, int n_minus,
                                const Eigen::MatrixXd& t_offdiag,
                                const Eigen::VectorXd& c);

  int n_plus() const { return n_plus_; }
  int n_minus() const { return n_minus_; }
  int n() const { return n_plus_ + n_minus_; }

  /// Off-diagonal part of T (zero diagonal).
  const Eigen::MatrixXd& t_offdiag() const { return t_offdiag_; }
  /// Derived diagonal of T, all entries ≤ 0.
  const Eigen::VectorXd& t_diag() const { return t_diag_; }
  /// |T_ii|, i.e. the off-diagonal row sums. Nonnegative, read without sign.
  const Eigen::VectorXd& exit_rates() const { return exit_rates_; }
  const Eigen::VectorXd& rates() const { return c_; }
  /// |c_i| for every phase.
  Eigen::VectorXd abs_rates() const { return c_.cwiseAbs(); }

  /// The full generator T (diagonal filled in from the derived values).
  Eigen::MatrixXd generator() const;

  // Off-diagonal blocks of T by phase class. The diagonals of the ++ and --
  // blocks are zero; use exit_rates() for the diagonal magnitudes.
  Eigen::MatrixXd offdiag_pp() const {
    return t_offdiag_.topLeftCorner(n_plus_, n_plus_);
  }
  Eigen::MatrixXd offdiag_pm() const {
    return t_offdiag_.topRightCorner(n_plus_, n_minus_);
  }
  Eigen::MatrixXd offdiag_mp() const {
    return t_offdiag_.bottomLeftCorner(n_minus_, n_plus_);
  }
  Eigen::MatrixXd offdiag_mm() const {
    return t_offdiag_.bottomRightCorner(n_minus_, n_minus_);
  }

  bool operator==(const FluidQueueModel& other) const;

 private:
  FluidQueueModel() = default;

  int n_plus_ = 0;
  int n_minus_ = 0;
  Eigen::MatrixXd t_offdiag_;
  Eigen::VectorXd t_diag_;
  Eigen::VectorXd exit_rates_;
  Eigen::VectorXd c_;
};

/// Stationary distribution ξ of the phase process and the mean drift ξC1.
struct PhaseDistribution {
  Eigen::VectorXd xi;
  double drift = 0.0;

  bool positive_recurrent() const { return drift < 0.0; }
};

enum class Scheme { kSda, kSdaSs, kAdda };

std::string_view to_string(Scheme scheme);
/// Accepts "sda", "sda-ss" and "adda". Throws ModelError otherwise.
Scheme parse_scheme(std::string_view name);

/// Doubling initialization parameters (units time/fluid).
struct DoublingParameters {
  double alpha = 0.0;
  double beta = 0.0;
  double alpha_opt = 0.0;
  double beta_opt = 0.0;
  double eta = 0.5;
  Scheme scheme = Scheme::kSda;
  /// alpha/beta come from subtraction_free_parameters(); the initial pencil
  /// then evaluates the diagonal of R without any subtraction.
  bool subtraction_free = false;
};

inline constexpr double kDefaultEta = 0.5;

/// Parses the model file format (see README). Throws ModelError.
FluidQueueModel parse_model(std::string_view text);

/// Serializes a model in the file format with 17 significant digits, so that
/// parse_model(format_model(m)) == m bit for bit. The derived diagonal is
/// written out for readability; the parser ignores it.
std::string format_model(const FluidQueueModel& model,
                         std::string_view comment = {});

/// ξ from the GTH kernel of −T, drift accumulated as (positive part) −
/// (negative part).
PhaseDistribution stationary_phase_distribution(const FluidQueueModel& model);

/// (alpha_opt, beta_opt): min over down (resp. up) phases of |c_i| / |T_ii|.
std::pair<double, double> optimal_parameters(const FluidQueueModel& model);

/// (alpha, beta) = ((Σ_{k∈S−} |T_kk|/|c_k|)^{-1}, (Σ_{k∈S+} |T_kk|/c_k)^{-1}).
std::pair<double, double> subtraction_free_parameters(
    const FluidQueueModel& model);

/// Default parameters for a scheme: ADDA (η·alpha_opt, η·beta_opt), SDA-ss
/// (0, η·beta_opt), SDA both η·min(alpha_opt, beta_opt).
DoublingParameters make_parameters(const FluidQueueModel& model,
                                   Scheme scheme = Scheme::kSda,
                                   double eta = kDefaultEta);

/// ADDA parameters chosen by the subtraction-free rule.
DoublingParameters make_subtraction_free_parameters(
    const FluidQueueModel& model);

/// Checks the parameter invariants; throws ModelError.
void validate_parameters(const DoublingParameters& params);

/// The weakly connected six-phase queue (two clusters joined by a 1e-8 rate).
FluidQueueModel weakly_connected_model();

/// The eight-phase cascading queue with fluid rate `kappa` in the first phase.
FluidQueueModel cascading_model(double kappa);

}  // namespace fluidq
