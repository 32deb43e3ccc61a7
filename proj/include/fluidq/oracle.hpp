#pragma once

#include <mutex>
#include <vector>

#include <boost/multiprecision/eigen.hpp>
#include <boost/multiprecision/mpfr.hpp>
#include <Eigen/Dense>

#include "fluidq/gth.hpp"
#include "fluidq/model.hpp"

namespace fluidq {

/// Software floating point with a runtime mantissa length (MPFR).
using ExtReal = boost::multiprecision::mpfr_float;
using ExtMatrix = Eigen::Matrix<ExtReal, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr int kMinOracleDigits = 50;

/// Holds the working precision for extended arithmetic. MPFR's default
/// precision is process-wide, so scopes are serialized by a recursive
/// mutex; nested scopes on the same thread are allowed.
class PrecisionScope {
 public:
  explicit PrecisionScope(int digits);
  ~PrecisionScope();
  PrecisionScope(const PrecisionScope&) = delete;
  PrecisionScope& operator=(const PrecisionScope&) = delete;

 private:
  std::unique_lock<std::recursive_mutex> lock_;
  unsigned previous_;
};

struct ExtendedRiccati {
  ExtMatrix psi;
  ExtMatrix psi_hat;
  ExtMatrix f_infinity;
  int digits = 0;
  int iterations = 0;

  Eigen::MatrixXd psi_rounded() const;
};

/// Doubling (SDA, η = 1/2) with pivoted LU at `digits` decimal digits,
/// iterated until every increment ratio is ≤ 10^-(digits−10). Throws
/// NumericError if that does not happen within 200 steps.
ExtendedRiccati solve_riccati_extended(const FluidQueueModel& model,
                                       int digits = kMinOracleDigits);

/// max_ij of the Riccati residual relative to the sum of absolute terms,
/// evaluated at the solution's precision.
double riccati_residual_extended(const FluidQueueModel& model,
                                 const ExtendedRiccati& solution);

/// ξ with ξT = 0, ξ1 = 1, rounded to binary64.
Eigen::VectorXd stationary_phase_extended(const FluidQueueModel& model,
                                          int digits = kMinOracleDigits);

/// A⁻¹b for the matrix implied by the triplet (its diagonal evaluated at
/// extended precision), as an m×1 matrix.
ExtMatrix solve_triplet_extended(const TripletRepresentation& rep,
                                 const Eigen::VectorXd& b,
                                 int digits = kMinOracleDigits);

/// e^{At} at extended precision, rounded to binary64.
Eigen::MatrixXd expm_extended(const Eigen::MatrixXd& a, double t,
                              int digits = kMinOracleDigits);

struct ExtendedDensity {
  Eigen::RowVectorXd p_minus;
  Eigen::MatrixXd rows;  // f(x_j), rounded to binary64
};

/// The full density pipeline at extended precision.
ExtendedDensity density_extended(const FluidQueueModel& model,
                                 const std::vector<double>& levels,
                                 int digits = kMinOracleDigits);

struct ErrorMetrics {
  double e_norm = 0.0;  ///< Frobenius-norm relative error
  double e_cw = 0.0;    ///< max |approx − ref| / ref
  /// Set when approx is nonzero where the reference is exactly zero; e_cw is
  /// then +inf.
  bool infinite = false;
};

/// Both metrics are evaluated at the reference's precision and rounded once.
ErrorMetrics error_metrics(const Eigen::MatrixXd& approx,
                           const ExtMatrix& reference);

/// Entrywise (approx − ref)/ref; 0 where both are zero, ±inf where only the
/// reference is.
Eigen::MatrixXd relative_error_matrix(const Eigen::MatrixXd& approx,
                                      const ExtMatrix& reference);

/// Exact conversion of a binary64 matrix.
ExtMatrix to_extended(const Eigen::MatrixXd& a, int digits = kMinOracleDigits);

}  // namespace fluidq
