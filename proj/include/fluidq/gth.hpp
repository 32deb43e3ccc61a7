#pragma once

#include <vector>

#include <Eigen/Dense>

namespace fluidq {

enum class Side {
  kRight,  ///< A v = w
  kLeft,   ///< vᵀ A = wᵀ
};

/// Triplet representation (offdiag(A), v, w) of an m×m M-matrix A.
///
/// The diagonal of A is never stored; it is implied by
///   A_ii = (w_i − Σ_{j≠i} A_ij v_j) / v_i        (right)
///   A_ii = (w_i − Σ_{j≠i} v_j A_ji) / v_i        (left)
/// and both sums are sums of nonnegative terms.
///
/// Off-diagonal entries are stored row-major with the diagonal skipped:
/// (A_12, ..., A_1m, A_21, A_23, ..., A_m,m−1).
struct TripletRepresentation {
  int m = 0;
  std::vector<double> offdiag;
  Eigen::VectorXd v;
  Eigen::VectorXd w;
  Side side = Side::kRight;

  /// Builds a representation from the off-diagonal entries of `a` (its
  /// diagonal is ignored).
  static TripletRepresentation from_offdiag(const Eigen::MatrixXd& a,
                                            Eigen::VectorXd v,
                                            Eigen::VectorXd w,
                                            Side side = Side::kRight);

  double at(int i, int j) const { return offdiag[index(i, j)]; }

  /// The matrix A with the diagonal filled in from the triplet formula.
  Eigen::MatrixXd implied_matrix() const;

  /// The same matrix's transpose, as a triplet of the opposite side.
  TripletRepresentation transposed() const;

  /// Throws GthError unless offdiag ≤ 0, v > 0, w ≥ 0 and all are finite.
  void validate() const;

  int index(int i, int j) const { return i * (m - 1) + (j < i ? j : j - 1); }
};

/// LU factors produced by the GTH-like elimination (no pivoting).
///
/// `lower` is unit lower triangular with entries ≤ 0 below the diagonal and
/// `upper` is upper triangular with U_kk ≥ 0 and entries ≤ 0 above it. When
/// the input was a LEFT representation the factors are those of Aᵀ and
/// `of_transpose` is set; the solve routines undo that transparently.
struct GthFactors {
  Eigen::MatrixXd lower;
  Eigen::MatrixXd upper;
  bool singular = false;
  bool of_transpose = false;

  int size() const { return static_cast<int>(upper.rows()); }
};

/// GTH-like elimination: pivots are recomputed from the current (w, v) at
/// every step, never by subtracting accumulated updates.
/// Throws GthError on a negative pivot or a zero pivot before the last step.
GthFactors gth_factor(const TripletRepresentation& rep);

/// x = A⁻¹ b for b ≥ 0 (x ≥ 0). Throws GthError for singular factors.
Eigen::VectorXd gth_solve(const GthFactors& factors, const Eigen::VectorXd& b);

/// x = A⁻ᵀ b for b ≥ 0.
Eigen::VectorXd gth_solve_transposed(const GthFactors& factors,
                                     const Eigen::VectorXd& b);

/// Column-by-column A⁻¹ B for a nonnegative B.
Eigen::MatrixXd gth_solve_columns(const GthFactors& factors,
                                  const Eigen::MatrixXd& b);

/// Row vector q > 0 with q A = 0 and q·1 = 1, for a singular irreducible
/// M-matrix whose representation has w = 0.
Eigen::RowVectorXd gth_left_kernel(const TripletRepresentation& rep);

}  // namespace fluidq
