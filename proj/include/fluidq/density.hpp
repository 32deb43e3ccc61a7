#pragma once

#include <vector>

#include <Eigen/Dense>

#include "fluidq/doubling.hpp"
#include "fluidq/gth.hpp"
#include "fluidq/model.hpp"

namespace fluidq {

/// The generators W, Ŵ, K, K̂ and the matrix V, together with triplet
/// representations of their negatives. The explicit matrices carry the
/// diagonals implied by the triplets.
struct ReturnOperators {
  Eigen::MatrixXd w;      // T₋₋ + T₋₊Ψ
  Eigen::MatrixXd w_hat;  // T₊₊ + T₊₋Ψ̂
  Eigen::MatrixXd k;      // C₊⁻¹T₊₊ + Ψ|C₋|⁻¹T₋₊
  Eigen::MatrixXd k_hat;  // |C₋|⁻¹T₋₋ + Ψ̂C₊⁻¹T₊₋
  Eigen::MatrixXd v;      // [C₊⁻¹, Ψ|C₋|⁻¹]
  Eigen::MatrixXd t_mp;   // T₋₊

  TripletRepresentation neg_w;      // right (offdiag(−W), 1, 0)
  TripletRepresentation neg_w_hat;  // right (offdiag(−Ŵ), 1, T₊₋F∞1)
  TripletRepresentation neg_k;      // left (offdiag(−K), ξ₊C₊, ξ₋|C₋|F∞|C₋⁻¹|T₋₊)
  TripletRepresentation neg_k_hat;  // left (offdiag(−K̂), ξ₋|C₋|, 0)
};

/// Throws NotPositiveRecurrent when the drift is nonnegative.
ReturnOperators build_return_operators(const FluidQueueModel& model,
                                       const RiccatiSolution& solution);

struct BoundaryMass {
  /// Probability mass at level zero in the down phases (the up phases carry
  /// none).
  Eigen::RowVectorXd p_minus;
  /// q·1 + qT₋₊(−K)⁻¹V·1 for the unnormalized kernel q of W.
  double normalizer = 0.0;
};

BoundaryMass boundary_mass(const ReturnOperators& ops);

/// e^{At} for a matrix with nonnegative off-diagonal entries, by a Taylor
/// polynomial of the shifted matrix A + zI ≥ 0 with scaling and squaring.
/// Every operation after the shift combines nonnegative numbers.
/// Throws NumericError on overflow.
Eigen::MatrixXd expm_nonneg(const Eigen::MatrixXd& a, double t);

/// Degree of the Taylor polynomial used by expm_nonneg.
int expm_taylor_degree();

/// f(x) = p₋T₋₊e^{Kx}V for one level x ≥ 0.
Eigen::RowVectorXd density_row(const ReturnOperators& ops,
                               const BoundaryMass& mass, double x);

struct DensityResult {
  std::vector<double> levels;
  Eigen::MatrixXd rows;  // one row f(x_j) per level, length n
  BoundaryMass mass;
};

/// Levels must be positive and finite.
DensityResult stationary_density(const FluidQueueModel& model,
                                 const RiccatiSolution& solution,
                                 const std::vector<double>& levels);

}  // namespace fluidq
