#pragma once

#include <Eigen/Dense>

#include "fluidq/gth.hpp"
#include "fluidq/model.hpp"

namespace fluidq::detail {

// Off-diagonal part (zero diagonal) of K = C₊⁻¹T₊₊ + Ψ|C₋|⁻¹T₋₊. Every
// entry is a sum of nonnegative products.
inline Eigen::MatrixXd k_offdiag(const FluidQueueModel& model,
                                 const Eigen::MatrixXd& psi) {
  const int np = model.n_plus();
  const Eigen::VectorXd c_abs = model.abs_rates();
  const Eigen::MatrixXd scaled_mp =
      c_abs.tail(model.n_minus()).cwiseInverse().asDiagonal() *
      model.offdiag_mp();
  Eigen::MatrixXd k = psi * scaled_mp;
  const Eigen::MatrixXd tpp = model.offdiag_pp();
  for (int i = 0; i < np; ++i) {
    for (int j = 0; j < np; ++j) {
      if (i != j) k(i, j) += tpp(i, j) / c_abs(i);
    }
    k(i, i) = 0.0;
  }
  return k;
}

// Left triplet (offdiag(−K), ξ₊C₊, ξ₋|C₋|F∞|C₋⁻¹|T₋₊).
inline TripletRepresentation neg_k_triplet(const FluidQueueModel& model,
                                           const Eigen::VectorXd& xi,
                                           const Eigen::MatrixXd& psi,
                                           const Eigen::MatrixXd& f_infinity) {
  const int np = model.n_plus();
  const int nm = model.n_minus();
  const Eigen::VectorXd c_abs = model.abs_rates();
  const Eigen::VectorXd v =
      xi.head(np).cwiseProduct(c_abs.head(np));
  const Eigen::RowVectorXd weight =
      xi.tail(nm).cwiseProduct(c_abs.tail(nm)).transpose();
  const Eigen::RowVectorXd through_f =
      (weight * f_infinity).cwiseQuotient(c_abs.tail(nm).transpose());
  const Eigen::VectorXd w = (through_f * model.offdiag_mp()).transpose();
  return TripletRepresentation::from_offdiag(-k_offdiag(model, psi), v, w,
                                             Side::kLeft);
}

}  // namespace fluidq::detail
