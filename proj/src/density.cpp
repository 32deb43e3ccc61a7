#include "fluidq/density.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "detail/return_generators.hpp"
#include "fluidq/error.hpp"

namespace fluidq {

namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

MatrixXd zero_diagonal(MatrixXd a) {
  a.diagonal().setZero();
  return a;
}

}  // namespace

ReturnOperators build_return_operators(const FluidQueueModel& model,
                                       const RiccatiSolution& solution) {
  const PhaseDistribution phase = stationary_phase_distribution(model);
  if (!phase.positive_recurrent()) {
    throw NotPositiveRecurrent(
        "model is not positive recurrent (drift >= 0); no stationary "
        "density exists");
  }
  const int np = model.n_plus();
  const int nm = model.n_minus();
  const VectorXd c = model.abs_rates();
  const VectorXd cp_inv = c.head(np).cwiseInverse();
  const VectorXd cm_inv = c.tail(nm).cwiseInverse();
  const MatrixXd& psi = solution.psi;
  const MatrixXd& psi_hat = solution.psi_hat;
  const MatrixXd t_pm = model.offdiag_pm();
  const MatrixXd t_mp = model.offdiag_mp();

  ReturnOperators ops;
  ops.t_mp = t_mp;

  const MatrixXd w_off = zero_diagonal(model.offdiag_mm() + t_mp * psi);
  ops.neg_w = TripletRepresentation::from_offdiag(-w_off, VectorXd::Ones(nm),
                                                  VectorXd::Zero(nm));

  const MatrixXd w_hat_off =
      zero_diagonal(model.offdiag_pp() + t_pm * psi_hat);
  ops.neg_w_hat = TripletRepresentation::from_offdiag(
      -w_hat_off, VectorXd::Ones(np),
      t_pm * solution.f_infinity.rowwise().sum());

  ops.neg_k = detail::neg_k_triplet(model, phase.xi, psi, solution.f_infinity);

  const MatrixXd k_hat_off = zero_diagonal(
      cm_inv.asDiagonal() * model.offdiag_mm() +
      psi_hat * (cp_inv.asDiagonal() * t_pm));
  ops.neg_k_hat = TripletRepresentation::from_offdiag(
      -k_hat_off, phase.xi.tail(nm).cwiseProduct(c.tail(nm)),
      VectorXd::Zero(nm), Side::kLeft);

  ops.w = -ops.neg_w.implied_matrix();
  ops.w_hat = -ops.neg_w_hat.implied_matrix();
  ops.k = -ops.neg_k.implied_matrix();
  ops.k_hat = -ops.neg_k_hat.implied_matrix();

  ops.v = MatrixXd::Zero(np, np + nm);
  ops.v.leftCols(np) = cp_inv.asDiagonal();
  ops.v.rightCols(nm) = psi * cm_inv.asDiagonal();
  return ops;
}

BoundaryMass boundary_mass(const ReturnOperators& ops) {
  const RowVectorXd q = gth_left_kernel(ops.neg_w);
  const GthFactors k_factors = gth_factor(ops.neg_k);
  if (k_factors.singular) throw NumericError("boundary_mass: K is singular");
  const VectorXd y = gth_solve(k_factors, ops.v.rowwise().sum());
  BoundaryMass mass;
  mass.normalizer = q.sum() + (q * ops.t_mp).dot(y);
  mass.p_minus = q / mass.normalizer;
  return mass;
}

int expm_taylor_degree() {
  // Smallest m with 1/(m+1)! ≤ mp/4.
  static const int degree = [] {
    double term = 1.0;
    int m = 0;
    while (term / (m + 1) > kMachinePrecision / 4.0) {
      term /= (m + 1);
      ++m;
    }
    return m;
  }();
  return degree;
}

MatrixXd expm_nonneg(const MatrixXd& a, double t) {
  if (a.rows() != a.cols()) throw std::invalid_argument("expm_nonneg: not square");
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw std::invalid_argument("expm_nonneg: t must be finite and >= 0");
  }
  const int n = static_cast<int>(a.rows());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && a(i, j) < 0.0) {
        throw std::invalid_argument(
            "expm_nonneg: off-diagonal entries must be nonnegative");
      }
    }
  }
  if (n == 0) return a;
  const double z = a.diagonal().cwiseAbs().maxCoeff();
  MatrixXd a_hat = a;
  a_hat.diagonal().array() += z;
  a_hat = a_hat.cwiseMax(0.0);

  const double norm = a_hat.rowwise().sum().maxCoeff();
  int s = 0;
  double scaled_t = t;
  while (scaled_t * norm > 1.0) {
    scaled_t /= 2.0;
    ++s;
  }
  const MatrixXd b = scaled_t * a_hat;
  const int m = expm_taylor_degree();
  const MatrixXd id = MatrixXd::Identity(n, n);
  MatrixXd p = id + b / m;
  for (int j = m - 1; j >= 1; --j) p = id + (b * p) / j;
  // e^{−zt} = (e^{−z t/2^s})^{2^s}, applied before squaring so that the
  // intermediate powers stay bounded.
  p *= std::exp(-z * scaled_t);
  for (int i = 0; i < s; ++i) p = p * p;
  if (!p.allFinite()) {
    throw NumericError("expm_nonneg: overflow; split t into smaller steps");
  }
  return p;
}

RowVectorXd density_row(const ReturnOperators& ops, const BoundaryMass& mass,
                        double x) {
  const RowVectorXd a = mass.p_minus * ops.t_mp;
  return (a * expm_nonneg(ops.k, x)) * ops.v;
}

DensityResult stationary_density(const FluidQueueModel& model,
                                 const RiccatiSolution& solution,
                                 const std::vector<double>& levels) {
  for (double x : levels) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw ModelError("density levels must be positive and finite");
    }
  }
  const ReturnOperators ops = build_return_operators(model, solution);
  DensityResult out;
  out.levels = levels;
  out.mass = boundary_mass(ops);
  out.rows = MatrixXd::Zero(static_cast<Eigen::Index>(levels.size()), model.n());
  for (std::size_t j = 0; j < levels.size(); ++j) {
    out.rows.row(static_cast<Eigen::Index>(j)) =
        density_row(ops, out.mass, levels[j]);
  }
  return out;
}

}  // namespace fluidq
