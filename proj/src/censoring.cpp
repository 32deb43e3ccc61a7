#include "fluidq/censoring.hpp"

#include <stdexcept>

#include "fluidq/error.hpp"
#include "fluidq/oracle.hpp"

namespace fluidq {

namespace {

using Eigen::MatrixXd;

constexpr int kCensoringDigits = 50;

// Must be called inside a PrecisionScope.
MatrixXd censor_top_ext(const ExtMatrix& p, int top) {
  const int m = static_cast<int>(p.rows());
  const int rest = m - top;
  ExtMatrix out = p.bottomRightCorner(rest, rest);
  if (top > 0) {
    const ExtMatrix a = ExtMatrix::Identity(top, top) - p.topLeftCorner(top, top);
    const Eigen::FullPivLU<ExtMatrix> lu(a);
    if (!lu.isInvertible()) {
      throw NumericError("censor_top: censored block is singular");
    }
    out += p.bottomLeftCorner(rest, top) *
           lu.solve(ExtMatrix(p.topRightCorner(top, rest)));
  }
  MatrixXd r(rest, rest);
  for (int i = 0; i < rest; ++i) {
    for (int j = 0; j < rest; ++j) r(i, j) = static_cast<double>(out(i, j));
  }
  return r;
}

}  // namespace

MatrixXd blown_up_matrix(const MatrixXd& p, int n_plus, int k) {
  if (p.rows() != p.cols() || k < 0 || n_plus < 0 || n_plus > p.rows()) {
    throw std::invalid_argument("blown_up_matrix: bad arguments");
  }
  const int n = static_cast<int>(p.rows());
  const int nm = n - n_plus;
  const DoublingState s = split(p, n_plus);
  MatrixXd a_eq = MatrixXd::Zero(n, n);
  a_eq.topRightCorner(n_plus, nm) = s.g;
  a_eq.bottomLeftCorner(nm, n_plus) = s.h;
  MatrixXd a_plus = MatrixXd::Zero(n, n);
  a_plus.topLeftCorner(n_plus, n_plus) = s.e;
  MatrixXd a_minus = MatrixXd::Zero(n, n);
  a_minus.bottomRightCorner(nm, nm) = s.f;

  const int blocks = 1 << k;
  MatrixXd big = MatrixXd::Zero(blocks * n, blocks * n);
  for (int b = 0; b < blocks; ++b) {
    big.block(b * n, b * n, n, n) += a_eq;
    big.block(b * n, ((b + 1) % blocks) * n, n, n) += a_plus;
    big.block(b * n, ((b + blocks - 1) % blocks) * n, n, n) += a_minus;
  }
  return big;
}

MatrixXd censor_top(const MatrixXd& p, int top) {
  const int m = static_cast<int>(p.rows());
  if (p.cols() != m || top < 0 || top >= m) {
    throw std::invalid_argument("censor_top: bad block size");
  }
  PrecisionScope scope(kCensoringDigits);
  return censor_top_ext(to_extended(p, kCensoringDigits), top);
}

MatrixXd censored_reference_step(const MatrixXd& p, int n_plus, int k) {
  const int n = static_cast<int>(p.rows());
  const MatrixXd big = blown_up_matrix(p, n_plus, k);
  return censor_top(big, static_cast<int>(big.rows()) - n);
}

MatrixXd censoring_chain(const InitialPencil& pencil, double gamma) {
  const int n = static_cast<int>(pencil.q.rows());
  MatrixXd s = MatrixXd::Zero(2 * n, 2 * n);
  s.topLeftCorner(n, n) = MatrixXd::Identity(n, n) - gamma * pencil.q;
  s.topRightCorner(n, n) = gamma * pencil.r;
  s.bottomLeftCorner(n, n) = MatrixXd::Identity(n, n);
  return s;
}

MatrixXd initial_censoring_reference(const FluidQueueModel& model,
                                     const DoublingParameters& params,
                                     std::optional<double> gamma) {
  const InitialPencil pencil = initial_pencil(model, params);
  const double g = gamma.value_or(pencil.gamma);
  if (!(g > 0.0) || g * pencil.q.diagonal().maxCoeff() > 1.0) {
    throw std::invalid_argument(
        "initial_censoring_reference: gamma exceeds (max Q_ii)^-1");
  }
  // S is assembled at extended precision: I - gamma Q rounded to binary64
  // would already carry an absolute error that the censoring turns into a
  // relative one on small entries of P0.
  const int n = model.n();
  PrecisionScope scope(kCensoringDigits);
  const ExtReal ge(g);
  const ExtMatrix q = to_extended(pencil.q, kCensoringDigits);
  const ExtMatrix r = to_extended(pencil.r, kCensoringDigits);
  ExtMatrix s = ExtMatrix::Zero(2 * n, 2 * n);
  s.topLeftCorner(n, n) = ExtMatrix::Identity(n, n) - ge * q;
  s.topRightCorner(n, n) = ge * r;
  s.bottomLeftCorner(n, n) = ExtMatrix::Identity(n, n);
  return censor_top_ext(s, n);
}

}  // namespace fluidq
