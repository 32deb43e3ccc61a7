#include "fluidq/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fluidq/error.hpp"

namespace fluidq {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ExtVector = Eigen::Matrix<ExtReal, Eigen::Dynamic, 1>;

std::recursive_mutex& precision_mutex() {
  static std::recursive_mutex m;
  return m;
}

void require_digits(int digits) {
  if (digits < kMinOracleDigits) {
    throw ModelError("oracle precision must be at least " +
                     std::to_string(kMinOracleDigits) + " digits");
  }
}

ExtMatrix ext_zero(Eigen::Index r, Eigen::Index c) {
  ExtMatrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = 0;
  }
  return m;
}

ExtMatrix ext_identity(Eigen::Index n) {
  ExtMatrix m = ext_zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) m(i, i) = 1;
  return m;
}

MatrixXd round_to_double(const ExtMatrix& a) {
  MatrixXd out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out(i, j) = a(i, j).convert_to<double>();
    }
  }
  return out;
}

ExtMatrix row_sums(const ExtMatrix& a) {
  ExtMatrix s = ext_zero(a.rows(), 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) s(i, 0) += a(i, j);
  }
  return s;
}

// Generator with the diagonal summed at extended precision.
ExtMatrix ext_generator(const FluidQueueModel& model) {
  const int n = model.n();
  ExtMatrix t = ext_zero(n, n);
  for (int i = 0; i < n; ++i) {
    ExtReal exit = 0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      t(i, j) = model.t_offdiag()(i, j);
      exit += t(i, j);
    }
    t(i, i) = -exit;
  }
  return t;
}

ExtReal max_ratio(const ExtMatrix& j, const ExtMatrix& g) {
  ExtReal r = 0;
  for (Eigen::Index a = 0; a < g.rows(); ++a) {
    for (Eigen::Index b = 0; b < g.cols(); ++b) {
      if (g(a, b) > 0) {
        const ExtReal q = j(a, b) / g(a, b);
        if (q > r) r = q;
      }
    }
  }
  return r;
}

struct ExtBlocks {
  ExtMatrix e, f, g, h;
};

ExtBlocks ext_initial_blocks(const FluidQueueModel& model) {
  const int np = model.n_plus();
  const int nm = model.n_minus();
  const ExtMatrix t = ext_generator(model);
  const DoublingParameters params = make_parameters(model);
  const ExtReal alpha = params.alpha;
  const ExtReal beta = params.beta;
  ExtMatrix c = ext_zero(model.n(), 1);
  for (int i = 0; i < model.n(); ++i) c(i, 0) = std::abs(model.rates()(i));

  const int n = model.n();
  ExtMatrix q = ext_zero(n, n);
  ExtMatrix r = ext_zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const bool up_j = j < np;
      q(i, j) = -(up_j ? alpha : beta) * t(i, j);
      r(i, j) = (up_j ? beta : alpha) * t(i, j);
    }
    q(i, i) += c(i, 0);
    r(i, i) += c(i, 0);
  }
  const ExtMatrix p0 = q.partialPivLu().solve(r);
  ExtBlocks b;
  b.e = p0.topLeftCorner(np, np);
  b.g = p0.topRightCorner(np, nm);
  b.h = p0.bottomLeftCorner(nm, np);
  b.f = p0.bottomRightCorner(nm, nm);
  return b;
}

// At the working precision of the enclosing scope.
ExtendedRiccati riccati_in_scope(const FluidQueueModel& model, int digits) {
  const int np = model.n_plus();
  const int nm = model.n_minus();
  ExtBlocks s = ext_initial_blocks(model);
  const ExtReal tol = boost::multiprecision::pow(ExtReal(10), -(digits - 10));
  for (int k = 1; k <= 200; ++k) {
    const ExtMatrix a1 = ext_identity(np) - s.g * s.h;
    const ExtMatrix a2 = ext_identity(nm) - s.h * s.g;
    const auto lu1 = a1.partialPivLu();
    const auto lu2 = a2.partialPivLu();
    const ExtMatrix x_e = lu1.solve(s.e);
    const ExtMatrix x_gf = lu1.solve(ExtMatrix(s.g * s.f));
    const ExtMatrix x_f = lu2.solve(s.f);
    const ExtMatrix x_he = lu2.solve(ExtMatrix(s.h * s.e));
    const ExtMatrix j_g = s.e * x_gf;
    const ExtMatrix j_h = s.f * x_he;
    ExtBlocks next;
    next.e = s.e * x_e;
    next.f = s.f * x_f;
    next.g = s.g + j_g;
    next.h = s.h + j_h;
    s = std::move(next);
    if (max_ratio(j_g, s.g) <= tol && max_ratio(j_h, s.h) <= tol) {
      ExtendedRiccati out;
      out.psi = s.g;
      out.psi_hat = s.h;
      out.f_infinity = s.f;
      out.digits = digits;
      out.iterations = k;
      return out;
    }
  }
  throw NumericError("oracle: doubling did not converge at " +
                     std::to_string(digits) + " digits");
}

// Left null vector of a singular generator-like matrix, normalized to sum 1:
// solves xA = 0 with the last equation replaced by x·1 = 1.
ExtMatrix left_kernel(const ExtMatrix& a) {
  const Eigen::Index n = a.rows();
  ExtMatrix at = a.transpose();
  for (Eigen::Index j = 0; j < n; ++j) at(n - 1, j) = 1;
  ExtMatrix rhs = ext_zero(n, 1);
  rhs(n - 1, 0) = 1;
  return at.partialPivLu().solve(rhs).transpose();
}

ExtMatrix expm_in_scope(const ExtMatrix& a, const ExtReal& t, int digits) {
  const Eigen::Index n = a.rows();
  ExtReal z = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (abs(a(i, i)) > z) z = abs(a(i, i));
  }
  ExtMatrix a_hat = a;
  for (Eigen::Index i = 0; i < n; ++i) a_hat(i, i) += z;
  ExtReal norm = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    ExtReal s = 0;
    for (Eigen::Index j = 0; j < n; ++j) s += abs(a_hat(i, j));
    if (s > norm) norm = s;
  }
  ExtReal scaled = t;
  int squarings = 0;
  while (scaled * norm > 0.5) {
    scaled /= 2;
    ++squarings;
  }
  const ExtMatrix b = a_hat * scaled;
  const ExtReal eps = boost::multiprecision::pow(ExtReal(10), -(digits + 5));
  ExtMatrix sum = ext_identity(n);
  ExtMatrix term = ext_identity(n);
  for (int j = 1; j < 1000; ++j) {
    term = (b * term) / ExtReal(j);
    sum += term;
    ExtReal largest = 0;
    for (Eigen::Index i = 0; i < term.size(); ++i) {
      if (term(i) > largest) largest = term(i);
    }
    if (largest <= eps) break;
  }
  sum *= ExtReal(exp(-z * scaled));
  for (int i = 0; i < squarings; ++i) sum = ExtMatrix(sum * sum);
  return sum;
}

}  // namespace

PrecisionScope::PrecisionScope(int digits)
    : lock_(precision_mutex()), previous_(ExtReal::default_precision()) {
  ExtReal::default_precision(static_cast<unsigned>(digits));
}

PrecisionScope::~PrecisionScope() { ExtReal::default_precision(previous_); }

MatrixXd ExtendedRiccati::psi_rounded() const { return round_to_double(psi); }

ExtMatrix to_extended(const MatrixXd& a, int digits) {
  PrecisionScope scope(digits);
  ExtMatrix out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.size(); ++i) out(i) = a(i);
  return out;
}

ExtendedRiccati solve_riccati_extended(const FluidQueueModel& model,
                                       int digits) {
  require_digits(digits);
  PrecisionScope scope(digits);
  return riccati_in_scope(model, digits);
}

double riccati_residual_extended(const FluidQueueModel& model,
                                 const ExtendedRiccati& sol) {
  PrecisionScope scope(sol.digits);
  const int np = model.n_plus();
  const int nm = model.n_minus();
  const ExtMatrix t = ext_generator(model);
  ExtMatrix scaled = t;
  for (int i = 0; i < model.n(); ++i) {
    const ExtReal c = std::abs(model.rates()(i));
    for (int j = 0; j < model.n(); ++j) scaled(i, j) /= c;
  }
  const ExtMatrix a_pp = scaled.topLeftCorner(np, np);
  const ExtMatrix a_pm = scaled.topRightCorner(np, nm);
  const ExtMatrix a_mp = scaled.bottomLeftCorner(nm, np);
  const ExtMatrix a_mm = scaled.bottomRightCorner(nm, nm);
  const ExtMatrix& psi = sol.psi;
  const ExtMatrix t1 = psi * a_mp * psi;
  const ExtMatrix t2 = a_pp * psi;
  const ExtMatrix t3 = psi * a_mm;
  const ExtMatrix sum = t1 + t2 + t3 + a_pm;
  const ExtMatrix scale =
      t1 + a_pp.cwiseAbs() * psi + psi * a_mm.cwiseAbs() + a_pm;
  ExtReal worst = 0;
  for (Eigen::Index i = 0; i < sum.size(); ++i) {
    if (scale(i) > 0) {
      const ExtReal r = abs(sum(i)) / scale(i);
      if (r > worst) worst = r;
    }
  }
  return worst.convert_to<double>();
}

VectorXd stationary_phase_extended(const FluidQueueModel& model, int digits) {
  require_digits(digits);
  PrecisionScope scope(digits);
  return round_to_double(left_kernel(ext_generator(model))).transpose();
}

ExtMatrix solve_triplet_extended(const TripletRepresentation& rep,
                                 const VectorXd& b, int digits) {
  require_digits(digits);
  rep.validate();
  PrecisionScope scope(digits);
  const int m = rep.m;
  ExtMatrix a = ext_zero(m, m);
  for (int i = 0; i < m; ++i) {
    ExtReal s = rep.w(i);
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      // The implied diagonal of a left representation uses column i.
      const ExtReal off = rep.side == Side::kRight ? rep.at(i, j) : rep.at(j, i);
      s -= off * ExtReal(rep.v(j));
      a(i, j) = rep.at(i, j);
    }
    a(i, i) = s / ExtReal(rep.v(i));
  }
  ExtMatrix rhs(m, 1);
  for (int i = 0; i < m; ++i) rhs(i, 0) = b(i);
  return a.partialPivLu().solve(rhs);
}

MatrixXd expm_extended(const MatrixXd& a, double t, int digits) {
  require_digits(digits);
  PrecisionScope scope(digits);
  ExtMatrix ea(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.size(); ++i) ea(i) = a(i);
  return round_to_double(expm_in_scope(ea, ExtReal(t), digits));
}

ExtendedDensity density_extended(const FluidQueueModel& model,
                                 const std::vector<double>& levels,
                                 int digits) {
  require_digits(digits);
  PrecisionScope scope(digits);
  const int np = model.n_plus();
  const int nm = model.n_minus();
  const ExtendedRiccati ric = riccati_in_scope(model, digits);
  const ExtMatrix t = ext_generator(model);
  ExtMatrix cp_inv = ext_zero(np, np);
  ExtMatrix cm_inv = ext_zero(nm, nm);
  for (int i = 0; i < np; ++i) cp_inv(i, i) = ExtReal(1) / model.rates()(i);
  for (int i = 0; i < nm; ++i) {
    cm_inv(i, i) = ExtReal(1) / std::abs(model.rates()(np + i));
  }
  const ExtMatrix t_pp = t.topLeftCorner(np, np);
  const ExtMatrix t_mp = t.bottomLeftCorner(nm, np);
  const ExtMatrix t_mm = t.bottomRightCorner(nm, nm);
  const ExtMatrix w = t_mm + t_mp * ric.psi;
  const ExtMatrix k = cp_inv * t_pp + ric.psi * cm_inv * t_mp;
  ExtMatrix v(np, np + nm);
  v.leftCols(np) = cp_inv;
  v.rightCols(nm) = ric.psi * cm_inv;

  const ExtMatrix q = left_kernel(w);
  const ExtMatrix y = k.partialPivLu().solve(row_sums(v));
  const ExtMatrix normalizer = q * (row_sums(ext_identity(nm)) - t_mp * y);
  const ExtMatrix p = q / normalizer(0, 0);
  const ExtMatrix a = p * t_mp;

  ExtendedDensity out;
  out.p_minus = round_to_double(p);
  out.rows = MatrixXd::Zero(static_cast<Eigen::Index>(levels.size()),
                            model.n());
  for (std::size_t j = 0; j < levels.size(); ++j) {
    const ExtMatrix f = a * expm_in_scope(k, ExtReal(levels[j]), digits) * v;
    out.rows.row(static_cast<Eigen::Index>(j)) = round_to_double(f);
  }
  return out;
}

ErrorMetrics error_metrics(const MatrixXd& approx, const ExtMatrix& reference) {
  if (approx.rows() != reference.rows() || approx.cols() != reference.cols()) {
    throw std::invalid_argument("error_metrics: shape mismatch");
  }
  ErrorMetrics m;
  if (reference.size() == 0) return m;
  PrecisionScope scope(
      static_cast<int>(std::max<unsigned>(reference(0).precision(),
                                          kMinOracleDigits)));
  ExtReal diff_sq = 0;
  ExtReal ref_sq = 0;
  ExtReal worst = 0;
  for (Eigen::Index i = 0; i < reference.size(); ++i) {
    const ExtReal d = ExtReal(approx(i)) - reference(i);
    diff_sq += d * d;
    ref_sq += reference(i) * reference(i);
    if (reference(i) == 0) {
      if (approx(i) != 0.0) m.infinite = true;
      continue;
    }
    const ExtReal r = abs(d) / abs(reference(i));
    if (r > worst) worst = r;
  }
  m.e_norm = ref_sq > 0 ? ExtReal(sqrt(diff_sq / ref_sq)).convert_to<double>()
                        : (diff_sq > 0 ? std::numeric_limits<double>::infinity()
                                       : 0.0);
  m.e_cw = m.infinite ? std::numeric_limits<double>::infinity()
                      : worst.convert_to<double>();
  return m;
}

MatrixXd relative_error_matrix(const MatrixXd& approx,
                               const ExtMatrix& reference) {
  if (approx.rows() != reference.rows() || approx.cols() != reference.cols()) {
    throw std::invalid_argument("relative_error_matrix: shape mismatch");
  }
  MatrixXd out = MatrixXd::Zero(approx.rows(), approx.cols());
  if (reference.size() == 0) return out;
  PrecisionScope scope(
      static_cast<int>(std::max<unsigned>(reference(0).precision(),
                                          kMinOracleDigits)));
  const double inf = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < reference.size(); ++i) {
    if (reference(i) == 0) {
      out(i) = approx(i) == 0.0 ? 0.0 : (approx(i) > 0.0 ? inf : -inf);
      continue;
    }
    out(i) = ExtReal((ExtReal(approx(i)) - reference(i)) / reference(i))
                 .convert_to<double>();
  }
  return out;
}

}  // namespace fluidq
