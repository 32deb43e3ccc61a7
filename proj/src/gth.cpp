#include "fluidq/gth.hpp"

#include <cmath>
#include <string>

#include "fluidq/error.hpp"

namespace fluidq {

namespace {

std::string position(int i, int j) {
  return "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
}

bool nonnegative_finite(const Eigen::VectorXd& b) {
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    if (!(b(i) >= 0.0) || !std::isfinite(b(i))) return false;
  }
  return true;
}

// Solves (LU) x = b.
Eigen::VectorXd solve_lu(const GthFactors& f, const Eigen::VectorXd& b) {
  const int m = f.size();
  Eigen::VectorXd y(m);
  for (int i = 0; i < m; ++i) {
    double s = b(i);
    for (int j = 0; j < i; ++j) s -= f.lower(i, j) * y(j);
    y(i) = s;
  }
  Eigen::VectorXd x(m);
  for (int i = m - 1; i >= 0; --i) {
    double s = y(i);
    for (int j = i + 1; j < m; ++j) s -= f.upper(i, j) * x(j);
    x(i) = s / f.upper(i, i);
  }
  return x;
}

// Solves (LU)ᵀ x = b, i.e. Uᵀ z = b then Lᵀ x = z.
Eigen::VectorXd solve_lu_transposed(const GthFactors& f,
                                    const Eigen::VectorXd& b) {
  const int m = f.size();
  Eigen::VectorXd z(m);
  for (int i = 0; i < m; ++i) {
    double s = b(i);
    for (int j = 0; j < i; ++j) s -= f.upper(j, i) * z(j);
    z(i) = s / f.upper(i, i);
  }
  Eigen::VectorXd x(m);
  for (int i = m - 1; i >= 0; --i) {
    double s = z(i);
    for (int j = i + 1; j < m; ++j) s -= f.lower(j, i) * x(j);
    x(i) = s;
  }
  return x;
}

void require_solvable(const GthFactors& f, const Eigen::VectorXd& b) {
  if (f.singular) throw GthError("gth_solve: factors are singular");
  if (b.size() != f.size()) {
    throw std::invalid_argument("gth_solve: right-hand side has wrong size");
  }
  if (!nonnegative_finite(b)) {
    throw GthError("gth_solve: right-hand side must be nonnegative");
  }
}

}  // namespace

TripletRepresentation TripletRepresentation::from_offdiag(
    const Eigen::MatrixXd& a, Eigen::VectorXd v, Eigen::VectorXd w,
    Side side) {
  if (a.rows() != a.cols() || v.size() != a.rows() || w.size() != a.rows()) {
    throw std::invalid_argument("triplet representation: size mismatch");
  }
  TripletRepresentation rep;
  rep.m = static_cast<int>(a.rows());
  rep.offdiag.reserve(static_cast<std::size_t>(rep.m) * (rep.m - 1));
  for (int i = 0; i < rep.m; ++i) {
    for (int j = 0; j < rep.m; ++j) {
      if (i != j) rep.offdiag.push_back(a(i, j));
    }
  }
  rep.v = std::move(v);
  rep.w = std::move(w);
  rep.side = side;
  return rep;
}

Eigen::MatrixXd TripletRepresentation::implied_matrix() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    double s = w(i);
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      a(i, j) = at(i, j);
      s -= side == Side::kRight ? at(i, j) * v(j) : v(j) * at(j, i);
    }
    a(i, i) = s / v(i);
  }
  return a;
}

TripletRepresentation TripletRepresentation::transposed() const {
  TripletRepresentation t;
  t.m = m;
  t.offdiag.resize(offdiag.size());
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i != j) t.offdiag[t.index(i, j)] = at(j, i);
    }
  }
  t.v = v;
  t.w = w;
  t.side = side == Side::kRight ? Side::kLeft : Side::kRight;
  return t;
}

void TripletRepresentation::validate() const {
  if (m <= 0 || v.size() != m || w.size() != m ||
      offdiag.size() != static_cast<std::size_t>(m) * (m - 1)) {
    throw GthError("triplet representation: inconsistent sizes");
  }
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      const double x = at(i, j);
      if (!(x <= 0.0) || !std::isfinite(x)) {
        throw GthError("triplet representation: off-diagonal entry " +
                       position(i, j) + " is not a finite nonpositive value");
      }
    }
    if (!(v(i) > 0.0) || !std::isfinite(v(i))) {
      throw GthError("triplet representation: v must be positive");
    }
    if (!(w(i) >= 0.0) || !std::isfinite(w(i))) {
      throw GthError("triplet representation: w must be nonnegative");
    }
  }
}

GthFactors gth_factor(const TripletRepresentation& input) {
  input.validate();
  // A left representation of A is a right representation of Aᵀ.
  const bool of_transpose = input.side == Side::kLeft;
  const TripletRepresentation rep = of_transpose ? input.transposed() : input;
  const int m = rep.m;

  GthFactors f;
  f.of_transpose = of_transpose;
  f.lower = Eigen::MatrixXd::Identity(m, m);
  f.upper = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd& u = f.upper;
  Eigen::MatrixXd& l = f.lower;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i != j) u(i, j) = rep.at(i, j);
    }
  }
  Eigen::VectorXd w = rep.w;
  const Eigen::VectorXd& v = rep.v;

  for (int k = 0; k < m; ++k) {
    // The trailing block keeps the triplet (offdiag, v_{k:m}, w_{k:m}), so
    // the pivot is a quotient of a sum of nonnegative terms.
    double s = w(k);
    for (int j = k + 1; j < m; ++j) s += -u(k, j) * v(j);
    const double pivot = s / v(k);
    if (!(pivot >= 0.0) || !std::isfinite(pivot)) {
      throw GthError("gth_factor: invalid pivot at step " +
                     std::to_string(k + 1) +
                     "; the triplet does not certify an M-matrix");
    }
    if (pivot == 0.0) {
      if (k + 1 == m) {
        f.singular = true;
        break;
      }
      throw GthError("gth_factor: zero pivot at step " + std::to_string(k + 1) +
                     " of " + std::to_string(m) +
                     "; leading block is singular (reducible input?)");
    }
    u(k, k) = pivot;
    for (int i = k + 1; i < m; ++i) {
      l(i, k) = u(i, k) / pivot;
      w(i) += -l(i, k) * w(k);
      u(i, k) = 0.0;
    }
    for (int i = k + 1; i < m; ++i) {
      const double lik = -l(i, k);
      if (lik == 0.0) continue;
      for (int j = k + 1; j < m; ++j) {
        if (j != i) u(i, j) += lik * u(k, j);
      }
    }
  }
  return f;
}

Eigen::VectorXd gth_solve(const GthFactors& factors, const Eigen::VectorXd& b) {
  require_solvable(factors, b);
  return factors.of_transpose ? solve_lu_transposed(factors, b)
                              : solve_lu(factors, b);
}

Eigen::VectorXd gth_solve_transposed(const GthFactors& factors,
                                     const Eigen::VectorXd& b) {
  require_solvable(factors, b);
  return factors.of_transpose ? solve_lu(factors, b)
                              : solve_lu_transposed(factors, b);
}

Eigen::MatrixXd gth_solve_columns(const GthFactors& factors,
                                  const Eigen::MatrixXd& b) {
  Eigen::MatrixXd x(b.rows(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    x.col(j) = gth_solve(factors, Eigen::VectorXd(b.col(j)));
  }
  return x;
}

Eigen::RowVectorXd gth_left_kernel(const TripletRepresentation& rep) {
  for (Eigen::Index i = 0; i < rep.w.size(); ++i) {
    if (rep.w(i) != 0.0) {
      throw GthError("gth_left_kernel: representation must have w = 0");
    }
  }
  const GthFactors f = gth_factor(rep);
  if (!f.singular) {
    throw GthError("gth_left_kernel: final pivot is not zero");
  }
  const int m = f.size();
  Eigen::RowVectorXd q(m);
  q(m - 1) = 1.0;
  if (!f.of_transpose) {
    // q A = 0 with A = LU and U_mm = 0 forces q L = e_m.
    for (int i = m - 2; i >= 0; --i) {
      double s = 0.0;
      for (int j = i + 1; j < m; ++j) s += -f.lower(j, i) * q(j);
      q(i) = s;
    }
  } else {
    // Factors are of Aᵀ: the left kernel of A is the right kernel of U.
    for (int i = m - 2; i >= 0; --i) {
      double s = 0.0;
      for (int j = i + 1; j < m; ++j) s += -f.upper(i, j) * q(j);
      q(i) = s / f.upper(i, i);
    }
  }
  return q / q.sum();
}

}  // namespace fluidq
