#include <gtest/gtest.h>

#include <cmath>

#include "fluidq/density.hpp"
#include "fluidq/doubling.hpp"
#include "fluidq/error.hpp"
#include "fluidq/model.hpp"
#include "fluidq/oracle.hpp"
#include "support/quadrature.hpp"
#include "support/test_models.hpp"

namespace fluidq {
namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;
using testing::m2_model;
using testing::Rng;

constexpr double mp = kMachinePrecision;

RiccatiSolution comp_solve(const FluidQueueModel& m) {
  return solve_riccati(m, make_parameters(m));
}

// Essentially nonnegative matrix: off-diagonals log-uniform over `decades`
// (some zero), diagonal of either sign.
MatrixXd random_essentially_nonneg(Rng& rng, int n, double decades) {
  MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) {
        a(i, i) = (testing::uniform(rng, 0, 1) < 0.7 ? -1.0 : 1.0) *
                  testing::log_uniform(rng, -decades / 2, decades / 2);
      } else if (testing::uniform(rng, 0, 1) < 0.8) {
        a(i, j) = testing::log_uniform(rng, -decades / 2, decades / 2);
      } else {
        a(i, j) = 0.0;
      }
    }
  }
  return a;
}

MatrixXd random_generator(Rng& rng, int n) {
  MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = i == j ? 0.0 : testing::uniform(rng, 0, 2);
    a(i, i) = -a.row(i).sum();
  }
  return a;
}

TEST(ReturnOperators, TwoStateClosedForm) {
  const auto m = m2_model();
  const auto sol = comp_solve(m);
  const auto ops = build_return_operators(m, sol);
  EXPECT_EQ(ops.w(0, 0), 0.0);
  EXPECT_NEAR(ops.k(0, 0), -0.5, 4 * mp);
  ASSERT_EQ(ops.v.cols(), 2);
  EXPECT_EQ(ops.v(0, 0), 1.0);
  EXPECT_NEAR(ops.v(0, 1), 0.5, 2 * mp);
  // Left triplet for −K: ξ₊C₊ = 0.5 and the w vector equals 0.5·0.5.
  EXPECT_NEAR(ops.neg_k.v(0), 0.5, 2 * mp);
  EXPECT_NEAR(ops.neg_k.w(0), 0.25, 1e-14);
}

TEST(ReturnOperators, WeaklyConnectedRowSumsOfW) {
  const auto m = weakly_connected_model();
  const auto ops = build_return_operators(m, comp_solve(m));
  const VectorXd sums = ops.w.rowwise().sum();
  const VectorXd scale = ops.w.cwiseAbs().rowwise().sum();
  for (int i = 0; i < sums.size(); ++i) {
    EXPECT_LE(std::abs(sums(i)), 1e2 * mp * scale(i));
  }
  for (const MatrixXd* g : {&ops.w, &ops.w_hat, &ops.k, &ops.k_hat}) {
    for (Eigen::Index i = 0; i < g->rows(); ++i) {
      for (Eigen::Index j = 0; j < g->cols(); ++j) {
        if (i != j) EXPECT_GE((*g)(i, j), 0.0);
      }
    }
  }
  EXPECT_GE(ops.v.minCoeff(), 0.0);
}

// The triplet diagonals are implied by the certificates. Here the generators
// are assembled from their defining formulas, diagonals included, and the
// certificate identities are checked against them.
TEST(ReturnOperators, TripletIdentitiesOnWeaklyConnected) {
  const auto m = weakly_connected_model();
  const auto sol = comp_solve(m);
  const auto ops = build_return_operators(m, sol);
  const int np = m.n_plus();
  const int nm = m.n_minus();
  const MatrixXd t = m.generator();
  const VectorXd c = m.abs_rates();
  const MatrixXd cp_inv = c.head(np).cwiseInverse().asDiagonal();
  const MatrixXd cm_inv = c.tail(nm).cwiseInverse().asDiagonal();
  const MatrixXd t_pp = t.topLeftCorner(np, np), t_pm = t.topRightCorner(np, nm);
  const MatrixXd t_mp = t.bottomLeftCorner(nm, np), t_mm = t.bottomRightCorner(nm, nm);
  const MatrixXd& psi = sol.psi;
  const MatrixXd& psi_hat = sol.psi_hat;

  const MatrixXd w = t_mm + t_mp * psi;
  const MatrixXd w_hat = t_pp + t_pm * psi_hat;
  const MatrixXd k = cp_inv * t_pp + psi * cm_inv * t_mp;
  const MatrixXd k_hat = cm_inv * t_mm + psi_hat * cp_inv * t_pm;
  const MatrixXd w_abs = t_mm.cwiseAbs() + t_mp * psi;
  const MatrixXd w_hat_abs = t_pp.cwiseAbs() + t_pm * psi_hat;
  const MatrixXd k_abs = cp_inv * t_pp.cwiseAbs() + psi * cm_inv * t_mp;
  const MatrixXd k_hat_abs = cm_inv * t_mm.cwiseAbs() + psi_hat * cp_inv * t_pm;

  auto check = [](const VectorXd& residual, const VectorXd& scale,
                  const char* what) {
    for (Eigen::Index i = 0; i < residual.size(); ++i) {
      EXPECT_LE(std::abs(residual(i)), 1e-11 * scale(i)) << what << " " << i;
    }
  };
  const VectorXd ones_m = VectorXd::Ones(nm), ones_p = VectorXd::Ones(np);
  check(-w * ones_m - ops.neg_w.w, w_abs * ones_m, "-W");
  check(-w_hat * ones_p - ops.neg_w_hat.w,
        w_hat_abs * ones_p + ops.neg_w_hat.w, "-W^");
  const VectorXd vk = ops.neg_k.v;
  check(-(k.transpose() * vk) - ops.neg_k.w,
        k_abs.transpose() * vk + ops.neg_k.w, "-K");
  const VectorXd vkh = ops.neg_k_hat.v;
  check(-(k_hat.transpose() * vkh) - ops.neg_k_hat.w,
        k_hat_abs.transpose() * vkh, "-K^");

  // The implied diagonals agree with the formulas.
  for (int i = 0; i < np; ++i) {
    EXPECT_LE(std::abs(ops.k(i, i) - k(i, i)), 1e-11 * k_abs(i, i));
  }
}

TEST(ReturnOperators, InvariantSubspaceIdentity) {
  Rng rng(41);
  std::vector<FluidQueueModel> models{weakly_connected_model()};
  for (int i = 0; i < 20; ++i) models.push_back(testing::random_model(rng, 8));
  for (std::size_t t = 0; t < models.size(); ++t) {
    const auto& m = models[t];
    const auto ops = build_return_operators(m, comp_solve(m));
    const MatrixXd tm = m.generator();
    const MatrixXd c = m.rates().asDiagonal();
    const MatrixXd lhs = ops.v * tm;
    const MatrixXd rhs = ops.k * ops.v * c;
    const double scale =
        (ops.k.cwiseAbs() * ops.v * c.cwiseAbs()).norm() +
        (ops.v * tm.cwiseAbs()).norm();
    EXPECT_LE((lhs - rhs).norm(), 1e-11 * scale) << "model " << t;
  }
}

TEST(BoundaryMass, TwoStateClosedForm) {
  const auto m = m2_model();
  const auto ops = build_return_operators(m, comp_solve(m));
  const auto mass = boundary_mass(ops);
  ASSERT_EQ(mass.p_minus.size(), 1);
  EXPECT_NEAR(mass.normalizer, 4.0, 4e-14);
  EXPECT_NEAR(mass.p_minus(0), 0.25, 1e-14);
}

TEST(BoundaryMass, KernelAndNormalization) {
  Rng rng(42);
  std::vector<FluidQueueModel> models{weakly_connected_model(), m2_model()};
  for (int i = 0; i < 20; ++i) models.push_back(testing::random_model(rng));
  for (std::size_t t = 0; t < models.size(); ++t) {
    const auto& m = models[t];
    const auto ops = build_return_operators(m, comp_solve(m));
    const auto mass = boundary_mass(ops);
    EXPECT_GE(mass.p_minus.minCoeff(), 0.0);
    const RowVectorXd res = mass.p_minus * ops.w;
    const RowVectorXd scale = mass.p_minus.cwiseAbs() * ops.w.cwiseAbs();
    for (Eigen::Index i = 0; i < res.size(); ++i) {
      EXPECT_LE(std::abs(res(i)), 1e3 * mp * scale(i)) << "model " << t;
    }
    const VectorXd y = (-ops.k).partialPivLu().solve(ops.v.rowwise().sum());
    const double total =
        mass.p_minus.sum() + (mass.p_minus * ops.t_mp).dot(y);
    EXPECT_LE(std::abs(total - 1.0), 1e-12) << "model " << t;
  }
}

TEST(ExpmNonneg, Examples) {
  EXPECT_EQ(expm_nonneg(MatrixXd::Zero(3, 3), 1.0), MatrixXd::Identity(3, 3));
  MatrixXd a(2, 2);
  a << -1, 1, 1, -1;
  const MatrixXd e = expm_nonneg(a, 1.0);
  const double p = (1 + std::exp(-2.0)) / 2, q = (1 - std::exp(-2.0)) / 2;
  EXPECT_NEAR(e(0, 0), p, 4 * mp);
  EXPECT_NEAR(e(1, 1), p, 4 * mp);
  EXPECT_NEAR(e(0, 1), q, 4 * mp);
  EXPECT_NEAR(e(1, 0), q, 4 * mp);
  const MatrixXd k = MatrixXd::Constant(1, 1, -0.5);
  EXPECT_NEAR(expm_nonneg(k, 2.0)(0, 0), std::exp(-1.0), 4 * mp);
  EXPECT_EQ(expm_nonneg(a, 0.0), MatrixXd::Identity(2, 2));
}

TEST(ExpmNonneg, RejectsBadInput) {
  MatrixXd a(2, 2);
  a << -1, -1, 1, -1;
  EXPECT_ANY_THROW(expm_nonneg(a, 1.0));
  a(0, 1) = 1.0;
  EXPECT_ANY_THROW(expm_nonneg(a, -1.0));
  EXPECT_ANY_THROW(expm_nonneg(a, INFINITY));
  EXPECT_THROW(expm_nonneg(MatrixXd::Constant(1, 1, 800.0), 1.0), NumericError);
}

TEST(ExpmNonneg, TaylorDegree) {
  const int m = expm_taylor_degree();
  EXPECT_LE(1.0 / std::tgamma(m + 2.0), mp / 4);
  EXPECT_GT(1.0 / std::tgamma(m + 1.0), mp / 4);
}

TEST(ExpmNonneg, MatchesOracleOnWidelyScaledMatrices) {
  Rng rng(43);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd a = random_essentially_nonneg(rng, 6, 8.0);
    const double t = 1.0 / a.cwiseAbs().rowwise().sum().maxCoeff() *
                     testing::log_uniform(rng, -1, 1);
    const MatrixXd e = expm_nonneg(a, t);
    const MatrixXd ref = expm_extended(a, t, 50);
    ASSERT_GE(e.minCoeff(), 0.0);
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        if (ref(i, j) == 0.0) {
          EXPECT_EQ(e(i, j), 0.0);
          continue;
        }
        worst = std::max(worst, std::abs(e(i, j) - ref(i, j)) / ref(i, j));
      }
    }
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(ExpmNonneg, SemigroupProperty) {
  Rng rng(44);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 8)(rng);
    const MatrixXd a = random_generator(rng, n);
    const double s = testing::log_uniform(rng, -2, 1);
    const double t = testing::log_uniform(rng, -2, 1);
    const MatrixXd lhs = expm_nonneg(a, s + t);
    const MatrixXd rhs = expm_nonneg(a, s) * expm_nonneg(a, t);
    EXPECT_LE((lhs - rhs).norm(), 1e-12 * lhs.norm()) << "trial " << trial;
  }
}

TEST(StationaryDensity, TwoStateClosedForm) {
  const auto m = m2_model();
  const auto d = stationary_density(m, comp_solve(m), {1.0});
  ASSERT_EQ(d.rows.rows(), 1);
  ASSERT_EQ(d.rows.cols(), 2);
  EXPECT_NEAR(d.rows(0, 0), 0.25 * std::exp(-0.5), 1e-14);
  EXPECT_NEAR(d.rows(0, 1), 0.125 * std::exp(-0.5), 1e-14);
  EXPECT_NEAR(d.mass.p_minus(0), 0.25, 1e-14);
}

TEST(StationaryDensity, NonnegativeOnWeaklyConnected) {
  const auto m = weakly_connected_model();
  const auto d = stationary_density(m, comp_solve(m), {0.01, 1.0, 100.0});
  EXPECT_GE(d.rows.minCoeff(), 0.0);
  EXPECT_GT(d.rows.row(2).sum(), 0.0);
}

TEST(StationaryDensity, MatchesOracleOnWeaklyConnected) {
  const auto m = weakly_connected_model();
  const std::vector<double> x{0.01, 1.0, 100.0, 1000.0};
  const auto d = stationary_density(m, comp_solve(m), x);
  const auto ref = density_extended(m, x, 50);
  for (Eigen::Index i = 0; i < ref.p_minus.size(); ++i) {
    EXPECT_LE(std::abs(d.mass.p_minus(i) - ref.p_minus(i)),
              1e-13 * ref.p_minus(i));
  }
  for (Eigen::Index j = 0; j < d.rows.rows(); ++j) {
    const double err = (d.rows.row(j) - ref.rows.row(j)).norm();
    EXPECT_LE(err, 1e-12 * ref.rows.row(j).norm()) << "x = " << x[j];
  }
}

TEST(StationaryDensity, TotalMassByQuadrature) {
  for (const auto& m : {m2_model(), weakly_connected_model()}) {
    const auto sol = comp_solve(m);
    ASSERT_TRUE(sol.diagnostics.lambda.has_value());
    const auto ops = build_return_operators(m, sol);
    const auto mass = boundary_mass(ops);
    EXPECT_NEAR(testing::total_mass(ops, mass, *sol.diagnostics.lambda), 1.0,
                1e-8)
        << "n = " << m.n();
  }
}

TEST(StationaryDensity, SatisfiesDifferentialEquation) {
  // f'(x) = f(x) T C⁻¹.
  const auto m = weakly_connected_model();
  const auto sol = comp_solve(m);
  const double h = 1e-5;
  const auto d = stationary_density(m, sol, {1.0 - h, 1.0, 1.0 + h});
  const RowVectorXd deriv = (d.rows.row(2) - d.rows.row(0)) / (2 * h);
  const RowVectorXd rhs =
      d.rows.row(1) * m.generator() * m.rates().cwiseInverse().asDiagonal();
  EXPECT_LE((deriv - rhs).norm(), 1e-6 * rhs.norm());
}

TEST(StationaryDensity, TailDecreases) {
  const auto m = weakly_connected_model();
  std::vector<double> x;
  for (int i = 0; i <= 40; ++i) x.push_back(std::pow(10.0, -2 + 0.2 * i));
  const auto d = stationary_density(m, comp_solve(m), x);
  const VectorXd total = d.rows.rowwise().sum();
  Eigen::Index mode = 0;
  total.maxCoeff(&mode);
  for (Eigen::Index i = mode + 1; i < total.size(); ++i) {
    EXPECT_LE(total(i), total(i - 1)) << "x = " << x[i];
  }
}

TEST(StationaryDensity, RejectsNonPositiveLevels) {
  const auto m = m2_model();
  const auto sol = comp_solve(m);
  EXPECT_THROW(stationary_density(m, sol, {0.0}), ModelError);
  EXPECT_THROW(stationary_density(m, sol, {1.0, -1.0}), ModelError);
  EXPECT_THROW(stationary_density(m, sol, {NAN}), ModelError);
}

TEST(StationaryDensity, PositiveDriftRejected) {
  MatrixXd t(2, 2);
  t << 0, 1, 1, 0;
  VectorXd c(2);
  c << 2, -1;
  const auto m = FluidQueueModel::create(1, 1, t, c);
  const auto sol = comp_solve(m);
  EXPECT_THROW(build_return_operators(m, sol), NotPositiveRecurrent);
  EXPECT_THROW(stationary_density(m, sol, {1.0}), NotPositiveRecurrent);
}

}  // namespace
}  // namespace fluidq
