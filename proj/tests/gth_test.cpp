#include <gtest/gtest.h>

#include <cmath>

#include "fluidq/error.hpp"
#include "fluidq/gth.hpp"
#include "fluidq/model.hpp"
#include "fluidq/oracle.hpp"
#include "support/test_models.hpp"

namespace fluidq {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using testing::Rng;

constexpr double mp = kMachinePrecision;

TripletRepresentation two_by_two(double w1, double w2) {
  MatrixXd a(2, 2);
  a << 0, -1, -1, 0;
  return TripletRepresentation::from_offdiag(a, VectorXd::Ones(2),
                                             (VectorXd(2) << w1, w2).finished());
}

TripletRepresentation identity3() {
  return TripletRepresentation::from_offdiag(
      MatrixXd::Zero(3, 3), VectorXd::Ones(3), VectorXd::Ones(3));
}

TEST(Triplet, StorageOrderAndImpliedMatrix) {
  MatrixXd a(3, 3);
  a << 9, -1, -2, -3, 9, -4, -5, -6, 9;
  const auto rep = TripletRepresentation::from_offdiag(
      a, VectorXd::Ones(3), (VectorXd(3) << 1, 2, 3).finished());
  const std::vector<double> expected{-1, -2, -3, -4, -5, -6};
  EXPECT_EQ(rep.offdiag, expected);
  EXPECT_EQ(rep.at(2, 1), -6);
  const MatrixXd implied = rep.implied_matrix();
  EXPECT_EQ(implied(0, 0), 4);
  EXPECT_EQ(implied(1, 1), 9);
  EXPECT_EQ(implied(2, 2), 14);
  EXPECT_EQ(implied(0, 2), -2);
}

TEST(Triplet, ValidateRejectsBadCertificates) {
  MatrixXd a(2, 2);
  a << 0, 1, -1, 0;
  EXPECT_THROW(TripletRepresentation::from_offdiag(a, VectorXd::Ones(2),
                                                   VectorXd::Ones(2))
                   .validate(),
               GthError);
  auto rep = two_by_two(1, 1);
  rep.v(0) = 0.0;
  EXPECT_THROW(rep.validate(), GthError);
  rep = two_by_two(1, -1);
  EXPECT_THROW(rep.validate(), GthError);
}

TEST(GthFactor, TwoByTwo) {
  const auto f = gth_factor(two_by_two(1, 1));
  EXPECT_FALSE(f.singular);
  EXPECT_EQ(f.upper(0, 0), 2.0);
  EXPECT_EQ(f.upper(0, 1), -1.0);
  EXPECT_EQ(f.upper(1, 0), 0.0);
  EXPECT_EQ(f.upper(1, 1), 1.5);
  EXPECT_EQ(f.lower(0, 0), 1.0);
  EXPECT_EQ(f.lower(1, 0), -0.5);
  EXPECT_EQ(f.lower(1, 1), 1.0);
  EXPECT_EQ(f.lower(0, 1), 0.0);
}

TEST(GthFactor, Identity) {
  const auto f = gth_factor(identity3());
  EXPECT_EQ(f.lower, MatrixXd::Identity(3, 3));
  EXPECT_EQ(f.upper, MatrixXd::Identity(3, 3));
}

TEST(GthFactor, SingularFinalPivotIsExactlyZero) {
  const auto f = gth_factor(two_by_two(0, 0));
  EXPECT_TRUE(f.singular);
  EXPECT_EQ(f.upper(1, 1), 0.0);
  EXPECT_EQ(f.upper(0, 0), 1.0);
  EXPECT_THROW(gth_solve(f, VectorXd::Ones(2)), GthError);
}

TEST(GthFactor, PrematureZeroPivotRejected) {
  // The leading 1x1 block is singular: A = [[0, 0], [-1, 1]].
  MatrixXd a(2, 2);
  a << 0, 0, -1, 0;
  const auto rep = TripletRepresentation::from_offdiag(
      a, VectorXd::Ones(2), (VectorXd(2) << 0, 0).finished());
  EXPECT_THROW(gth_factor(rep), GthError);
}

TEST(GthSolve, SmallExamples) {
  const auto f = gth_factor(two_by_two(1, 1));
  const VectorXd x1 = gth_solve(f, VectorXd::Ones(2));
  EXPECT_EQ(x1, VectorXd::Ones(2));
  const VectorXd x2 = gth_solve(f, (VectorXd(2) << 3, 0).finished());
  EXPECT_NEAR(x2(0), 2.0, 2 * mp);
  EXPECT_NEAR(x2(1), 1.0, 2 * mp);
  const VectorXd x3 =
      gth_solve(gth_factor(identity3()), (VectorXd(3) << 0.25, 0, 0).finished());
  EXPECT_EQ(x3, (VectorXd(3) << 0.25, 0, 0).finished());
  EXPECT_THROW(gth_solve(f, (VectorXd(2) << -1, 0).finished()), GthError);
}

TEST(GthSolveTransposed, SmallExamples) {
  const auto f = gth_factor(two_by_two(1, 1));
  const VectorXd x = gth_solve_transposed(f, (VectorXd(2) << 3, 0).finished());
  EXPECT_NEAR(x(0), 2.0, 2 * mp);
  EXPECT_NEAR(x(1), 1.0, 2 * mp);

  // A = [[1, -0.5], [0, 1]] as (offdiag, 1, (0.5, 1)).
  MatrixXd a(2, 2);
  a << 0, -0.5, 0, 0;
  const auto rep = TripletRepresentation::from_offdiag(
      a, VectorXd::Ones(2), (VectorXd(2) << 0.5, 1).finished());
  const VectorXd y = gth_solve_transposed(gth_factor(rep), VectorXd::Ones(2));
  EXPECT_EQ(y(0), 1.0);
  EXPECT_EQ(y(1), 1.5);

  const VectorXd b = (VectorXd(3) << 0.5, 2, 0).finished();
  EXPECT_EQ(gth_solve_transposed(gth_factor(identity3()), b), b);
}

TEST(GthSolve, LeftRepresentationSolvesOriginalMatrix) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rep =
        testing::random_mmatrix_triplet(rng, 5, 4.0, Side::kLeft);
    const MatrixXd a = rep.implied_matrix();
    const VectorXd b = VectorXd::Ones(5);
    const auto f = gth_factor(rep);
    EXPECT_TRUE(f.of_transpose);
    const VectorXd x = gth_solve(f, b);
    EXPECT_LE((a * x - b).norm(), 1e-10 * (a.cwiseAbs() * x).norm());
    const VectorXd y = gth_solve_transposed(f, b);
    EXPECT_LE((a.transpose() * y - b).norm(),
              1e-10 * (a.cwiseAbs().transpose() * y).norm());
  }
}

TEST(GthLeftKernel, Examples) {
  const auto q2 = gth_left_kernel(two_by_two(0, 0));
  EXPECT_EQ(q2(0), 0.5);
  EXPECT_EQ(q2(1), 0.5);

  // -T for the cycle 1 -> 2 -> 3 -> 1 with unit rates.
  MatrixXd a = MatrixXd::Zero(3, 3);
  a(0, 1) = a(1, 2) = a(2, 0) = -1;
  const auto rep = TripletRepresentation::from_offdiag(a, VectorXd::Ones(3),
                                                       VectorXd::Zero(3));
  const auto q3 = gth_left_kernel(rep);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(q3(i), 1.0 / 3.0, 2 * mp);
}

TEST(GthLeftKernel, MatchesExtendedKernelOnRandomGenerators) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = testing::random_model(rng);
    const auto rep = TripletRepresentation::from_offdiag(
        -m.t_offdiag(), VectorXd::Ones(m.n()), VectorXd::Zero(m.n()));
    const Eigen::RowVectorXd q = gth_left_kernel(rep);
    const VectorXd ref = stationary_phase_extended(m, 50);
    for (int i = 0; i < m.n(); ++i) {
      EXPECT_GT(q(i), 0.0);
      EXPECT_LE(std::abs(q(i) - ref(i)), 1e3 * mp * ref(i));
    }
  }
}

// Property: L U reproduces A for diagonally generated
// M-matrices (v = 1, random offdiag <= 0 and w >= 0).
TEST(GthFactor, ReconstructionProperty) {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = std::uniform_int_distribution<int>(1, 10)(rng);
    MatrixXd a = MatrixXd::Zero(m, m);
    VectorXd w(m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        if (i != j) a(i, j) = -testing::uniform(rng, 0.0, 1.0);
      }
      w(i) = testing::uniform(rng, 0.0, 1.0);
    }
    const auto rep =
        TripletRepresentation::from_offdiag(a, VectorXd::Ones(m), w);
    const auto f = gth_factor(rep);
    const MatrixXd implied = rep.implied_matrix();
    // L U is formed exactly: in binary64 the product itself cancels in
    // the off-diagonal entries.
    PrecisionScope scope(60);
    const ExtMatrix lu = to_extended(f.lower, 60) * to_extended(f.upper, 60);
    const MatrixXd abs_lu = f.lower.cwiseAbs() * f.upper.cwiseAbs();
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        EXPECT_LE(f.lower(i, j), i == j ? 1.0 : 0.0);
        if (j > i) EXPECT_LE(f.upper(i, j), 0.0);
        const double err = static_cast<double>(abs(lu(i, j) - implied(i, j)));
        // Diagonal entries are sums of nonnegative terms and must match
        // relatively; an off-diagonal A_ij can be far smaller than the
        // factor entries that reproduce it, so it is held to |L||U|.
        const double scale = i == j ? std::abs(implied(i, j)) : abs_lu(i, j);
        EXPECT_LE(err, 4 * m * mp * scale)
            << "trial " << trial << " entry " << i << "," << j;
      }
      EXPECT_GE(f.upper(i, i), 0.0);
    }
    const VectorXd v = gth_solve(f, w);
    for (int i = 0; i < m; ++i) EXPECT_LE(std::abs(v(i) - 1.0), 4 * m * mp);
  }
}

// Property: componentwise accuracy against the extended-precision solve on
// matrices with entries spread over 12 orders of magnitude.
TEST(GthSolve, AccuracyAgainstOracle) {
  Rng rng(14);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int m = std::uniform_int_distribution<int>(2, 10)(rng);
    const auto rep = testing::random_mmatrix_triplet(rng, m, 12.0);
    VectorXd b(m);
    for (int i = 0; i < m; ++i) b(i) = testing::log_uniform(rng, -6, 6);
    const VectorXd x = gth_solve(gth_factor(rep), b);
    ASSERT_GE(x.minCoeff(), 0.0);
    const ExtMatrix ref = solve_triplet_extended(rep, b, 50);
    PrecisionScope scope(50);
    for (int i = 0; i < m; ++i) {
      const ExtReal r = ref(i, 0);
      const double err =
          static_cast<double>(abs(ExtReal(x(i)) - r) / r);
      worst = std::max(worst, err);
    }
  }
  EXPECT_LE(worst, 1e3 * mp);
}

TEST(GthSolveColumns, MatchesColumnwiseSolve) {
  Rng rng(15);
  const auto rep = testing::random_mmatrix_triplet(rng, 4, 3.0);
  const auto f = gth_factor(rep);
  MatrixXd b(4, 2);
  b << 1, 0, 2, 1, 0, 3, 1, 1;
  const MatrixXd x = gth_solve_columns(f, b);
  for (int j = 0; j < 2; ++j) {
    EXPECT_EQ(x.col(j), gth_solve(f, b.col(j)));
  }
}

}  // namespace
}  // namespace fluidq
