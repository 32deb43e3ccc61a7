#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fluidq/error.hpp"
#include "fluidq/model.hpp"

namespace fluidq {

/// How the inverses of I − GH and I − HG are applied.
enum class Variant {
  kComp,  ///< GTH with triplets maintained exactly by the iteration
  kXxl,   ///< GTH with w rebuilt each step as 1 − (GH)·1
  kGlx,   ///< LU with partial pivoting on the explicit matrices
};

std::string_view to_string(Variant variant);
/// Accepts "comp", "xxl" and "glx". Throws ModelError otherwise.
Variant parse_variant(std::string_view name);

/// The pencil (Q, R) with P₀ = Q⁻¹R.
struct InitialPencil {
  Eigen::MatrixXd q;
  Eigen::MatrixXd r;
  /// Step size for the stochastic embedding S of the pencil; (2 max Q_ii)⁻¹.
  double gamma = 0.0;
};

InitialPencil initial_pencil(const FluidQueueModel& model,
                             const DoublingParameters& params);

/// Blocks of the iterate P_k = [E G; H F].
struct DoublingState {
  Eigen::MatrixXd e;  // n₊×n₊
  Eigen::MatrixXd f;  // n₋×n₋
  Eigen::MatrixXd g;  // n₊×n₋
  Eigen::MatrixXd h;  // n₋×n₊
  int k = 0;
  /// G_k − G_{k−1} and H_k − H_{k−1}, taken from the additive terms of the
  /// step. Zero at k = 0.
  Eigen::MatrixXd last_increment;
  Eigen::MatrixXd last_increment_h;

  int n_plus() const { return static_cast<int>(e.rows()); }
  int n_minus() const { return static_cast<int>(f.rows()); }
};

/// The n×n matrix [E G; H F].
Eigen::MatrixXd assemble(const DoublingState& state);

/// Splits an n×n matrix into the blocks of a state at step k.
DoublingState split(const Eigen::MatrixXd& p, int n_plus, int k = 0);

DoublingState initialize(const FluidQueueModel& model,
                         const DoublingParameters& params, Variant variant);

/// One application of the doubling map. Only the smaller of I − GH and
/// I − HG is factored when n₊ ≠ n₋.
DoublingState doubling_step(const DoublingState& state, Variant variant);

struct SolveOptions {
  Variant variant = Variant::kComp;
  /// Defaults to n·mp.
  std::optional<double> tol;
  int max_iter = 100;
};

struct ConvergenceDiagnostics {
  int iterations = 0;
  /// max_ij J_ij / G_ij after each step.
  std::vector<double> increment_ratios;
  /// Perron value of −K; absent if the estimate failed.
  std::optional<double> lambda;
  /// (1 − βλ)/(1 + αλ).
  std::optional<double> delta;
  Variant variant = Variant::kComp;
  Scheme scheme = Scheme::kSda;
  double tol = 0.0;
  bool converged = false;
  bool positive_recurrent = true;
  std::vector<std::string> warnings;
};

struct RiccatiSolution {
  Eigen::MatrixXd psi;         // n₊×n₋
  Eigen::MatrixXd psi_hat;     // n₋×n₊
  Eigen::MatrixXd f_infinity;  // n₋×n₋
  Eigen::MatrixXd e_final;     // n₊×n₊
  DoublingParameters params;
  ConvergenceDiagnostics diagnostics;
};

/// Raised when the iteration does not meet the stopping rule in max_iter
/// steps.
class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, ConvergenceDiagnostics diagnostics)
      : NumericError(what), diagnostics_(std::move(diagnostics)) {}

  const ConvergenceDiagnostics& diagnostics() const { return diagnostics_; }

 private:
  ConvergenceDiagnostics diagnostics_;
};

/// Iterates until J ≤ tol·G entrywise, skipping entries with G = 0.
RiccatiSolution solve_riccati(const FluidQueueModel& model,
                              const DoublingParameters& params,
                              const SolveOptions& options = {});

/// Entrywise residual of the Riccati equation
///   Ψ|C₋|⁻¹T₋₊Ψ + C₊⁻¹T₊₊Ψ + Ψ|C₋|⁻¹T₋₋ + C₊⁻¹T₊₋ = 0
/// divided by the sum of the absolute values of the terms.
Eigen::MatrixXd riccati_relative_residual(const FluidQueueModel& model,
                                          const Eigen::MatrixXd& psi);

}  // namespace fluidq
