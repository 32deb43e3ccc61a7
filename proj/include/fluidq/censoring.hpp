#pragma once

#include <optional>

#include <Eigen/Dense>

#include "fluidq/doubling.hpp"
#include "fluidq/model.hpp"

namespace fluidq {

/// Dense reference constructions used to cross-check the doubling map.
/// The Schur complements are formed by LU at 50 significant digits (MPFR)
/// and rounded once at the end.

/// The 2^k n × 2^k n block-circulant matrix with A₌ = [0 G; H 0] on the
/// diagonal, A₊ = [E 0; 0 0] one block to the right and A₋ = [0 0; 0 F] one
/// block to the left (indices modulo 2^k).
Eigen::MatrixXd blown_up_matrix(const Eigen::MatrixXd& p, int n_plus, int k);

/// P₂₂ + P₂₁(I − P₁₁)⁻¹P₁₂ where P₁₁ is the leading `top` × `top` block.
Eigen::MatrixXd censor_top(const Eigen::MatrixXd& p, int top);

/// The doubling map applied k times to the stochastic matrix P, obtained by
/// censoring the top (2^k − 1)n states of blown_up_matrix(P, n_plus, k).
Eigen::MatrixXd censored_reference_step(const Eigen::MatrixXd& p, int n_plus,
                                        int k);

/// S = [I − γQ, γR; I, 0].
Eigen::MatrixXd censoring_chain(const InitialPencil& pencil, double gamma);

/// P₀ obtained by censoring the first n states of S. `gamma` defaults to the
/// pencil's (2 max Q_ii)⁻¹ and must not exceed (max Q_ii)⁻¹.
Eigen::MatrixXd initial_censoring_reference(
    const FluidQueueModel& model, const DoublingParameters& params,
    std::optional<double> gamma = std::nullopt);

}  // namespace fluidq
