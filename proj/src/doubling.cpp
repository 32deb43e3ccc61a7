#include "fluidq/doubling.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "detail/return_generators.hpp"
#include "fluidq/gth.hpp"

namespace fluidq {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Applies (I − XY)⁻¹ to nonnegative right-hand sides. For COMP the caller
// supplies w = (I − XY)·1 computed from the stochastic structure.
class ComplementSolver {
 public:
  ComplementSolver(const MatrixXd& x, const MatrixXd& y, const VectorXd& w,
                   Variant variant)
      : variant_(variant) {
    const MatrixXd xy = x * y;
    const int m = static_cast<int>(xy.rows());
    if (variant == Variant::kGlx) {
      lu_.compute(MatrixXd::Identity(m, m) - xy);
      return;
    }
    VectorXd certificate = w;
    if (variant == Variant::kXxl) {
      certificate = (VectorXd::Ones(m) - xy.rowwise().sum()).cwiseMax(0.0);
    }
    factors_ = gth_factor(TripletRepresentation::from_offdiag(
        -xy, VectorXd::Ones(m), certificate));
  }

  MatrixXd solve(const MatrixXd& b) const {
    if (variant_ == Variant::kGlx) return lu_.solve(b);
    return gth_solve_columns(factors_, b);
  }

 private:
  Variant variant_;
  GthFactors factors_;
  Eigen::PartialPivLU<MatrixXd> lu_;
};

void require_finite(const DoublingState& s) {
  if (!s.e.allFinite() || !s.f.allFinite() || !s.g.allFinite() ||
      !s.h.allFinite()) {
    throw NumericError("doubling: non-finite value at step " +
                       std::to_string(s.k));
  }
}

double max_increment_ratio(const MatrixXd& j, const MatrixXd& g) {
  double r = 0.0;
  for (Eigen::Index a = 0; a < g.rows(); ++a) {
    for (Eigen::Index b = 0; b < g.cols(); ++b) {
      if (g(a, b) > 0.0) r = std::max(r, j(a, b) / g(a, b));
    }
  }
  return r;
}

// Perron value of −K by inverse iteration with the GTH factors of −K.
std::optional<double> perron_value_neg_k(const FluidQueueModel& model,
                                         const VectorXd& xi,
                                         const RiccatiSolution& sol,
                                         std::vector<std::string>& warnings) {
  try {
    const GthFactors f = gth_factor(
        detail::neg_k_triplet(model, xi, sol.psi, sol.f_infinity));
    if (f.singular) {
      warnings.emplace_back("lambda: -K is singular");
      return std::nullopt;
    }
    const int m = model.n_plus();
    VectorXd x = VectorXd::Constant(m, 1.0 / m);
    double mu_prev = 0.0;
    for (int it = 0; it < 200; ++it) {
      const VectorXd y = gth_solve(f, x);
      const double mu = y.sum();
      if (!(mu > 0.0) || !std::isfinite(mu)) break;
      x = y / mu;
      if (std::abs(mu - mu_prev) <= 1e-10 * mu) return 1.0 / mu;
      mu_prev = mu;
    }
    warnings.emplace_back("lambda: inverse iteration did not converge");
  } catch (const NumericError& e) {
    warnings.emplace_back(std::string("lambda: ") + e.what());
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::kComp:
      return "comp";
    case Variant::kXxl:
      return "xxl";
    case Variant::kGlx:
      return "glx";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "comp") return Variant::kComp;
  if (name == "xxl") return Variant::kXxl;
  if (name == "glx") return Variant::kGlx;
  throw ModelError("unknown variant '" + std::string(name) + "'");
}

InitialPencil initial_pencil(const FluidQueueModel& model,
                             const DoublingParameters& params) {
  validate_parameters(params);
  const int n = model.n();
  const int np = model.n_plus();
  const double alpha = params.alpha;
  const double beta = params.beta;
  const MatrixXd& t = model.t_offdiag();
  const VectorXd c = model.abs_rates();
  const VectorXd& exit = model.exit_rates();

  InitialPencil p;
  p.q = MatrixXd::Zero(n, n);
  p.r = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const bool up_i = i < np;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool up_j = j < np;
      // Q takes α on the first block column and β on the second; R the
      // other way round.
      const double q_scale = up_j ? alpha : beta;
      const double r_scale = up_j ? beta : alpha;
      p.q(i, j) = -q_scale * t(i, j);
      p.r(i, j) = r_scale * t(i, j);
    }
    const double q_scale = up_i ? alpha : beta;
    const double r_scale = up_i ? beta : alpha;
    p.q(i, i) = c(i) + q_scale * exit(i);
    if (params.subtraction_free) {
      // c_i − σ|T_ii| = σ c_i Σ_{k≠i} |T_kk|/c_k over the same phase class.
      double s = 0.0;
      for (int k = 0; k < n; ++k) {
        if (k == i || (k < np) != up_i) continue;
        for (int j = 0; j < n; ++j) {
          if (j != k) s += t(k, j) / c(k);
        }
      }
      p.r(i, i) = r_scale * c(i) * s;
    } else {
      // Rounding can leave a tiny negative value when σ = σ_opt.
      p.r(i, i) = std::max(0.0, c(i) - r_scale * exit(i));
    }
  }
  p.gamma = 0.5 / p.q.diagonal().maxCoeff();
  return p;
}

MatrixXd assemble(const DoublingState& s) {
  const int np = s.n_plus();
  const int nm = s.n_minus();
  MatrixXd p(np + nm, np + nm);
  p.topLeftCorner(np, np) = s.e;
  p.topRightCorner(np, nm) = s.g;
  p.bottomLeftCorner(nm, np) = s.h;
  p.bottomRightCorner(nm, nm) = s.f;
  return p;
}

DoublingState split(const MatrixXd& p, int n_plus, int k) {
  const int n = static_cast<int>(p.rows());
  const int nm = n - n_plus;
  DoublingState s;
  s.e = p.topLeftCorner(n_plus, n_plus);
  s.g = p.topRightCorner(n_plus, nm);
  s.h = p.bottomLeftCorner(nm, n_plus);
  s.f = p.bottomRightCorner(nm, nm);
  s.k = k;
  s.last_increment = MatrixXd::Zero(n_plus, nm);
  s.last_increment_h = MatrixXd::Zero(nm, n_plus);
  return s;
}

DoublingState initialize(const FluidQueueModel& model,
                         const DoublingParameters& params, Variant variant) {
  const InitialPencil pencil = initial_pencil(model, params);
  const int n = model.n();
  MatrixXd p0;
  if (variant == Variant::kComp) {
    // Q·1 = R·1 always; it equals |C|·1 only for α = β.
    const VectorXd w = params.alpha == params.beta
                           ? VectorXd(model.abs_rates())
                           : VectorXd(pencil.r.rowwise().sum());
    const GthFactors f = gth_factor(
        TripletRepresentation::from_offdiag(pencil.q, VectorXd::Ones(n), w));
    p0 = gth_solve_columns(f, pencil.r);
  } else {
    p0 = pencil.q.partialPivLu().solve(pencil.r);
  }
  DoublingState s = split(p0, model.n_plus());
  require_finite(s);
  return s;
}

DoublingState doubling_step(const DoublingState& s, Variant variant) {
  const int np = s.n_plus();
  const int nm = s.n_minus();
  const MatrixXd& e = s.e;
  const MatrixXd& f = s.f;
  const MatrixXd& g = s.g;
  const MatrixXd& h = s.h;

  DoublingState next;
  next.k = s.k + 1;
  if (np == nm) {
    const ComplementSolver gh(g, h, g * f.rowwise().sum() + e.rowwise().sum(),
                              variant);
    const ComplementSolver hg(h, g, h * e.rowwise().sum() + f.rowwise().sum(),
                              variant);
    MatrixXd rhs_g(np, np + nm);
    rhs_g << e, g * f;
    const MatrixXd x1 = gh.solve(rhs_g);
    MatrixXd rhs_h(nm, nm + np);
    rhs_h << f, h * e;
    const MatrixXd x2 = hg.solve(rhs_h);
    next.e = e * x1.leftCols(np);
    next.last_increment = e * x1.rightCols(nm);
    next.f = f * x2.leftCols(nm);
    next.last_increment_h = f * x2.rightCols(np);
  } else if (np < nm) {
    // (I − HG)⁻¹ = I + H(I − GH)⁻¹G.
    const ComplementSolver gh(g, h, g * f.rowwise().sum() + e.rowwise().sum(),
                              variant);
    MatrixXd rhs(np, np + nm);
    rhs << e, g;
    const MatrixXd x = gh.solve(rhs);
    const MatrixXd xe = x.leftCols(np);
    const MatrixXd y = x.rightCols(nm);
    const MatrixXd fh = f * h;
    next.e = e * xe;
    next.last_increment = (e * y) * f;
    next.f = f * f + fh * (y * f);
    next.last_increment_h = fh * xe;
  } else {
    // (I − GH)⁻¹ = I + G(I − HG)⁻¹H.
    const ComplementSolver hg(h, g, h * e.rowwise().sum() + f.rowwise().sum(),
                              variant);
    MatrixXd rhs(nm, nm + np);
    rhs << f, h;
    const MatrixXd z = hg.solve(rhs);
    const MatrixXd zf = z.leftCols(nm);
    const MatrixXd zh = z.rightCols(np);
    const MatrixXd eg = e * g;
    next.f = f * zf;
    next.last_increment_h = (f * zh) * e;
    next.e = e * e + eg * (zh * e);
    next.last_increment = eg * zf;
  }
  next.g = g + next.last_increment;
  next.h = h + next.last_increment_h;
  require_finite(next);
  return next;
}

RiccatiSolution solve_riccati(const FluidQueueModel& model,
                              const DoublingParameters& params,
                              const SolveOptions& options) {
  validate_parameters(params);
  const double tol = options.tol.value_or(model.n() * kMachinePrecision);
  if (!(tol > 0.0)) throw ModelError("tol must be positive");
  if (options.max_iter < 1) throw ModelError("max_iter must be at least 1");

  ConvergenceDiagnostics diag;
  diag.variant = options.variant;
  diag.scheme = params.scheme;
  diag.tol = tol;
  const PhaseDistribution phase = stationary_phase_distribution(model);
  diag.positive_recurrent = phase.positive_recurrent();
  if (!diag.positive_recurrent) {
    diag.warnings.emplace_back(
        "model is not positive recurrent (drift >= 0); convergence "
        "properties are not guaranteed");
  }

  DoublingState state = initialize(model, params, options.variant);
  while (state.k < options.max_iter) {
    state = doubling_step(state, options.variant);
    const double r = max_increment_ratio(state.last_increment, state.g);
    diag.increment_ratios.push_back(r);
    if (r <= tol) {
      diag.converged = true;
      break;
    }
  }
  diag.iterations = state.k;
  if (!diag.converged) {
    throw ConvergenceError("doubling did not converge in " +
                               std::to_string(options.max_iter) +
                               " iterations",
                           diag);
  }

  RiccatiSolution sol;
  sol.psi = state.g;
  sol.psi_hat = state.h;
  sol.f_infinity = state.f;
  sol.e_final = state.e;
  sol.params = params;
  if (diag.positive_recurrent) {
    diag.lambda = perron_value_neg_k(model, phase.xi, sol, diag.warnings);
    if (diag.lambda) {
      const double l = *diag.lambda;
      diag.delta = (1.0 - params.beta * l) / (1.0 + params.alpha * l);
    }
  }
  sol.diagnostics = std::move(diag);
  return sol;
}

MatrixXd riccati_relative_residual(const FluidQueueModel& model,
                                   const MatrixXd& psi) {
  const int np = model.n_plus();
  const int nm = model.n_minus();
  const MatrixXd t = model.generator();
  const VectorXd c = model.abs_rates();
  const VectorXd cp_inv = c.head(np).cwiseInverse();
  const VectorXd cm_inv = c.tail(nm).cwiseInverse();
  const MatrixXd a_pp = cp_inv.asDiagonal() * t.topLeftCorner(np, np);
  const MatrixXd a_pm = cp_inv.asDiagonal() * t.topRightCorner(np, nm);
  const MatrixXd a_mp = cm_inv.asDiagonal() * t.bottomLeftCorner(nm, np);
  const MatrixXd a_mm = cm_inv.asDiagonal() * t.bottomRightCorner(nm, nm);

  const MatrixXd t1 = psi * a_mp * psi;
  const MatrixXd t2 = a_pp * psi;
  const MatrixXd t3 = psi * a_mm;
  const MatrixXd sum = t1 + t2 + t3 + a_pm;
  const MatrixXd scale = t1 + a_pp.cwiseAbs() * psi.cwiseAbs() +
                         psi.cwiseAbs() * a_mm.cwiseAbs() + a_pm;
  MatrixXd rel = MatrixXd::Zero(np, nm);
  for (int i = 0; i < np; ++i) {
    for (int j = 0; j < nm; ++j) {
      if (scale(i, j) > 0.0) rel(i, j) = std::abs(sum(i, j)) / scale(i, j);
    }
  }
  return rel;
}

}  // namespace fluidq
