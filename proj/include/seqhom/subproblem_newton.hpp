#pragma once

#include <memory>
#include <vector>

#include "seqhom/aug_lagrangian.hpp"
#include "seqhom/box_geometry.hpp"
#include "seqhom/core_types.hpp"
#include "seqhom/linear_kkt.hpp"

namespace seqhom {

/// Proximal homotopy parameters: lambda = 1 / dt, augmentation rho, and the
/// reference point zhat of the backward Euler step.
struct ProxParams {
  double lambda = 1.0;
  double rho = 0.0;
  PrimalDual zhat;

  double dt() const { return 1.0 / lambda; }
};

/// #mat: system matrices built with a fresh Hessian; #res: residual evaluations.
struct EvalCounters {
  long mat = 0;
  long res = 0;
};

/// The backward Euler system evaluated at one point.
struct SubproblemEvaluation {
  AugmentedEvaluation aug;
  /// s = xhat - grad_x L^rho(z) / lambda (meaningful on the box block).
  Vector projector_argument;
  ActiveSet active;
  /// (lambda [x - P_C(s)], lambda [y - yhat] - c(x)), Riesz form.
  PrimalDual residual;
};

SubproblemEvaluation evaluate_subproblem(const PrimalDual& z, const ProxParams& prox,
                                         const ProblemSpec& spec,
                                         EvalCounters* counters = nullptr);

/// Throws std::invalid_argument for lambda <= 0.
PrimalDual backward_euler_residual(const PrimalDual& z, const ProxParams& prox,
                                   const ProblemSpec& spec);

/// Active iff s_i lies strictly outside [l_i, u_i]; ties count as inactive.
ActiveSet classify_projector_argument(const Vector& s, const ProblemSpec& spec);

/**
 * Semismooth Newton matrix of the scaled backward Euler system in the
 * reformulation that avoids rho A^* A:
 *
 *   [ lambda G_X + H    A^*                          ] [dx ]
 *   [ A                 -(1 + rho lambda)^{-1} lambda G_Y ] [dyt]
 *
 * with H, A evaluated at (x, y + rho c(x)). Rows of free coordinates are in
 * coordinate (G_X-weighted) form, rows of the box block in Riesz form; active
 * box rows are replaced by identity rows pinning x_i to its bound.
 */
struct KKTSystem {
  double lambda = 0.0;
  double rho = 0.0;
  Index n_x = 0;
  Index n_y = 0;
  /// All rows, box rows in their inactive form.
  std::vector<Triplet> base;
  ActiveSet active;
  SparseMatrix matrix;
  std::shared_ptr<const Factorization> factorization;
  FactorizationOptions options;

  Index size() const { return n_x + n_y; }
  /// Rebuilds `matrix` from `base` with `new_active` pinned and refactorizes.
  void apply_active_set(const ActiveSet& new_active);
};

/// Throws SingularMatrixError when the system cannot be factorized
/// (the caller should increase lambda).
KKTSystem assemble_kkt(const PrimalDual& z, const ProxParams& prox,
                       const ProblemSpec& spec, const SubproblemEvaluation& eval,
                       EvalCounters* counters = nullptr,
                       const FactorizationOptions& options = {});

KKTSystem assemble_kkt(const PrimalDual& z, const ProxParams& prox,
                       const ProblemSpec& spec, EvalCounters* counters = nullptr);

/// Right-hand side b of K [dx; dyt] = -b for the evaluation at z.
Vector kkt_rhs(const PrimalDual& z, const ProxParams& prox, const ProblemSpec& spec,
               const SubproblemEvaluation& eval, const ActiveSet& active);

/// dy = (1 + rho lambda)^{-1} (dyt + rho (c(x) - lambda (y - yhat))).
Vector reconstruct_dual_step(const Vector& dyt, const PrimalDual& z,
                             const ProxParams& prox, const Vector& c);

struct NewtonStep {
  PrimalDual z_plus;
  KKTSystem kkt;
  double residual_norm = 0.0;
};

/// One semismooth Newton step from z. lambda = 0 is allowed only for problems
/// without finite bounds.
NewtonStep newton_step(const PrimalDual& z, const ProxParams& prox,
                       const ProblemSpec& spec, EvalCounters* counters = nullptr);

/// One simplified semismooth Newton step from z+, reusing the H and A blocks
/// of `kkt` under the active set guessed at z+.
PrimalDual simplified_newton_step(const PrimalDual& z_plus, KKTSystem& kkt,
                                  const ProxParams& prox, const ProblemSpec& spec,
                                  EvalCounters* counters = nullptr);

/// Phi(z) = (P_C(xhat - dt grad_x L^rho(z)), yhat + dt c(x)).
PrimalDual fixpoint_map(const PrimalDual& z, const ProxParams& prox,
                        const ProblemSpec& spec);

/// phi^rho(x) + lambda [1/2 ||x - xhat||_X^2 + 1/2 ||w - yhat||_Y^2] at
/// w = -dt c(x).
double prox_problem_value(const PrimalDual& z, const ProxParams& prox,
                          const ProblemSpec& spec);

/// w = -dt c(x), the auxiliary variable of the regularized problem.
Vector prox_auxiliary_w(const PrimalDual& z, const ProxParams& prox,
                        const ProblemSpec& spec);

struct NewtonSolveOptions {
  double residual_tolerance = 1e-13;
  double step_tolerance = 1e-15;
  int max_iterations = 100;
};

struct NewtonSolveResult {
  PrimalDual z;
  bool converged = false;
  int iterations = 0;
  double residual_norm = 0.0;
};

/// Full semismooth Newton iteration on one backward Euler subproblem.
/// Stops when ||F(z)||_Z <= residual_tolerance or the step is below
/// step_tolerance * max(1, ||z||_Z).
NewtonSolveResult newton_solve(const PrimalDual& z0, const ProxParams& prox,
                               const ProblemSpec& spec,
                               const NewtonSolveOptions& options = {},
                               EvalCounters* counters = nullptr);

}  // namespace seqhom
