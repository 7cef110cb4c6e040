#pragma once

#include "seqhom/core_types.hpp"

namespace seqhom {

/// Quantities shared by every evaluation of L^rho at a point.
struct AugmentedEvaluation {
  /// r(x) = G_Y c(x)
  Vector constraint_covector;
  /// Riesz-represented c(x)
  Vector c;
  /// y + rho c(x)
  Vector shifted_multiplier;
  /// phi'(x) + J_r(x)^T (y + rho c(x))
  Vector gradient_covector;
  /// Riesz gradient grad_x L^rho(x, y) = G_X^{-1} gradient_covector
  Vector gradient;
};

AugmentedEvaluation evaluate_augmented(const PrimalDual& z, const ProblemSpec& spec,
                                       double rho);

/// phi(x) + rho/2 ||c(x)||_Y^2
double phi_rho(const Vector& x, const ProblemSpec& spec, double rho);

/// phi^rho(x) + <y, c(x)>_Y
double lagrangian_rho(const PrimalDual& z, const ProblemSpec& spec, double rho);

/// grad_x L^0(x, y + rho c(x)); the rho A^* A part is never formed.
Vector grad_x_L_rho(const PrimalDual& z, const ProblemSpec& spec, double rho);

/// c(x), Riesz-represented.
Vector grad_y_L_rho(const PrimalDual& z, const ProblemSpec& spec);

struct DLdtIdentity {
  /// (L^rho(z+) - L^rho(z)) / h along one forward Euler flow step.
  double lhs_fd = 0.0;
  /// -||P_T(-grad_x L^rho)||_X^2 + ||c(x)||_Y^2
  double rhs = 0.0;
};

DLdtIdentity dLdt_identity(const PrimalDual& z, const ProblemSpec& spec, double rho,
                           double h = 1e-6);

}  // namespace seqhom
