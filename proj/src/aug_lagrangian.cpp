#include "seqhom/aug_lagrangian.hpp"

#include <stdexcept>

#include "seqhom/box_geometry.hpp"
#include "seqhom/flow_sim.hpp"

namespace seqhom {

AugmentedEvaluation evaluate_augmented(const PrimalDual& z, const ProblemSpec& spec,
                                       double rho) {
  check_dimensions(z, spec);
  AugmentedEvaluation e;
  e.constraint_covector = spec.constraint(z.x);
  e.c = spec.metric_y.solve(e.constraint_covector);
  e.shifted_multiplier = z.y + rho * e.c;
  e.gradient_covector = spec.objective_gradient(z.x) +
                        spec.constraint_jacobian(z.x).transpose() * e.shifted_multiplier;
  e.gradient = spec.metric_x.solve(e.gradient_covector);
  return e;
}

double phi_rho(const Vector& x, const ProblemSpec& spec, double rho) {
  if (x.size() != spec.n_x) throw DimensionError("phi_rho: size mismatch");
  const Vector r = spec.constraint(x);
  const Vector c = spec.metric_y.solve(r);
  return spec.objective(x) + 0.5 * rho * c.dot(r);
}

double lagrangian_rho(const PrimalDual& z, const ProblemSpec& spec, double rho) {
  check_dimensions(z, spec);
  const Vector r = spec.constraint(z.x);
  const Vector c = spec.metric_y.solve(r);
  return spec.objective(z.x) + 0.5 * rho * c.dot(r) + z.y.dot(r);
}

Vector grad_x_L_rho(const PrimalDual& z, const ProblemSpec& spec, double rho) {
  return evaluate_augmented(z, spec, rho).gradient;
}

Vector grad_y_L_rho(const PrimalDual& z, const ProblemSpec& spec) {
  check_dimensions(z, spec);
  return constraint_value(spec, z.x);
}

DLdtIdentity dLdt_identity(const PrimalDual& z, const ProblemSpec& spec, double rho,
                           double h) {
  if (!(h > 0.0)) throw std::invalid_argument("dLdt_identity: h must be positive");
  const AugmentedEvaluation e = evaluate_augmented(z, spec, rho);
  const Vector xc = project_box(z.x, spec);
  const Vector t = project_tangent_cone(-e.gradient, xc, spec);
  DLdtIdentity out;
  out.rhs = -spec.metric_x.squared_norm(t) + e.c.dot(e.constraint_covector);
  const PrimalDual next = forward_euler_step(z, h, spec, rho);
  out.lhs_fd = (lagrangian_rho(next, spec, rho) - lagrangian_rho(z, spec, rho)) / h;
  return out;
}

}  // namespace seqhom
