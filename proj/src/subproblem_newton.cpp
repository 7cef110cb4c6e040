#include "seqhom/subproblem_newton.hpp"

#include <cmath>
#include <stdexcept>

namespace seqhom {

namespace {

void require_positive_lambda(const ProxParams& prox, const char* who) {
  if (!(prox.lambda > 0.0)) {
    throw std::invalid_argument(std::string(who) + ": lambda must be positive");
  }
}

void check_prox(const ProxParams& prox, const ProblemSpec& spec) {
  if (!(prox.lambda >= 0.0) || !(prox.rho >= 0.0)) {
    throw std::invalid_argument("prox parameters must be nonnegative");
  }
  check_dimensions(prox.zhat, spec);
}

bool uses_riesz_box_rows(const ProblemSpec& spec) {
  return spec.box.size > 0 && static_cast<bool>(spec.box_riesz_jacobian);
}

}  // namespace

ActiveSet classify_projector_argument(const Vector& s, const ProblemSpec& spec) {
  ActiveSet set;
  set.status.assign(static_cast<std::size_t>(spec.n_x), BoundStatus::inactive);
  for (Index i = spec.box.offset; i < spec.box.offset + spec.box.size; ++i) {
    if (s[i] < spec.lower[i]) {
      set.status[static_cast<std::size_t>(i)] = BoundStatus::at_lower;
    } else if (s[i] > spec.upper[i]) {
      set.status[static_cast<std::size_t>(i)] = BoundStatus::at_upper;
    }
  }
  return set;
}

SubproblemEvaluation evaluate_subproblem(const PrimalDual& z, const ProxParams& prox,
                                         const ProblemSpec& spec,
                                         EvalCounters* counters) {
  check_prox(prox, spec);
  check_dimensions(z, spec);
  if (prox.lambda == 0.0 && spec.has_finite_bounds()) {
    throw std::invalid_argument(
        "lambda = 0 is only admissible for problems without finite bounds");
  }
  if (counters) ++counters->res;
  SubproblemEvaluation ev;
  ev.aug = evaluate_augmented(z, spec, prox.rho);
  const double lambda = prox.lambda;

  ev.residual.x = lambda * (z.x - prox.zhat.x) + ev.aug.gradient;
  ev.residual.y = lambda * (z.y - prox.zhat.y) - ev.aug.c;
  if (lambda > 0.0) {
    ev.projector_argument = prox.zhat.x - ev.aug.gradient / lambda;
    ev.active = classify_projector_argument(ev.projector_argument, spec);
    const Vector projected = project_box(ev.projector_argument, spec);
    for (Index i = spec.box.offset; i < spec.box.offset + spec.box.size; ++i) {
      ev.residual.x[i] = lambda * (z.x[i] - projected[i]);
    }
  } else {
    ev.projector_argument = Vector::Constant(spec.n_x, std::nan(""));
    ev.active.status.assign(static_cast<std::size_t>(spec.n_x), BoundStatus::inactive);
  }
  return ev;
}

PrimalDual backward_euler_residual(const PrimalDual& z, const ProxParams& prox,
                                   const ProblemSpec& spec) {
  require_positive_lambda(prox, "backward_euler_residual");
  return evaluate_subproblem(z, prox, spec).residual;
}

void KKTSystem::apply_active_set(const ActiveSet& new_active) {
  std::vector<Triplet> entries;
  entries.reserve(base.size() + static_cast<std::size_t>(n_x));
  for (const Triplet& t : base) {
    const auto row = static_cast<std::size_t>(t.row());
    if (t.row() < n_x && new_active.status[row] != BoundStatus::inactive) continue;
    entries.push_back(t);
  }
  for (Index i = 0; i < n_x; ++i) {
    if (new_active.status[static_cast<std::size_t>(i)] != BoundStatus::inactive) {
      entries.emplace_back(i, i, 1.0);
    }
  }
  SparseMatrix m(size(), size());
  m.setFromTriplets(entries.begin(), entries.end());
  m.makeCompressed();
  factorization = std::make_shared<const Factorization>(factorize(m, options));
  matrix = std::move(m);
  active = new_active;
}

KKTSystem assemble_kkt(const PrimalDual& z, const ProxParams& prox,
                       const ProblemSpec& spec, const SubproblemEvaluation& eval,
                       EvalCounters* counters, const FactorizationOptions& options) {
  if (counters) ++counters->mat;
  const double lambda = prox.lambda;
  const double rho = prox.rho;
  const Index nx = spec.n_x;
  const Index ny = spec.n_y;
  const bool riesz_rows = uses_riesz_box_rows(spec);
  auto is_riesz_row = [&](Index i) { return riesz_rows && spec.box.contains(i); };

  const SparseMatrix hess = spec.lagrangian_hessian(z.x, eval.aug.shifted_multiplier);
  const SparseMatrix jac = spec.constraint_jacobian(z.x);

  KKTSystem kkt;
  kkt.lambda = lambda;
  kkt.rho = rho;
  kkt.n_x = nx;
  kkt.n_y = ny;
  kkt.options = options;
  auto& base = kkt.base;
  base.reserve(static_cast<std::size_t>(hess.nonZeros() + 2 * jac.nonZeros() + nx + ny));

  // Primal rows in coordinate form: lambda G_X + W and J_r^T.
  if (lambda != 0.0) {
    const SparseMatrix gx = spec.metric_x.gram();
    for (Index k = 0; k < gx.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(gx, k); it; ++it) {
        if (!is_riesz_row(it.row())) base.emplace_back(it.row(), it.col(), lambda * it.value());
      }
    }
  }
  for (Index k = 0; k < hess.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(hess, k); it; ++it) {
      if (!is_riesz_row(it.row())) base.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (Index k = 0; k < jac.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(jac, k); it; ++it) {
      // J_r(j, i) appears at (i, nx + j) in the primal rows and at (nx + j, i)
      // in the dual rows.
      if (!is_riesz_row(it.col())) base.emplace_back(it.col(), nx + it.row(), it.value());
      base.emplace_back(nx + it.row(), it.col(), it.value());
    }
  }
  // Box rows in Riesz form: lambda I + G_X^{-1} [W | J_r^T] restricted to the box.
  if (riesz_rows) {
    const SparseMatrix riesz = spec.box_riesz_jacobian(z.x, eval.aug.shifted_multiplier);
    if (riesz.rows() != spec.box.size || riesz.cols() != nx + ny) {
      throw DimensionError("box_riesz_jacobian has the wrong shape");
    }
    for (Index k = 0; k < riesz.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(riesz, k); it; ++it) {
        base.emplace_back(spec.box.offset + it.row(), it.col(), it.value());
      }
    }
    if (lambda != 0.0) {
      for (Index b = 0; b < spec.box.size; ++b) {
        base.emplace_back(spec.box.offset + b, spec.box.offset + b, lambda);
      }
    }
  }
  // Dual block -(1 + rho lambda)^{-1} lambda G_Y.
  if (lambda != 0.0 && ny > 0) {
    const double scale = -lambda / (1.0 + rho * lambda);
    const SparseMatrix gy = spec.metric_y.gram();
    for (Index k = 0; k < gy.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(gy, k); it; ++it) {
        base.emplace_back(nx + it.row(), nx + it.col(), scale * it.value());
      }
    }
  }
  kkt.apply_active_set(eval.active);
  return kkt;
}

KKTSystem assemble_kkt(const PrimalDual& z, const ProxParams& prox,
                       const ProblemSpec& spec, EvalCounters* counters) {
  const SubproblemEvaluation eval = evaluate_subproblem(z, prox, spec, counters);
  return assemble_kkt(z, prox, spec, eval, counters);
}

Vector kkt_rhs(const PrimalDual& z, const ProxParams& prox, const ProblemSpec& spec,
               const SubproblemEvaluation& eval, const ActiveSet& active) {
  const Index nx = spec.n_x;
  const double lambda = prox.lambda;
  const double rho = prox.rho;
  const bool riesz_rows = uses_riesz_box_rows(spec);
  Vector b(nx + spec.n_y);

  Vector primal = eval.aug.gradient_covector;
  if (lambda != 0.0) primal += lambda * spec.metric_x.apply(z.x - prox.zhat.x);
  b.head(nx) = primal;
  for (Index i = spec.box.offset; i < spec.box.offset + spec.box.size; ++i) {
    switch (active.status[static_cast<std::size_t>(i)]) {
      case BoundStatus::at_lower:
        b[i] = z.x[i] - spec.lower[i];
        break;
      case BoundStatus::at_upper:
        b[i] = z.x[i] - spec.upper[i];
        break;
      case BoundStatus::inactive:
        if (riesz_rows) b[i] = eval.aug.gradient[i] + lambda * (z.x[i] - prox.zhat.x[i]);
        break;
    }
  }
  Vector dual = eval.aug.constraint_covector;
  if (lambda != 0.0) dual -= lambda * spec.metric_y.apply(z.y - prox.zhat.y);
  b.tail(spec.n_y) = dual / (1.0 + rho * lambda);
  return b;
}

Vector reconstruct_dual_step(const Vector& dyt, const PrimalDual& z,
                             const ProxParams& prox, const Vector& c) {
  const double lambda = prox.lambda;
  return (dyt + prox.rho * (c - lambda * (z.y - prox.zhat.y))) /
         (1.0 + prox.rho * lambda);
}

namespace {

PrimalDual solve_and_reconstruct(const KKTSystem& kkt, const PrimalDual& z,
                                 const ProxParams& prox, const ProblemSpec& spec,
                                 const SubproblemEvaluation& eval) {
  const Vector b = kkt_rhs(z, prox, spec, eval, kkt.active);
  const Vector delta = kkt.factorization->solve(-b);
  const Vector dx = delta.head(spec.n_x);
  const Vector dy = reconstruct_dual_step(delta.tail(spec.n_y), z, prox, eval.aug.c);
  return {z.x + dx, z.y + dy};
}

}  // namespace

NewtonStep newton_step(const PrimalDual& z, const ProxParams& prox,
                       const ProblemSpec& spec, EvalCounters* counters) {
  const SubproblemEvaluation eval = evaluate_subproblem(z, prox, spec, counters);
  NewtonStep step{PrimalDual{}, assemble_kkt(z, prox, spec, eval, counters),
                  z_norm(eval.residual, spec)};
  step.z_plus = solve_and_reconstruct(step.kkt, z, prox, spec, eval);
  return step;
}

PrimalDual simplified_newton_step(const PrimalDual& z_plus, KKTSystem& kkt,
                                  const ProxParams& prox, const ProblemSpec& spec,
                                  EvalCounters* counters) {
  if (kkt.lambda != prox.lambda || kkt.rho != prox.rho) {
    throw std::invalid_argument("simplified_newton_step: system built for other parameters");
  }
  const SubproblemEvaluation eval = evaluate_subproblem(z_plus, prox, spec, counters);
  if (!(eval.active == kkt.active)) kkt.apply_active_set(eval.active);
  return solve_and_reconstruct(kkt, z_plus, prox, spec, eval);
}

PrimalDual fixpoint_map(const PrimalDual& z, const ProxParams& prox,
                        const ProblemSpec& spec) {
  require_positive_lambda(prox, "fixpoint_map");
  check_prox(prox, spec);
  const AugmentedEvaluation e = evaluate_augmented(z, spec, prox.rho);
  const double dt = prox.dt();
  return {project_box(prox.zhat.x - dt * e.gradient, spec), prox.zhat.y + dt * e.c};
}

Vector prox_auxiliary_w(const PrimalDual& z, const ProxParams& prox,
                        const ProblemSpec& spec) {
  require_positive_lambda(prox, "prox_auxiliary_w");
  return -prox.dt() * constraint_value(spec, z.x);
}

double prox_problem_value(const PrimalDual& z, const ProxParams& prox,
                          const ProblemSpec& spec) {
  require_positive_lambda(prox, "prox_problem_value");
  check_prox(prox, spec);
  const Vector w = prox_auxiliary_w(z, prox, spec);
  return phi_rho(z.x, spec, prox.rho) +
         prox.lambda * (0.5 * spec.metric_x.squared_norm(z.x - prox.zhat.x) +
                        0.5 * spec.metric_y.squared_norm(w - prox.zhat.y));
}

NewtonSolveResult newton_solve(const PrimalDual& z0, const ProxParams& prox,
                               const ProblemSpec& spec, const NewtonSolveOptions& options,
                               EvalCounters* counters) {
  NewtonSolveResult result;
  result.z = z0;
  for (int it = 0; it < options.max_iterations; ++it) {
    NewtonStep step = newton_step(result.z, prox, spec, counters);
    result.residual_norm = step.residual_norm;
    if (step.residual_norm <= options.residual_tolerance) {
      result.converged = true;
      return result;
    }
    const double step_norm = z_norm(step.z_plus - result.z, spec);
    result.z = std::move(step.z_plus);
    result.iterations = it + 1;
    if (!result.z.all_finite()) return result;
    if (step_norm <= options.step_tolerance * std::max(1.0, z_norm(result.z, spec))) {
      result.residual_norm = z_norm(evaluate_subproblem(result.z, prox, spec, counters).residual, spec);
      result.converged = true;
      return result;
    }
  }
  result.residual_norm =
      z_norm(evaluate_subproblem(result.z, prox, spec, counters).residual, spec);
  result.converged = result.residual_norm <= options.residual_tolerance;
  return result;
}

}  // namespace seqhom
