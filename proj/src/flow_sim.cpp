#include "seqhom/flow_sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "seqhom/aug_lagrangian.hpp"
#include "seqhom/box_geometry.hpp"

namespace seqhom {

PrimalDual forward_euler_step(const PrimalDual& z, double h, const ProblemSpec& spec,
                              double rho) {
  if (!(h > 0.0)) throw std::invalid_argument("forward_euler_step: h must be positive");
  const AugmentedEvaluation e = evaluate_augmented(z, spec, rho);
  return {project_box(z.x - h * e.gradient, spec), z.y + h * e.c};
}

double FlowTrajectory::max_norm_c() const {
  return norm_c.empty() ? 0.0 : *std::max_element(norm_c.begin(), norm_c.end());
}

namespace {

struct Monitors {
  double lagrangian;
  double half_c2;
  double c2;
  double stationarity;
};

Monitors evaluate_monitors(const PrimalDual& z, const ProblemSpec& spec, double rho) {
  const AugmentedEvaluation e = evaluate_augmented(z, spec, rho);
  Monitors m;
  m.c2 = e.c.dot(e.constraint_covector);
  m.half_c2 = 0.5 * m.c2;
  m.lagrangian = spec.objective(z.x) + rho * m.half_c2 + z.y.dot(e.constraint_covector);
  const Vector xc = project_box(z.x, spec);
  m.stationarity = spec.metric_x.norm(project_tangent_cone(-e.gradient, xc, spec));
  return m;
}

void ensure_finite(const PrimalDual& z, double t) {
  if (!z.all_finite()) {
    std::ostringstream os;
    os << "flow diverged: non-finite state at t = " << t;
    throw FlowDivergedError(os.str(), t);
  }
}

}  // namespace

FlowTrajectory integrate_flow(const PrimalDual& z0, const ProblemSpec& spec,
                              const FlowOptions& options) {
  check_dimensions(z0, spec);
  if (!(options.h > 0.0) || !(options.t_final >= 0.0) || options.sample_stride < 1) {
    throw std::invalid_argument("integrate_flow: invalid step, horizon or stride");
  }
  if (!in_box(z0.x, spec)) {
    throw std::domain_error("integrate_flow: initial point outside C");
  }
  const auto n_steps = static_cast<long>(std::ceil(options.t_final / options.h - 1e-9));

  FlowTrajectory traj;
  traj.steps = n_steps;
  PrimalDual z = z0;
  Monitors current = evaluate_monitors(z, spec, options.rho);

  auto record = [&](double t, const PrimalDual& state, const Monitors& m, double dL,
                    double dhalf_c2) {
    traj.times.push_back(t);
    traj.states.push_back(state);
    traj.lagrangian.push_back(m.lagrangian);
    traj.norm_c.push_back(std::sqrt(std::max(0.0, m.c2)));
    traj.stationarity.push_back(m.stationarity);
    traj.slack_L.push_back(-dL);
    traj.slack_c.push_back(-dL - options.gamma2 * m.c2 - options.gamma1 * dhalf_c2);
    traj.slack_gronwall.push_back(
        options.gamma3 ? -*options.gamma3 * m.c2 - dhalf_c2 : 0.0);
  };

  double dL = 0.0;
  double dhalf = 0.0;
  for (long k = 0; k < n_steps; ++k) {
    const double t = static_cast<double>(k) * options.h;
    PrimalDual next = forward_euler_step(z, options.h, spec, options.rho);
    ensure_finite(next, t + options.h);
    const Monitors m_next = evaluate_monitors(next, spec, options.rho);
    dL = (m_next.lagrangian - current.lagrangian) / options.h;
    dhalf = (m_next.half_c2 - current.half_c2) / options.h;
    if (-dL < 0.0) ++traj.violations_L;
    if (-dL - options.gamma2 * current.c2 - options.gamma1 * dhalf < 0.0) {
      ++traj.violations_c;
    }
    if (options.gamma3 && -*options.gamma3 * current.c2 - dhalf < 0.0) {
      ++traj.violations_gronwall;
    }
    if (k % options.sample_stride == 0) record(t, z, current, dL, dhalf);
    z = std::move(next);
    current = m_next;
  }
  // Terminal state reuses the last difference quotient.
  record(static_cast<double>(n_steps) * options.h, z, current, dL, dhalf);
  return traj;
}

FlowTrajectory integrate_flow(const PrimalDual& z0, double h, double t_final,
                              const ProblemSpec& spec, double rho, double gamma1,
                              double gamma2) {
  FlowOptions options;
  options.h = h;
  options.t_final = t_final;
  options.rho = rho;
  options.gamma1 = gamma1;
  options.gamma2 = gamma2;
  return integrate_flow(z0, spec, options);
}

void write_trajectory_csv(std::ostream& os, const FlowTrajectory& trajectory) {
  const Index nx = trajectory.states.empty() ? 0 : trajectory.states.front().x.size();
  const Index ny = trajectory.states.empty() ? 0 : trajectory.states.front().y.size();
  os << "t";
  for (Index i = 0; i < nx; ++i) os << ",x" << i + 1;
  for (Index i = 0; i < ny; ++i) os << ",y" << i + 1;
  os << ",L_rho,norm_c,stat_res,slack_L,slack_c\n";
  os << std::setprecision(17);
  for (std::size_t k = 0; k < trajectory.times.size(); ++k) {
    os << trajectory.times[k];
    for (Index i = 0; i < nx; ++i) os << ',' << trajectory.states[k].x[i];
    for (Index i = 0; i < ny; ++i) os << ',' << trajectory.states[k].y[i];
    os << ',' << trajectory.lagrangian[k] << ',' << trajectory.norm_c[k] << ','
       << trajectory.stationarity[k] << ',' << trajectory.slack_L[k] << ','
       << trajectory.slack_c[k] << '\n';
  }
}

std::pair<std::complex<double>, std::complex<double>> linearized_spectrum_scalar(
    double rho) {
  if (!(rho >= 0.0)) throw std::invalid_argument("rho must be nonnegative");
  const std::complex<double> root = std::sqrt(std::complex<double>((rho + 1.0) * (rho - 3.0)));
  const double shift = 1.0 - rho;
  return {0.5 * (root + shift), 0.5 * (-root + shift)};
}

namespace {

void require_identity_metrics(const ProblemSpec& spec, const char* who) {
  if (!spec.metric_x.is_identity() || !spec.metric_y.is_identity()) {
    throw std::invalid_argument(std::string(who) + ": identity metrics required");
  }
}

}  // namespace

DenseMatrix primal_dual_hessian(const PrimalDual& z, const ProblemSpec& spec,
                                double rho) {
  require_identity_metrics(spec, "primal_dual_hessian");
  check_dimensions(z, spec);
  const Vector c = spec.constraint(z.x);
  const Vector yt = z.y + rho * c;
  const DenseMatrix jac = DenseMatrix(spec.constraint_jacobian(z.x));
  const Index n = spec.n_x + spec.n_y;
  DenseMatrix hess = DenseMatrix::Zero(n, n);
  hess.topLeftCorner(spec.n_x, spec.n_x) =
      DenseMatrix(spec.lagrangian_hessian(z.x, yt)) + rho * jac.transpose() * jac;
  hess.topRightCorner(spec.n_x, spec.n_y) = jac.transpose();
  hess.bottomLeftCorner(spec.n_y, spec.n_x) = jac;
  return hess;
}

DenseMatrix linearized_flow_matrix(const PrimalDual& z, const ProblemSpec& spec,
                                   double rho) {
  DenseMatrix m = primal_dual_hessian(z, spec, rho);
  m.topRows(spec.n_x) *= -1.0;
  return m;
}

PrimalDual newton_flow_step(const PrimalDual& z, double h, const ProblemSpec& spec,
                            double rho) {
  if (!(h > 0.0)) throw std::invalid_argument("newton_flow_step: h must be positive");
  if (spec.has_finite_bounds()) {
    throw std::invalid_argument("newton_flow_step: bounds are not supported");
  }
  const DenseMatrix hess = primal_dual_hessian(z, spec, rho);
  const AugmentedEvaluation e = evaluate_augmented(z, spec, rho);
  Vector grad(spec.n_x + spec.n_y);
  grad << e.gradient, e.c;

  FactorizationOptions opt;
  opt.backend = FactorizationBackend::dense;
  opt.pivot_tolerance = 1e-12;
  Vector dz;
  try {
    dz = factorize(hess.sparseView(), opt).solve(grad);
  } catch (const SingularMatrixError& err) {
    throw NewtonFlowSingularError(
        std::string("Newton flow undefined, singular Hessian: ") + err.what(), z);
  }
  return {z.x - h * dz.head(spec.n_x), z.y - h * dz.tail(spec.n_y)};
}

}  // namespace seqhom
