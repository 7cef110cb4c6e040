#pragma once

#include <complex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "seqhom/core_types.hpp"
#include "seqhom/linear_kkt.hpp"

namespace seqhom {

/// Projected forward Euler step on the gradient/antigradient flow:
/// x+ = P_C(x - h grad_x L^rho(z)), y+ = y + h c(x).
PrimalDual forward_euler_step(const PrimalDual& z, double h, const ProblemSpec& spec,
                              double rho);

struct FlowOptions {
  double h = 1e-3;
  double t_final = 1.0;
  double rho = 1.0;
  double gamma1 = 0.5;
  double gamma2 = 0.5;
  /// Monitors d/dt(1/2 ||c||^2) <= -gamma3 ||c||^2 when set.
  std::optional<double> gamma3;
  /// Keep every k-th state (monitors are still evaluated at every step).
  int sample_stride = 1;
};

/**
 * Recorded flow with Lyapunov monitors. Derivatives are one-sided differences
 * between consecutive steps. A slack >= 0 means the condition holds:
 *   slack_L = -dL/dt
 *   slack_c = -dL/dt - gamma2 ||c||^2 - gamma1 d/dt(1/2 ||c||^2)
 *   slack_gronwall = -gamma3 ||c||^2 - d/dt(1/2 ||c||^2)
 */
struct FlowTrajectory {
  std::vector<double> times;
  std::vector<PrimalDual> states;
  std::vector<double> lagrangian;
  std::vector<double> norm_c;
  std::vector<double> stationarity;
  std::vector<double> slack_L;
  std::vector<double> slack_c;
  std::vector<double> slack_gronwall;
  long steps = 0;
  long violations_L = 0;
  long violations_c = 0;
  long violations_gronwall = 0;

  double max_norm_c() const;
};

class FlowDivergedError : public std::runtime_error {
 public:
  FlowDivergedError(const std::string& what, double time)
      : std::runtime_error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

FlowTrajectory integrate_flow(const PrimalDual& z0, const ProblemSpec& spec,
                              const FlowOptions& options);

FlowTrajectory integrate_flow(const PrimalDual& z0, double h, double t_final,
                              const ProblemSpec& spec, double rho, double gamma1,
                              double gamma2);

/// Columns: t, x..., y..., L_rho, norm_c, stat_res, slack_L, slack_c.
void write_trajectory_csv(std::ostream& os, const FlowTrajectory& trajectory);

/// Closed-form eigenvalues 1/2 (+-sqrt((rho+1)(rho-3)) + 1 - rho) of the
/// linearized flow of the scalar example.
std::pair<std::complex<double>, std::complex<double>> linearized_spectrum_scalar(
    double rho);

/// Jacobian of the unconstrained flow right-hand side (-grad_x L^rho, c) at z,
/// [[-(W + rho J^T J), -J^T], [J, 0]]. Identity metrics only.
DenseMatrix linearized_flow_matrix(const PrimalDual& z, const ProblemSpec& spec,
                                   double rho);

/// Full primal-dual Hessian of L^rho, [[W + rho J^T J, J^T], [J, 0]].
/// Identity metrics only.
DenseMatrix primal_dual_hessian(const PrimalDual& z, const ProblemSpec& spec,
                                double rho);

/// Singular Hessian met by the Newton flow; carries the offending iterate.
class NewtonFlowSingularError : public SingularMatrixError {
 public:
  NewtonFlowSingularError(const std::string& what, PrimalDual iterate)
      : SingularMatrixError(what, -1), iterate_(std::move(iterate)) {}
  const PrimalDual& iterate() const { return iterate_; }

 private:
  PrimalDual iterate_;
};

/// z+ = z - h [nabla^2 L^rho(z)]^{-1} nabla L^rho(z). Unconstrained problems
/// with identity metrics only.
PrimalDual newton_flow_step(const PrimalDual& z, double h, const ProblemSpec& spec,
                            double rho);

}  // namespace seqhom
