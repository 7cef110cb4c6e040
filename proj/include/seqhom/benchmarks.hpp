#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>

#include "seqhom/core_types.hpp"
#include "seqhom/fem.hpp"

namespace seqhom {

/// min x2 subject to x1^2 + x2^2 = 1. Critical points (0, +-1, -+1/2).
ProblemSpec pendulum_problem();

/// min -x^2/2 subject to x = 0.
ProblemSpec scalar_problem();

/// min x1^2/2 - x2^2/2 subject to x1 = 0, x2 >= 0. Unbounded below on the
/// feasible set; (0, 0, 0) is a critical point.
ProblemSpec nonconvex_qp_problem();

/// phi(x) = 1/2 x^T H x - g^T x, c(x) = A x - b, optional bounds on all of x.
struct QPData {
  DenseMatrix h;
  DenseMatrix a;
  Vector g;
  Vector b;
  /// Empty for an unconstrained box.
  Vector lower;
  Vector upper;
};

/// Random symmetric (possibly indefinite) H with standard normal entries and a
/// full-row-rank A. With `bound` set, every coordinate gets [-bound, bound].
/// Throws std::runtime_error if no full-rank A is drawn in 10 attempts.
QPData random_qp_data(Index n, Index m, std::uint64_t seed,
                      std::optional<double> bound = std::nullopt);

ProblemSpec qp_problem(const QPData& data);

ProblemSpec random_qp_problem(Index n, Index m, std::uint64_t seed,
                              std::optional<double> bound = std::nullopt);

using NodalFunction = std::function<double(double, double)>;

/// Quasilinear elliptic optimal control problem on the unit square:
///   min 1/2 ||u - u_d||^2 + gamma/2 ||q||^2
///   s.t. (grad v, (a + b u^2) grad u) = (v, q) for all v in H^1_0,
///        q_l <= q <= q_u.
struct EllipticConfig {
  int n = 16;
  double a = 1.0;
  double b = 1.0;
  /// Must be set explicitly.
  std::optional<double> gamma;
  NodalFunction lower;
  NodalFunction upper;
  NodalFunction target;

  /// a = 10^-p, b = 10^p with the standard bounds and target.
  static EllipticConfig standard(int n, double p, double gamma);

  /// Throws std::invalid_argument when the configuration is unusable.
  void validate() const;
};

double standard_lower_bound(double xi1, double xi2);
double standard_upper_bound(double xi1, double xi2);
double standard_target(double xi1, double xi2);

/**
 * x = (u, q): u on interior nodes with metric K (Dirichlet stiffness), q on all
 * nodes with metric M (mass). y lives on interior nodes with metric K. Bounds
 * act on the q block only.
 */
struct EllipticProblem {
  ProblemSpec spec;
  std::shared_ptr<const FemAssembly> fem;
  EllipticConfig config;
  /// Nodal interpolants.
  Vector target;
  Vector q_lower;
  Vector q_upper;

  Index u_size() const { return fem->interior_count(); }
  Index q_size() const { return fem->node_count(); }
  /// Nodal u including the zero boundary values.
  Vector nodal_state(const PrimalDual& z) const;
  Vector control(const PrimalDual& z) const;
  /// Count of q nodes within the activity tolerance of each bound.
  Index count_at_lower(const PrimalDual& z) const;
  Index count_at_upper(const PrimalDual& z) const;
};

EllipticProblem elliptic_problem(const EllipticConfig& config);

/// Columns: xi1, xi2, u, q, at_lower, at_upper; one row per node.
void write_elliptic_grid_csv(std::ostream& os, const EllipticProblem& problem,
                             const PrimalDual& z);

}  // namespace seqhom
