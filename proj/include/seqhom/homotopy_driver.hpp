#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "seqhom/core_types.hpp"
#include "seqhom/subproblem_newton.hpp"

namespace seqhom {

/// Parameters of the sequential homotopy method. Defaults are the values used
/// for the elliptic benchmark.
struct DriverParams {
  double theta_cap = 0.9;
  double lambda_term = 1e-8;
  double lambda_inc = 2.0;
  double tol = 1e-8;
  double theta_ref = 0.5;
  double k_p = 0.2;
  double k_i = 0.005;
  double lambda_min = 1e-12;
  double lambda_init = 1.0;
  double rho = 0.1;
  /// Newton increments ||z+ - z||_Z at or below increment_floor * max(1, ||z||_Z)
  /// are treated as zero (theta = 0). Set to 0 to only catch exact zeros.
  double increment_floor = 1e-14;
  /// Reset I <- min(I, 0) after a rejected step.
  bool reset_integral = true;
  /// Consecutive rejections tolerated within one homotopy leg.
  int max_inner = 60;
  int max_outer = 500;

  /// Throws std::invalid_argument when a parameter is out of range.
  void validate() const;
};

struct HomotopyState {
  double lambda = 1.0;
  double integral = 0.0;
  PrimalDual zhat;
  long mat = 0;
  long res = 0;
  long discarded = 0;
};

struct MonotonicityResult {
  bool accept = false;
  double theta = 0.0;
};

/// theta = ||z++ - z+||_Z / ||z+ - z||_Z, or 0 when the denominator is below
/// max(1e-300, increment_floor * max(1, ||z||_Z)); accept iff theta <= theta_cap.
MonotonicityResult monotonicity_test(const PrimalDual& z, const PrimalDual& z_plus,
                                     const PrimalDual& z_plusplus,
                                     const DriverParams& params, const ProblemSpec& spec);

/// PI prediction after an accepted step; updates state.integral and
/// state.lambda and returns the new lambda.
double pi_update(double theta, HomotopyState& state, const DriverParams& params);

/// lambda <- lambda_inc lambda, I <- min(I, 0), one more discarded step.
double reject_update(HomotopyState& state, const DriverParams& params);

enum class SolveStatus { solved, max_iterations, stalled, diverged };

std::string to_string(SolveStatus status);

struct SolveRecord {
  int outer = 0;
  int inner = 0;
  double lambda = 0.0;
  double theta = 0.0;
  bool accepted = false;
  /// Linear solve failed; counted as a rejection.
  bool singular = false;
  /// ||F(z)||_Z of the backward Euler residual at z.
  double residual_norm = 0.0;
  double newton_norm = 0.0;
  double simplified_norm = 0.0;
  /// ||z - zhat||_Z after acceptance.
  double increment = 0.0;
  double flow_time = 0.0;
  long mat = 0;
  long res = 0;
  long discarded = 0;
  /// Criticality of the accepted iterate (logged only).
  double stationarity = 0.0;
  double feasibility = 0.0;
};

struct SolveLog {
  std::vector<SolveRecord> records;

  void write_csv(std::ostream& os) const;
  void write_json(std::ostream& os) const;
};

struct SolveResult {
  PrimalDual z;
  SolveStatus status = SolveStatus::max_iterations;
  SolveLog log;
  long mat = 0;
  long res = 0;
  long discarded = 0;
  int outer_iterations = 0;
  double final_lambda = 0.0;
  double flow_time = 0.0;
  /// Set when z0 had to be projected onto C.
  std::optional<std::string> warning;
};

/// Sequential homotopy method: outer loop over reference points, inner loop
/// of Newton / simplified Newton steps with monotonicity test.
SolveResult solve(const ProblemSpec& spec, const PrimalDual& z0,
                  const DriverParams& params = {});

/// n_steps exact projected backward Euler steps of size 1/lambda. Each step is
/// reached by a homotopy in dt over decades 1, 10, 100, ... up to 1/lambda,
/// every stage solved by full semismooth Newton; failing stages are bisected
/// in log(dt). Throws std::runtime_error if a step cannot be solved.
std::vector<PrimalDual> fixed_lambda_solve(const ProblemSpec& spec, const PrimalDual& z0,
                                           double lambda, double rho, int n_steps);

}  // namespace seqhom
