#include "seqhom/homotopy_driver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "seqhom/box_geometry.hpp"
#include "seqhom/linear_kkt.hpp"

namespace seqhom {

void DriverParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("driver parameter out of range: ") + what);
  };
  require(theta_cap > 0.0 && theta_cap < 1.0, "theta_cap in (0, 1)");
  require(lambda_term > 0.0, "lambda_term > 0");
  require(lambda_inc > 1.0, "lambda_inc > 1");
  require(tol > 0.0, "tol > 0");
  require(theta_ref > 0.0 && theta_ref < 1.0, "theta_ref in (0, 1)");
  require(std::isfinite(k_p) && std::isfinite(k_i), "k_p, k_i finite");
  require(lambda_min > 0.0, "lambda_min > 0");
  require(lambda_init > 0.0, "lambda_init > 0");
  require(rho >= 0.0, "rho >= 0");
  require(increment_floor >= 0.0 && increment_floor < 1e-6, "increment_floor in [0, 1e-6)");
  require(max_inner > 0 && max_outer > 0, "iteration caps positive");
}

MonotonicityResult monotonicity_test(const PrimalDual& z, const PrimalDual& z_plus,
                                     const PrimalDual& z_plusplus,
                                     const DriverParams& params, const ProblemSpec& spec) {
  const double newton = z_norm(z_plus - z, spec);
  const double simplified = z_norm(z_plusplus - z_plus, spec);
  MonotonicityResult r;
  const double floor =
      std::max(1e-300, params.increment_floor * std::max(1.0, z_norm(z, spec)));
  r.theta = newton <= floor ? 0.0 : simplified / newton;
  r.accept = r.theta <= params.theta_cap;
  return r;
}

double pi_update(double theta, HomotopyState& state, const DriverParams& params) {
  const double clamped = std::clamp(theta, 1e-12, std::nextafter(1.0, 0.0));
  const double e = std::log(params.theta_ref) - std::log(clamped);
  state.integral += e;
  const double log_mod = params.k_p * e + params.k_i * state.integral;
  state.lambda = std::max(params.lambda_min, state.lambda / std::exp(log_mod));
  return state.lambda;
}

double reject_update(HomotopyState& state, const DriverParams& params) {
  state.lambda *= params.lambda_inc;
  if (params.reset_integral) state.integral = std::min(state.integral, 0.0);
  ++state.discarded;
  return state.lambda;
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::solved:
      return "solved";
    case SolveStatus::max_iterations:
      return "max_iterations";
    case SolveStatus::stalled:
      return "stalled";
    case SolveStatus::diverged:
      return "diverged";
  }
  return "unknown";
}

void SolveLog::write_csv(std::ostream& os) const {
  os << "outer,inner,lambda,theta,accepted,singular,residual_norm,newton_norm,"
        "simplified_norm,increment,flow_time,mat,res,discarded,stationarity,"
        "feasibility\n";
  os << std::setprecision(17);
  for (const SolveRecord& r : records) {
    os << r.outer << ',' << r.inner << ',' << r.lambda << ',' << r.theta << ','
       << (r.accepted ? 1 : 0) << ',' << (r.singular ? 1 : 0) << ',' << r.residual_norm
       << ',' << r.newton_norm << ',' << r.simplified_norm << ',' << r.increment << ','
       << r.flow_time << ',' << r.mat << ',' << r.res << ',' << r.discarded << ','
       << r.stationarity << ',' << r.feasibility << '\n';
  }
}

void SolveLog::write_json(std::ostream& os) const {
  nlohmann::json arr = nlohmann::json::array();
  for (const SolveRecord& r : records) {
    arr.push_back({{"outer", r.outer},
                   {"inner", r.inner},
                   {"lambda", r.lambda},
                   {"theta", r.theta},
                   {"accepted", r.accepted},
                   {"singular", r.singular},
                   {"residual_norm", r.residual_norm},
                   {"newton_norm", r.newton_norm},
                   {"simplified_norm", r.simplified_norm},
                   {"increment", r.increment},
                   {"flow_time", r.flow_time},
                   {"mat", r.mat},
                   {"res", r.res},
                   {"discarded", r.discarded},
                   {"stationarity", r.stationarity},
                   {"feasibility", r.feasibility}});
  }
  os << nlohmann::json{{"records", arr}}.dump(2) << '\n';
}

SolveResult solve(const ProblemSpec& spec, const PrimalDual& z0,
                  const DriverParams& params) {
  params.validate();
  check_dimensions(z0, spec);

  SolveResult result;
  PrimalDual z = z0;
  if (!in_box(z.x, spec)) {
    z.x = project_box(z.x, spec);
    result.warning = "initial point projected onto C";
  }

  HomotopyState state;
  state.lambda = params.lambda_init;
  EvalCounters counters;
  double flow_time = 0.0;

  auto finish = [&](SolveStatus status) {
    result.z = z;
    result.status = status;
    result.mat = counters.mat;
    result.res = counters.res;
    result.discarded = state.discarded;
    result.final_lambda = state.lambda;
    result.flow_time = flow_time;
    return result;
  };

  for (int outer = 0; outer < params.max_outer; ++outer) {
    result.outer_iterations = outer + 1;
    state.zhat = z;
    ProxParams prox{state.lambda, params.rho, state.zhat};
    for (int inner = 0;; ++inner) {
      prox.lambda = state.lambda;
      SolveRecord rec;
      rec.outer = outer;
      rec.inner = inner;
      rec.lambda = state.lambda;

      PrimalDual z_plus;
      PrimalDual z_plusplus;
      bool singular = false;
      try {
        NewtonStep step = newton_step(z, prox, spec, &counters);
        rec.residual_norm = step.residual_norm;
        z_plusplus = simplified_newton_step(step.z_plus, step.kkt, prox, spec, &counters);
        z_plus = std::move(step.z_plus);
      } catch (const SingularMatrixError&) {
        singular = true;
      }

      if (!singular && (!z_plus.all_finite() || !z_plusplus.all_finite())) {
        rec.mat = counters.mat;
        rec.res = counters.res;
        rec.discarded = state.discarded;
        result.log.records.push_back(rec);
        return finish(SolveStatus::diverged);
      }

      MonotonicityResult test;
      if (!singular) {
        test = monotonicity_test(z, z_plus, z_plusplus, params, spec);
        rec.newton_norm = z_norm(z_plus - z, spec);
        rec.simplified_norm = z_norm(z_plusplus - z_plus, spec);
      }
      rec.theta = test.theta;
      rec.singular = singular;
      rec.accepted = !singular && test.accept;

      if (rec.accepted) {
        z = std::move(z_plusplus);
        flow_time += 1.0 / state.lambda;
        rec.increment = z_norm(z - state.zhat, spec);
        rec.flow_time = flow_time;
        const Criticality crit = criticality_residual(z, spec, params.rho);
        rec.stationarity = crit.stationarity;
        rec.feasibility = crit.feasibility;
        rec.mat = counters.mat;
        rec.res = counters.res;
        rec.discarded = state.discarded;
        result.log.records.push_back(rec);
        if (state.lambda <= params.lambda_term && rec.increment <= params.tol) {
          return finish(SolveStatus::solved);
        }
        pi_update(test.theta, state, params);
        break;
      }

      reject_update(state, params);
      rec.flow_time = flow_time;
      rec.mat = counters.mat;
      rec.res = counters.res;
      rec.discarded = state.discarded;
      result.log.records.push_back(rec);
      if (inner + 1 >= params.max_inner) return finish(SolveStatus::stalled);
    }
  }
  return finish(SolveStatus::max_iterations);
}

namespace {

struct StageSolver {
  const ProblemSpec& spec;
  const PrimalDual& zhat;
  double rho;
  int max_depth = 40;

  PrimalDual advance(const PrimalDual& from, double dt_from, double dt_to, int depth) const {
    ProxParams prox{1.0 / dt_to, rho, zhat};
    NewtonSolveResult r;
    bool ok = false;
    try {
      r = newton_solve(from, prox, spec);
      ok = r.converged;
    } catch (const SingularMatrixError&) {
      ok = false;
    }
    if (ok) return r.z;
    if (depth >= max_depth) {
      std::ostringstream os;
      os << "fixed_lambda_solve: subproblem at dt = " << dt_to << " did not converge";
      throw std::runtime_error(os.str());
    }
    const double lo = dt_from > 0.0 ? dt_from : dt_to / 10.0;
    const double mid = std::sqrt(lo * dt_to);
    const PrimalDual z_mid = advance(from, dt_from, mid, depth + 1);
    return advance(z_mid, mid, dt_to, depth + 1);
  }
};

}  // namespace

std::vector<PrimalDual> fixed_lambda_solve(const ProblemSpec& spec, const PrimalDual& z0,
                                           double lambda, double rho, int n_steps) {
  if (!(lambda > 0.0)) throw std::invalid_argument("fixed_lambda_solve: lambda must be positive");
  if (n_steps < 0) throw std::invalid_argument("fixed_lambda_solve: negative step count");
  check_dimensions(z0, spec);
  const double dt = 1.0 / lambda;

  std::vector<double> stages;
  for (double s = 1.0; s < dt * (1.0 - 1e-12); s *= 10.0) stages.push_back(s);
  stages.push_back(dt);

  std::vector<PrimalDual> iterates;
  iterates.reserve(static_cast<std::size_t>(n_steps) + 1);
  iterates.push_back(z0);
  for (int k = 0; k < n_steps; ++k) {
    const PrimalDual zhat = iterates.back();
    const StageSolver solver{spec, zhat, rho};
    PrimalDual z = zhat;
    double dt_prev = 0.0;
    for (double stage : stages) {
      z = solver.advance(z, dt_prev, stage, 0);
      dt_prev = stage;
    }
    iterates.push_back(std::move(z));
  }
  return iterates;
}

}  // namespace seqhom
