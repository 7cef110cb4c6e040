#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "oracles.hpp"

#include "seqhom/aug_lagrangian.hpp"
#include "seqhom/benchmarks.hpp"
#include "seqhom/subproblem_newton.hpp"

using namespace seqhom;

namespace {

PrimalDual point(double x1, double x2, double y) {
  PrimalDual z(Vector(2), Vector(1));
  z.x << x1, x2;
  z.y << y;
  return z;
}

Vector stacked(const PrimalDual& z) {
  Vector v(z.x.size() + z.y.size());
  v << z.x, z.y;
  return v;
}

PrimalDual random_point(Index nx, Index ny, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> unif(-scale, scale);
  PrimalDual z{Vector(nx), Vector(ny)};
  for (Index i = 0; i < nx; ++i) z.x[i] = unif(rng);
  for (Index i = 0; i < ny; ++i) z.y[i] = unif(rng);
  return z;
}

/// Gradient of the eliminated-w proximal objective
///   phi(x) + rho/2 |c|^2 + lambda/2 |x - xhat|^2 + lambda/2 |c/lambda + yhat|^2
/// from the raw problem callbacks (identity metrics).
Vector eliminated_gradient(const ProblemSpec& spec, const Vector& x, const PrimalDual& zhat,
                           double lambda, double rho) {
  const Vector c = spec.constraint(x);
  const DenseMatrix j = DenseMatrix(spec.constraint_jacobian(x));
  return spec.objective_gradient(x) + rho * j.transpose() * c + lambda * (x - zhat.x) +
         j.transpose() * (c / lambda + zhat.y);
}

/// Largest sampled difference quotient of z -> (grad_x L^rho(z), c(x)) in a ball.
double sampled_lipschitz(const ProblemSpec& spec, const PrimalDual& center, double radius,
                         double rho, std::mt19937_64& rng) {
  auto g = [&](const PrimalDual& z) {
    Vector v(spec.n_x + spec.n_y);
    v << grad_x_L_rho(z, spec, rho), spec.constraint(z.x);
    return v;
  };
  double omega = 0.0;
  for (int k = 0; k < 2000; ++k) {
    const PrimalDual a = center + random_point(spec.n_x, spec.n_y, rng, radius);
    const PrimalDual b = center + random_point(spec.n_x, spec.n_y, rng, radius);
    const double d = (stacked(a) - stacked(b)).norm();
    if (d > 0.0) omega = std::max(omega, (g(a) - g(b)).norm() / d);
  }
  return omega;
}

}  // namespace

TEST_CASE("residual examples") {
  const ProblemSpec pendulum = pendulum_problem();
  const PrimalDual zhat = point(0.01, 1.0, -0.5);
  const ProxParams prox{0.1, 1.0, zhat};
  const PrimalDual r = backward_euler_residual(zhat, prox, pendulum);
  // lambda (xhat - (xhat - grad / lambda)) = grad_x L^1 with c = 1e-4.
  const double shifted = -0.5 + 1e-4;
  CHECK(r.x[0] == doctest::Approx(2.0 * shifted * 0.01).epsilon(1e-12));
  CHECK(r.x[1] == doctest::Approx(1.0 + 2.0 * shifted).epsilon(1e-9));
  CHECK(r.y[0] == doctest::Approx(-1e-4).epsilon(1e-9));

  for (const PrimalDual& crit : {point(0.0, -1.0, 0.5), point(0.0, 1.0, -0.5)}) {
    for (double lambda : {1e-3, 1.0, 1e3}) {
      CHECK(stacked(backward_euler_residual(crit, {lambda, 1.0, crit}, pendulum)).norm() == 0.0);
    }
  }
  CHECK_THROWS_AS(backward_euler_residual(zhat, {0.0, 1.0, zhat}, pendulum),
                  std::invalid_argument);
}

TEST_CASE("KKT matrix of a QP has the regularized saddle-point form") {
  const QPData d = random_qp_data(6, 3, 42);
  const ProblemSpec qp = qp_problem(d);
  std::mt19937_64 rng(1);
  const PrimalDual z = random_point(6, 3, rng);
  const PrimalDual zhat = random_point(6, 3, rng);
  const double lambda = 0.7;
  const KKTSystem k = assemble_kkt(z, {lambda, 0.0, zhat}, qp);
  DenseMatrix expected = DenseMatrix::Zero(9, 9);
  expected.topLeftCorner(6, 6) = d.h + lambda * DenseMatrix::Identity(6, 6);
  expected.topRightCorner(6, 3) = d.a.transpose();
  expected.bottomLeftCorner(3, 6) = d.a;
  expected.bottomRightCorner(3, 3) = -lambda * DenseMatrix::Identity(3, 3);
  CHECK((DenseMatrix(k.matrix) - expected).norm() <= 1e-14);
  CHECK(k.size() == 9);
}

TEST_CASE("primal block is positive definite for large lambda") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const QPData d = random_qp_data(5, 2, seed);
    const double norm_h = Eigen::SelfAdjointEigenSolver<DenseMatrix>(d.h)
                              .eigenvalues()
                              .cwiseAbs()
                              .maxCoeff();
    const double lambda = norm_h + 1.0;
    std::mt19937_64 rng(seed);
    const PrimalDual z = random_point(5, 2, rng);
    const KKTSystem k = assemble_kkt(z, {lambda, 0.5, z}, qp_problem(d));
    const DenseMatrix block = DenseMatrix(k.matrix).topLeftCorner(5, 5);
    CHECK(Eigen::SelfAdjointEigenSolver<DenseMatrix>(block).eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("active rows are pinned identity rows") {
  const QPData d = random_qp_data(4, 1, 3, 0.5);
  const ProblemSpec qp = qp_problem(d);
  PrimalDual zhat(Vector::Constant(4, 10.0), Vector::Zero(1));
  zhat.x[1] = -10.0;
  const PrimalDual z(Vector::Zero(4), Vector::Zero(1));
  const ProxParams prox{1.0, 0.0, zhat};
  const KKTSystem k = assemble_kkt(z, prox, qp);
  CHECK(k.active.count_active() == 4);
  const DenseMatrix m(k.matrix);
  for (Index i = 0; i < 4; ++i) {
    CHECK(m.row(i).norm() == doctest::Approx(1.0));
    CHECK(m(i, i) == 1.0);
  }
  const NewtonStep step = newton_step(z, prox, qp);
  CHECK(step.z_plus.x[0] == doctest::Approx(0.5));
  CHECK(step.z_plus.x[1] == doctest::Approx(-0.5));
  CHECK(step.z_plus.x[2] == doctest::Approx(0.5));
  CHECK(step.z_plus.x[3] == doctest::Approx(0.5));
}

TEST_CASE("projector argument ties classify as inactive") {
  const ProblemSpec qp = nonconvex_qp_problem();
  Vector s(2);
  s << -5.0, 0.0;
  CHECK(classify_projector_argument(s, qp).count_active() == 0);
  s[1] = -1e-300;
  CHECK(classify_projector_argument(s, qp).status[1] == BoundStatus::at_lower);
}

TEST_CASE("Newton increment equals the dense augmented Newton increment") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    std::mt19937_64 rng(seed);
    const Index n = 2 + static_cast<Index>(seed % 19);
    const Index m = 1 + static_cast<Index>(seed % std::min<Index>(n, 10));
    const ProblemSpec qp = random_qp_problem(n, m, seed);
    const PrimalDual z = random_point(n, m, rng);
    const PrimalDual zhat = random_point(n, m, rng);
    std::uniform_real_distribution<double> unif(0.1, 3.0);
    const double lambda = unif(rng);
    const double rho = unif(rng);
    const Vector expected = oracle::augmented_newton_increment(qp, z, zhat, lambda, rho);
    const NewtonStep step = newton_step(z, {lambda, rho, zhat}, qp);
    CHECK((stacked(step.z_plus - z) - expected).norm() <= 1e-10 * (1.0 + expected.norm()));
  }
  // Nonlinear constraint away from y = yhat.
  const ProblemSpec pendulum = pendulum_problem();
  std::mt19937_64 rng(77);
  for (int k = 0; k < 30; ++k) {
    const PrimalDual z = random_point(2, 1, rng);
    const PrimalDual zhat = random_point(2, 1, rng);
    const double lambda = 2.5;
    const double rho = 0.8;
    const Vector expected = oracle::augmented_newton_increment(pendulum, z, zhat, lambda, rho);
    try {
      const NewtonStep step = newton_step(z, {lambda, rho, zhat}, pendulum);
      CHECK((stacked(step.z_plus - z) - expected).norm() <= 1e-10 * (1.0 + expected.norm()));
    } catch (const SingularMatrixError&) {
      // The augmented system is singular too in that case; skip.
    }
  }
}

TEST_CASE("one Newton step solves an equality-constrained QP exactly") {
  const QPData d = random_qp_data(7, 3, 5);
  const ProblemSpec qp = qp_problem(d);
  std::mt19937_64 rng(5);
  const PrimalDual z = random_point(7, 3, rng);
  const NewtonStep step = newton_step(z, {0.0, 0.0, z}, qp);
  const Vector x = step.z_plus.x;
  const Vector y = step.z_plus.y;
  CHECK((d.h * x - d.g + d.a.transpose() * y).norm() <= 1e-10);
  CHECK((d.a * x - d.b).norm() <= 1e-10);

  // Subproblem of a QP: the simplified step after an exact step is zero.
  const ProxParams prox{0.3, 0.5, z};
  NewtonStep s = newton_step(z, prox, qp);
  const PrimalDual zpp = simplified_newton_step(s.z_plus, s.kkt, prox, qp);
  CHECK((stacked(zpp) - stacked(s.z_plus)).norm() <= 1e-12);
  CHECK(stacked(backward_euler_residual(s.z_plus, prox, qp)).norm() <= 1e-11);
}

TEST_CASE("Newton step at an exact solution does not move") {
  const ProblemSpec pendulum = pendulum_problem();
  const PrimalDual zhat = point(0.3, 0.8, 0.1);
  const ProxParams prox{0.5, 1.0, zhat};
  const NewtonSolveResult r = newton_solve(zhat, prox, pendulum);
  REQUIRE(r.converged);
  const NewtonStep step = newton_step(r.z, prox, pendulum);
  CHECK(z_norm(step.z_plus - r.z, pendulum) <= 1e-13);
}

TEST_CASE("counters: one matrix and one residual per Newton step, one residual per simplified step") {
  const ProblemSpec pendulum = pendulum_problem();
  const PrimalDual z = point(0.3, 0.8, 0.1);
  const ProxParams prox{1.0, 1.0, z};
  EvalCounters counters;
  NewtonStep step = newton_step(z, prox, pendulum, &counters);
  CHECK(counters.mat == 1);
  CHECK(counters.res == 1);
  simplified_newton_step(step.z_plus, step.kkt, prox, pendulum, &counters);
  CHECK(counters.mat == 1);
  CHECK(counters.res == 2);
}

TEST_CASE("simplified step contracts at moderate lambda") {
  const ProblemSpec pendulum = pendulum_problem();
  std::mt19937_64 rng(31);
  for (int k = 0; k < 20; ++k) {
    const PrimalDual z = random_point(2, 1, rng);
    const ProxParams prox{10.0, 1.0, z};
    NewtonStep step = newton_step(z, prox, pendulum);
    const PrimalDual zpp = simplified_newton_step(step.z_plus, step.kkt, prox, pendulum);
    CHECK(z_norm(zpp - step.z_plus, pendulum) < z_norm(step.z_plus - z, pendulum));
  }
}

TEST_CASE("fixed point map") {
  const ProblemSpec pendulum = pendulum_problem();
  const PrimalDual zhat = point(0.3, 0.8, 0.1);
  std::vector<double> dts;
  std::vector<double> moves;
  for (double dt = 1e-1; dt >= 1e-5; dt /= 10.0) {
    const PrimalDual phi = fixpoint_map(zhat, {1.0 / dt, 1.0, zhat}, pendulum);
    dts.push_back(dt);
    moves.push_back(z_norm(phi - zhat, pendulum));
  }
  CHECK(moves.back() < 1e-4);
  CHECK(oracle::loglog_slope(dts, moves) == doctest::Approx(1.0).epsilon(0.01));

  const ProxParams prox{2.0, 1.0, zhat};
  const NewtonSolveResult r = newton_solve(zhat, prox, pendulum);
  REQUIRE(r.converged);
  CHECK(z_norm(fixpoint_map(r.z, prox, pendulum) - r.z, pendulum) <= 1e-12);
}

TEST_CASE("fixed point iteration contracts below the sampled threshold") {
  std::mt19937_64 rng(101);
  const ProblemSpec pendulum = pendulum_problem();
  const PrimalDual zhat = point(0.3, 0.8, 0.1);
  const double rho = 1.0;
  const double omega = sampled_lipschitz(pendulum, zhat, 0.5, rho, rng);
  const double dt = 0.5 / omega;
  const ProxParams prox{1.0 / dt, rho, zhat};
  PrimalDual z = zhat;
  double prev = 0.0;
  double worst_ratio = 0.0;
  for (int k = 0; k < 200; ++k) {
    const PrimalDual next = fixpoint_map(z, prox, pendulum);
    const double step = z_norm(next - z, pendulum);
    if (k > 0 && prev > 1e-12) worst_ratio = std::max(worst_ratio, step / prev);
    prev = step;
    z = next;
    if (step <= 1e-15) break;
  }
  CHECK(worst_ratio <= omega * dt + 0.05);
  const NewtonSolveResult r = newton_solve(zhat, prox, pendulum);
  REQUIRE(r.converged);
  CHECK(z_norm(z - r.z, pendulum) <= 1e-10);

  // Pendulum with dt = 0.01.
  const ProxParams small{100.0, rho, zhat};
  PrimalDual w = zhat;
  for (int k = 0; k < 100; ++k) w = fixpoint_map(w, small, pendulum);
  CHECK(stacked(backward_euler_residual(w, small, pendulum)).norm() <= 1e-10);
}

TEST_CASE("solutions of the subproblem solve the regularized problem") {
  auto check_solution = [](const ProblemSpec& spec, const PrimalDual& zhat, double lambda,
                           double rho) {
    const ProxParams prox{lambda, rho, zhat};
    const NewtonSolveResult r = newton_solve(zhat, prox, spec);
    REQUIRE(r.converged);
    REQUIRE(stacked(backward_euler_residual(r.z, prox, spec)).norm() <= 1e-12);
    // w from the multiplier equals -dt c(x).
    const Vector w = zhat.y - r.z.y;
    CHECK((w + spec.constraint(r.z.x) / lambda).norm() <= 1e-10);
    CHECK((prox_auxiliary_w(r.z, prox, spec) - w).norm() <= 1e-10);
    const Vector g = eliminated_gradient(spec, r.z.x, zhat, lambda, rho);
    for (Index i = 0; i < spec.n_x; ++i) {
      const bool at_lower = spec.lower[i] > -kInfinity && r.z.x[i] <= spec.lower[i] + 1e-12;
      const bool at_upper = spec.upper[i] < kInfinity && r.z.x[i] >= spec.upper[i] - 1e-12;
      if (at_lower) {
        CHECK(g[i] >= -1e-10);
      } else if (at_upper) {
        CHECK(g[i] <= 1e-10);
      } else {
        CHECK(std::abs(g[i]) <= 1e-10);
      }
    }
  };
  check_solution(pendulum_problem(), point(0.3, 0.8, 0.1), 1.0, 1.0);
  check_solution(pendulum_problem(), point(-0.5, 0.2, -0.3), 3.0, 0.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    check_solution(random_qp_problem(8, 3, seed), random_point(8, 3, rng), 5.0, 0.5);
    check_solution(random_qp_problem(8, 3, seed, 0.3), random_point(8, 3, rng), 5.0, 0.5);
  }
}

TEST_CASE("proximal problem value") {
  const ProblemSpec pendulum = pendulum_problem();
  const PrimalDual zhat = point(0.6, 0.8, 0.4);
  for (double lambda : {0.5, 1.0, 2.0}) {
    CHECK(prox_problem_value(zhat, {lambda, 1.0, zhat}, pendulum) ==
          doctest::Approx(0.8 + 0.5 * lambda * 0.16));
  }
  // Affine in lambda at a fixed feasible z.
  const PrimalDual z = point(0.0, 1.0, 0.2);
  const double v1 = prox_problem_value(z, {1.0, 1.0, zhat}, pendulum);
  const double v2 = prox_problem_value(z, {2.0, 1.0, zhat}, pendulum);
  const double v3 = prox_problem_value(z, {3.0, 1.0, zhat}, pendulum);
  CHECK(v2 > v1);
  CHECK(v3 - v2 == doctest::Approx(v2 - v1));

  // Along the homotopy from zhat, the solved value decreases as lambda drops.
  const PrimalDual start = point(0.5, -0.7, 0.2);
  std::vector<double> values;
  PrimalDual guess = start;
  for (double lambda : {1.0, 0.1, 0.01}) {
    const ProxParams prox{lambda, 1.0, start};
    const NewtonSolveResult r = newton_solve(guess, prox, pendulum);
    REQUIRE(r.converged);
    values.push_back(prox_problem_value(r.z, prox, pendulum));
    guess = r.z;
  }
  CHECK(values[1] < values[0]);
  CHECK(values[2] < values[1]);
}

TEST_CASE("Newton iterations at lambda = 0 converge quadratically near the minimum") {
  const ProblemSpec pendulum = pendulum_problem();
  const Vector solution = stacked(point(0.0, -1.0, 0.5));
  PrimalDual z = point(0.05, -0.97, 0.45);
  std::vector<double> errors{(stacked(z) - solution).norm()};
  for (int k = 0; k < 6 && errors.back() > 1e-15; ++k) {
    z = newton_step(z, {0.0, 1.0, z}, pendulum).z_plus;
    errors.push_back((stacked(z) - solution).norm());
  }
  REQUIRE(errors.size() >= 4);
  int quadratic = 0;
  for (std::size_t k = 1; k + 1 < errors.size() && errors[k] > 1e-14; ++k) {
    CHECK(errors[k + 1] / errors[k] < errors[k] / errors[k - 1]);
    if (errors[k + 1] <= 10.0 * errors[k] * errors[k]) ++quadratic;
  }
  CHECK(quadratic >= 3);
}

TEST_CASE("elliptic Newton step agrees with a dense coordinate oracle") {
  // Bounds far away: the semismooth system is the smooth one. Compare the
  // Newton increment with a dense solve of the coordinate-form Jacobian of
  //   F_x = lambda G_X (x - xhat) + grad covector,  F_y = lambda G_Y (y - yhat) - r(x)
  // obtained by central differences of the raw callbacks.
  EllipticConfig cfg = EllipticConfig::standard(3, 1.0, 1e-2);
  cfg.lower = [](double, double) { return -1e6; };
  cfg.upper = [](double, double) { return 1e6; };
  const EllipticProblem e = elliptic_problem(cfg);
  const ProblemSpec& spec = e.spec;
  std::mt19937_64 rng(9);
  const PrimalDual z = random_point(spec.n_x, spec.n_y, rng, 0.3);
  const PrimalDual zhat = random_point(spec.n_x, spec.n_y, rng, 0.3);
  const double lambda = 0.8;
  const double rho = 0.4;
  const DenseMatrix gx(spec.metric_x.gram());
  const DenseMatrix gy(spec.metric_y.gram());
  auto residual = [&](const Vector& v) {
    const Vector x = v.head(spec.n_x);
    const Vector y = v.tail(spec.n_y);
    const Vector r = spec.constraint(x);
    const Vector c = spec.metric_y.solve(r);
    const Vector yt = y + rho * c;
    const DenseMatrix j(spec.constraint_jacobian(x));
    Vector f(spec.n_x + spec.n_y);
    f.head(spec.n_x) = lambda * gx * (x - zhat.x) + spec.objective_gradient(x) + j.transpose() * yt;
    f.tail(spec.n_y) = lambda * gy * (y - zhat.y) - r;
    return f;
  };
  const Index n = spec.n_x + spec.n_y;
  DenseMatrix jac(n, n);
  const Vector v0 = stacked(z);
  for (Index k = 0; k < n; ++k) {
    Vector vp = v0;
    Vector vm = v0;
    vp[k] += 1e-6;
    vm[k] -= 1e-6;
    jac.col(k) = (residual(vp) - residual(vm)) / 2e-6;
  }
  const Vector expected = oracle::gauss_solve(jac, -residual(v0));
  const NewtonStep step = newton_step(z, {lambda, rho, zhat}, spec);
  CHECK((stacked(step.z_plus - z) - expected).norm() <= 1e-6 * (1.0 + expected.norm()));
}
