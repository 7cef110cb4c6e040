#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"

#include "seqhom/aug_lagrangian.hpp"
#include "seqhom/benchmarks.hpp"

using namespace seqhom;

namespace {

PrimalDual point(double x1, double x2, double y) {
  PrimalDual z(Vector(2), Vector(1));
  z.x << x1, x2;
  z.y << y;
  return z;
}

Vector vec(std::initializer_list<double> v) {
  Vector r(static_cast<Index>(v.size()));
  Index i = 0;
  for (double e : v) r[i++] = e;
  return r;
}

}  // namespace

TEST_CASE("augmented objective examples") {
  const ProblemSpec pendulum = pendulum_problem();
  for (double rho : {0.0, 1.0, 7.0}) CHECK(phi_rho(vec({0.0, -1.0}), pendulum, rho) == -1.0);
  CHECK(phi_rho(vec({0.0, 0.0}), pendulum, 2.0) == doctest::Approx(1.0));
  CHECK(phi_rho(vec({2.0}), scalar_problem(), 1.0) == doctest::Approx(0.0));
}

TEST_CASE("augmented Lagrangian examples") {
  const ProblemSpec pendulum = pendulum_problem();
  CHECK(lagrangian_rho(point(0.6, 0.8, 3.0), pendulum, 5.0) == doctest::Approx(0.8));
  CHECK(lagrangian_rho(point(0.0, 0.0, 1.0), pendulum, 0.0) == doctest::Approx(-1.0));
  PrimalDual q(vec({1.0, 0.0}), vec({0.0}));
  CHECK(lagrangian_rho(q, nonconvex_qp_problem(), 1.0) == doctest::Approx(1.0));
}

TEST_CASE("gradient examples") {
  const ProblemSpec pendulum = pendulum_problem();
  const PrimalDual z = point(0.01, 1.0, -0.5);
  const Vector g = grad_x_L_rho(z, pendulum, 0.0);
  // 2 y x1 and 1 + 2 y x2 at y = -1/2.
  CHECK(g[0] == doctest::Approx(-0.01));
  CHECK(g[1] == doctest::Approx(0.0));
  CHECK(grad_x_L_rho(point(0.0, -1.0, 0.5), pendulum, 3.0).norm() == 0.0);
  CHECK(grad_y_L_rho(point(0.0, 0.0, 0.0), pendulum)[0] == -1.0);
  CHECK(grad_y_L_rho(point(1.0, 1.0, 0.0), pendulum)[0] == 1.0);
  CHECK(grad_y_L_rho(point(0.6, 0.8, 2.0), pendulum)[0] == doctest::Approx(0.0));
}

TEST_CASE("gradient matches central differences of the augmented Lagrangian") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const ProblemSpec pendulum = pendulum_problem();
  for (int k = 0; k < 50; ++k) {
    const PrimalDual z = point(unif(rng), unif(rng), unif(rng));
    const double rho = 2.0 * (1.0 + unif(rng));
    const Vector g = grad_x_L_rho(z, pendulum, rho);
    for (Index i = 0; i < 2; ++i) {
      auto f = [&](const Vector& x) { return lagrangian_rho(PrimalDual(x, z.y), pendulum, rho); };
      CHECK(std::abs(g[i] - oracle::central_difference(f, z.x, i, 1e-5)) <= 1e-6);
    }
  }
}

TEST_CASE("elliptic gradient is the Riesz representative of the derivative") {
  const EllipticProblem e = elliptic_problem(EllipticConfig::standard(4, 1.0, 1e-2));
  const ProblemSpec& spec = e.spec;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  PrimalDual z(Vector(spec.n_x), Vector(spec.n_y));
  for (Index i = 0; i < spec.n_x; ++i) z.x[i] = unif(rng);
  for (Index i = 0; i < spec.n_y; ++i) z.y[i] = unif(rng);
  const double rho = 0.7;
  const Vector covector = spec.metric_x.apply(grad_x_L_rho(z, spec, rho));
  auto f = [&](const Vector& x) { return lagrangian_rho(PrimalDual(x, z.y), spec, rho); };
  for (Index i = 0; i < spec.n_x; ++i) {
    const double fd = oracle::central_difference(f, z.x, i, 1e-6);
    CHECK(std::abs(covector[i] - fd) <= 1e-6 * (1.0 + std::abs(fd)));
  }
}

TEST_CASE("shifted multiplier identity") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const ProblemSpec pendulum = pendulum_problem();
  const ProblemSpec qp = random_qp_problem(6, 2, 9);
  for (int k = 0; k < 100; ++k) {
    const double rho = 3.0 * (1.0 + unif(rng));
    const PrimalDual z = point(unif(rng), unif(rng), unif(rng));
    const PrimalDual shifted(z.x, z.y + rho * grad_y_L_rho(z, pendulum));
    CHECK(grad_x_L_rho(z, pendulum, rho) == grad_x_L_rho(shifted, pendulum, 0.0));

    PrimalDual w(Vector(6), Vector(2));
    for (Index i = 0; i < 6; ++i) w.x[i] = unif(rng);
    for (Index i = 0; i < 2; ++i) w.y[i] = unif(rng);
    const PrimalDual ws(w.x, w.y + rho * grad_y_L_rho(w, qp));
    CHECK(grad_x_L_rho(w, qp, rho) == grad_x_L_rho(ws, qp, 0.0));
  }
}

TEST_CASE("penalty difference identity") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  const ProblemSpec pendulum = pendulum_problem();
  for (int k = 0; k < 100; ++k) {
    const Vector x = vec({unif(rng), unif(rng)});
    const double rho = std::abs(unif(rng));
    const double rho2 = rho + std::abs(unif(rng));
    const double c = pendulum.constraint(x)[0];
    const double diff = phi_rho(x, pendulum, rho2) - phi_rho(x, pendulum, rho);
    CHECK(diff == doctest::Approx(0.5 * (rho2 - rho) * c * c).epsilon(1e-12));
  }
}

TEST_CASE("dL/dt identity signs") {
  const ProblemSpec pendulum = pendulum_problem();
  CHECK(dLdt_identity(point(0.0, -1.0, 0.5), pendulum, 1.0).rhs == 0.0);
  CHECK(dLdt_identity(point(0.01, 1.0, -0.5), pendulum, 1.0).rhs < 0.0);
  // x = (0, 2), y = -1/4 is stationary in x but infeasible with c = 3.
  const DLdtIdentity s = dLdt_identity(point(0.0, 2.0, -0.25), pendulum, 0.0);
  CHECK(s.rhs == doctest::Approx(9.0));
  const ProblemSpec scalar = scalar_problem();
  const DLdtIdentity t = dLdt_identity(PrimalDual(vec({0.0}), vec({0.0})), scalar, 1.0);
  CHECK(t.rhs == 0.0);
}

TEST_CASE("dL/dt finite-difference error is first order in the step") {
  const ProblemSpec pendulum = pendulum_problem();
  const PrimalDual z = point(0.3, 0.4, 0.2);
  std::vector<double> hs;
  std::vector<double> errs;
  for (double h = 1e-2; h >= 1e-5; h /= 4.0) {
    const DLdtIdentity d = dLdt_identity(z, pendulum, 1.0, h);
    hs.push_back(h);
    errs.push_back(std::abs(d.lhs_fd - d.rhs));
  }
  CHECK(oracle::loglog_slope(hs, errs) >= 0.9);

  // Same on the bounded QP with an active bound.
  const ProblemSpec qp = nonconvex_qp_problem();
  const PrimalDual w(vec({0.4, 0.0}), vec({-0.3}));
  hs.clear();
  errs.clear();
  for (double h = 1e-2; h >= 1e-5; h /= 4.0) {
    const DLdtIdentity d = dLdt_identity(w, qp, 2.0, h);
    hs.push_back(h);
    errs.push_back(std::abs(d.lhs_fd - d.rhs));
  }
  CHECK(oracle::loglog_slope(hs, errs) >= 0.9);
}
