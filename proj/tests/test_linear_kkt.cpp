#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "seqhom/linear_kkt.hpp"

using namespace seqhom;

namespace {

SparseMatrix from_dense(const DenseMatrix& d) { return d.sparseView(); }

/// Random sparse saddle-point matrix [[H, A^T], [A, -D]] with H SPD-ish and D >= 0.
SparseMatrix random_saddle(Index n, Index m, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<Triplet> t;
  for (Index i = 0; i < n; ++i) {
    t.emplace_back(i, i, 4.0 + unif(rng));
    for (Index j = i + 1; j < n; ++j) {
      if (coin(rng) < density) {
        const double v = 0.5 * unif(rng);
        t.emplace_back(i, j, v);
        t.emplace_back(j, i, v);
      }
    }
  }
  for (Index r = 0; r < m; ++r) {
    t.emplace_back(n + r, n + r, -0.1);
    t.emplace_back(n + r, r, 1.0);
    t.emplace_back(r, n + r, 1.0);
    for (Index j = 0; j < n; ++j) {
      if (coin(rng) < density) {
        const double v = unif(rng);
        t.emplace_back(n + r, j, v);
        t.emplace_back(j, n + r, v);
      }
    }
  }
  SparseMatrix s(n + m, n + m);
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

}  // namespace

TEST_CASE("identity system") {
  const SparseMatrix id = from_dense(DenseMatrix::Identity(4, 4));
  const Factorization f = factorize(id);
  const Vector b = Vector::LinSpaced(4, 1.0, 4.0);
  CHECK((f.solve(b) - b).norm() == 0.0);
}

TEST_CASE("permutation system needs pivoting") {
  DenseMatrix a(2, 2);
  a << 0.0, 1.0, 1.0, 0.0;
  Vector b(2);
  b << 3.0, 5.0;
  for (const auto backend : {FactorizationBackend::dense, FactorizationBackend::sparse}) {
    FactorizationOptions opts;
    opts.backend = backend;
    const Vector x = factorize(from_dense(a), opts).solve(b);
    CHECK(x[0] == doctest::Approx(5.0));
    CHECK(x[1] == doctest::Approx(3.0));
  }
}

TEST_CASE("automatic backend selection follows the threshold") {
  CHECK(factorize(random_saddle(10, 3, 0.3, 1)).is_dense());
  CHECK_FALSE(factorize(random_saddle(80, 20, 0.02, 1)).is_dense());
}

TEST_CASE("random sparse 500 x 500 saddle system") {
  const SparseMatrix k = random_saddle(400, 100, 0.005, 7);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  Vector b(500);
  for (Index i = 0; i < 500; ++i) b[i] = normal(rng);
  const Factorization f = factorize(k);
  CHECK_FALSE(f.is_dense());
  const Vector x = f.solve(b);
  CHECK((k * x - b).norm() / b.norm() <= 1e-9);
  CHECK(f.last_stats().relative_residual <= 1e-9);
}

TEST_CASE("dense and sparse backends agree with the elimination oracle") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Index n = 5 + static_cast<Index>(seed % 30);
    const Index m = n / 3;
    const SparseMatrix k = random_saddle(n, m, 0.2, seed);
    Vector b = Vector::LinSpaced(n + m, -1.0, 1.0);
    const Vector expected = oracle::gauss_solve(DenseMatrix(k), b);
    for (const auto backend : {FactorizationBackend::dense, FactorizationBackend::sparse}) {
      FactorizationOptions opts;
      opts.backend = backend;
      const Vector x = factorize(k, opts).solve(b);
      CHECK((x - expected).norm() <= 1e-10 * (1.0 + expected.norm()));
    }
  }
}

TEST_CASE("zero right-hand side gives zero") {
  const Factorization f = factorize(random_saddle(30, 10, 0.1, 5));
  CHECK(f.solve(Vector::Zero(40)).norm() == 0.0);
}

TEST_CASE("singular matrices are reported") {
  DenseMatrix a(3, 3);
  a << 1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0;
  for (const auto backend : {FactorizationBackend::dense, FactorizationBackend::sparse}) {
    FactorizationOptions opts;
    opts.backend = backend;
    CHECK_THROWS_AS(factorize(from_dense(a), opts), SingularMatrixError);
  }
  SparseMatrix empty_col(3, 3);
  empty_col.insert(0, 0) = 1.0;
  empty_col.insert(1, 1) = 1.0;
  CHECK_THROWS_AS(factorize(empty_col), SingularMatrixError);
}

TEST_CASE("invalid input is rejected") {
  CHECK_THROWS_AS(factorize(SparseMatrix(2, 3)), std::invalid_argument);
  DenseMatrix a = DenseMatrix::Identity(2, 2);
  a(0, 1) = std::nan("");
  CHECK_THROWS_AS(factorize(from_dense(a)), std::invalid_argument);
  const Factorization f = factorize(from_dense(DenseMatrix::Identity(2, 2)));
  CHECK_THROWS_AS(f.solve(Vector::Zero(3)), DimensionError);
}

TEST_CASE("ill-conditioned systems trigger refinement and keep a small residual") {
  const Index n = 12;
  DenseMatrix hilbert(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) hilbert(i, j) = 1.0 / static_cast<double>(i + j + 1);
  }
  FactorizationOptions opts;
  opts.pivot_tolerance = 1e-18;
  opts.failure_threshold = 1.0;
  const Factorization f = factorize(from_dense(hilbert), opts);
  const Vector b = Vector::Ones(n);
  const Vector x = f.solve(b);
  CHECK((hilbert * x - b).norm() / b.norm() <= 1e-6);
  CHECK(f.last_stats().refinement_sweeps <= opts.max_refinement_sweeps);
}
