#include "seqhom/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/LU>

#include "seqhom/box_geometry.hpp"

namespace seqhom {

namespace {

SparseMatrix sparse_from_dense(const DenseMatrix& d) {
  SparseMatrix s = d.sparseView();
  s.makeCompressed();
  return s;
}

void set_unbounded(ProblemSpec& spec) {
  spec.lower = Vector::Constant(spec.n_x, -kInfinity);
  spec.upper = Vector::Constant(spec.n_x, kInfinity);
  spec.box = {0, 0};
}

}  // namespace

ProblemSpec pendulum_problem() {
  ProblemSpec spec;
  spec.name = "pendulum";
  spec.n_x = 2;
  spec.n_y = 1;
  spec.metric_x = SpaceMetric::identity(2);
  spec.metric_y = SpaceMetric::identity(1);
  set_unbounded(spec);
  spec.objective = [](const Vector& x) { return x[1]; };
  spec.objective_gradient = [](const Vector&) { return Vector::Unit(2, 1); };
  spec.constraint = [](const Vector& x) {
    return Vector::Constant(1, x.squaredNorm() - 1.0);
  };
  spec.constraint_jacobian = [](const Vector& x) {
    DenseMatrix j(1, 2);
    j << 2.0 * x[0], 2.0 * x[1];
    return sparse_from_dense(j);
  };
  spec.lagrangian_hessian = [](const Vector&, const Vector& yt) {
    return sparse_from_dense(2.0 * yt[0] * DenseMatrix::Identity(2, 2));
  };
  return spec;
}

ProblemSpec scalar_problem() {
  ProblemSpec spec;
  spec.name = "scalar";
  spec.n_x = 1;
  spec.n_y = 1;
  spec.metric_x = SpaceMetric::identity(1);
  spec.metric_y = SpaceMetric::identity(1);
  set_unbounded(spec);
  spec.objective = [](const Vector& x) { return -0.5 * x[0] * x[0]; };
  spec.objective_gradient = [](const Vector& x) { return Vector(-x); };
  spec.constraint = [](const Vector& x) { return Vector(x); };
  spec.constraint_jacobian = [](const Vector&) {
    return sparse_from_dense(DenseMatrix::Identity(1, 1));
  };
  spec.lagrangian_hessian = [](const Vector&, const Vector&) {
    return sparse_from_dense(-DenseMatrix::Identity(1, 1));
  };
  return spec;
}

ProblemSpec nonconvex_qp_problem() {
  ProblemSpec spec;
  spec.name = "nonconvex-qp";
  spec.n_x = 2;
  spec.n_y = 1;
  spec.metric_x = SpaceMetric::identity(2);
  spec.metric_y = SpaceMetric::identity(1);
  spec.lower = Vector(2);
  spec.lower << -kInfinity, 0.0;
  spec.upper = Vector::Constant(2, kInfinity);
  spec.box = {1, 1};
  spec.objective = [](const Vector& x) { return 0.5 * x[0] * x[0] - 0.5 * x[1] * x[1]; };
  spec.objective_gradient = [](const Vector& x) {
    Vector g(2);
    g << x[0], -x[1];
    return g;
  };
  spec.constraint = [](const Vector& x) { return Vector::Constant(1, x[0]); };
  spec.constraint_jacobian = [](const Vector&) {
    DenseMatrix j(1, 2);
    j << 1.0, 0.0;
    return sparse_from_dense(j);
  };
  spec.lagrangian_hessian = [](const Vector&, const Vector&) {
    DenseMatrix h = DenseMatrix::Zero(2, 2);
    h(0, 0) = 1.0;
    h(1, 1) = -1.0;
    return sparse_from_dense(h);
  };
  return spec;
}

QPData random_qp_data(Index n, Index m, std::uint64_t seed, std::optional<double> bound) {
  if (n <= 0 || m < 0 || m > n) {
    throw std::invalid_argument("random_qp_data: need 0 <= m <= n and n > 0");
  }
  if (bound && !(*bound > 0.0)) throw std::invalid_argument("random_qp_data: bound must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto draw = [&](Index rows, Index cols) {
    DenseMatrix d(rows, cols);
    for (Index j = 0; j < cols; ++j) {
      for (Index i = 0; i < rows; ++i) d(i, j) = normal(rng);
    }
    return d;
  };
  QPData data;
  const DenseMatrix r = draw(n, n);
  data.h = 0.5 * (r + r.transpose());
  data.g = draw(n, 1).col(0);
  bool full_rank = m == 0;
  for (int attempt = 0; attempt < 10 && !full_rank; ++attempt) {
    data.a = draw(m, n);
    full_rank = Eigen::FullPivLU<DenseMatrix>(data.a).rank() == m;
  }
  if (!full_rank) throw std::runtime_error("random_qp_data: no full-row-rank A in 10 draws");
  if (m == 0) data.a = DenseMatrix(0, n);
  data.b = draw(m, 1).col(0);
  if (bound) {
    data.lower = Vector::Constant(n, -*bound);
    data.upper = Vector::Constant(n, *bound);
  }
  return data;
}

ProblemSpec qp_problem(const QPData& data) {
  const Index n = data.h.rows();
  const Index m = data.a.rows();
  if (data.h.cols() != n || data.a.cols() != n || data.g.size() != n || data.b.size() != m) {
    throw DimensionError("qp_problem: inconsistent data");
  }
  auto shared = std::make_shared<const QPData>(data);
  const SparseMatrix h = sparse_from_dense(data.h);
  const SparseMatrix a = sparse_from_dense(data.a);

  ProblemSpec spec;
  spec.name = "qp";
  spec.n_x = n;
  spec.n_y = m;
  spec.metric_x = SpaceMetric::identity(n);
  spec.metric_y = SpaceMetric::identity(m);
  if (data.lower.size() == n && data.upper.size() == n) {
    spec.lower = data.lower;
    spec.upper = data.upper;
    spec.box = {0, n};
  } else {
    set_unbounded(spec);
  }
  spec.objective = [shared](const Vector& x) {
    return 0.5 * x.dot(shared->h * x) - shared->g.dot(x);
  };
  spec.objective_gradient = [shared](const Vector& x) {
    return Vector(shared->h * x - shared->g);
  };
  spec.constraint = [shared](const Vector& x) { return Vector(shared->a * x - shared->b); };
  spec.constraint_jacobian = [a](const Vector&) { return a; };
  spec.lagrangian_hessian = [h](const Vector&, const Vector&) { return h; };
  return spec;
}

ProblemSpec random_qp_problem(Index n, Index m, std::uint64_t seed,
                              std::optional<double> bound) {
  ProblemSpec spec = qp_problem(random_qp_data(n, m, seed, bound));
  spec.name = "random-qp";
  return spec;
}

double standard_lower_bound(double, double) { return -50.0; }

double standard_upper_bound(double xi1, double xi2) {
  const double d1 = xi1 - 0.5;
  const double d2 = xi2 - 0.5;
  return std::min(50.0, 800.0 * std::max(d1 * d1, d2 * d2));
}

double standard_target(double xi1, double xi2) {
  return 12.0 * (1.0 - xi1) * xi1 * (1.0 - xi2) * xi2;
}

EllipticConfig EllipticConfig::standard(int n, double p, double gamma) {
  EllipticConfig cfg;
  cfg.n = n;
  cfg.a = std::pow(10.0, -p);
  cfg.b = std::pow(10.0, p);
  cfg.gamma = gamma;
  cfg.lower = standard_lower_bound;
  cfg.upper = standard_upper_bound;
  cfg.target = standard_target;
  return cfg;
}

void EllipticConfig::validate() const {
  if (n < 2) throw std::invalid_argument("elliptic: n must be at least 2");
  if (!(a > 0.0)) throw std::invalid_argument("elliptic: a must be positive");
  if (!(b >= 0.0)) throw std::invalid_argument("elliptic: b must be nonnegative");
  if (!gamma) throw std::invalid_argument("elliptic: gamma must be given explicitly");
  if (!(*gamma > 0.0)) throw std::invalid_argument("elliptic: gamma must be positive");
  if (!lower || !upper || !target) {
    throw std::invalid_argument("elliptic: bound and target functions are required");
  }
}

namespace {

struct EllipticData {
  std::shared_ptr<const FemAssembly> fem;
  double a;
  double b;
  double gamma;
  Vector target;
  Index ni;
  Index nn;

  Eigen::Vector3d local(const Vector& interior_values, Index t) const {
    const auto& tri = fem->triangles[static_cast<std::size_t>(t)];
    Eigen::Vector3d v;
    for (int k = 0; k < 3; ++k) {
      const Index i = fem->node_to_interior[static_cast<std::size_t>(tri[k])];
      v[k] = i >= 0 ? interior_values[i] : 0.0;
    }
    return v;
  }

  Index interior_index(Index t, int k) const {
    return fem->node_to_interior[static_cast<std::size_t>(
        fem->triangles[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)])];
  }

  Index triangle_count() const { return static_cast<Index>(fem->triangles.size()); }
};

}  // namespace

EllipticProblem elliptic_problem(const EllipticConfig& config) {
  config.validate();
  auto fem = std::make_shared<const FemAssembly>(assemble_unit_square(config.n));
  const Index ni = fem->interior_count();
  const Index nn = fem->node_count();

  EllipticProblem problem;
  problem.fem = fem;
  problem.config = config;
  problem.target.resize(nn);
  problem.q_lower.resize(nn);
  problem.q_upper.resize(nn);
  for (Index i = 0; i < nn; ++i) {
    const Eigen::Vector2d& p = fem->nodes[static_cast<std::size_t>(i)];
    problem.target[i] = config.target(p[0], p[1]);
    problem.q_lower[i] = config.lower(p[0], p[1]);
    problem.q_upper[i] = config.upper(p[0], p[1]);
  }

  auto data = std::make_shared<const EllipticData>(
      EllipticData{fem, config.a, config.b, *config.gamma, problem.target, ni, nn});

  ProblemSpec& spec = problem.spec;
  std::ostringstream name;
  name << "elliptic(N=" << config.n << ", a=" << config.a << ", b=" << config.b
       << ", gamma=" << *config.gamma << ")";
  spec.name = name.str();
  spec.n_x = ni + nn;
  spec.n_y = ni;

  std::vector<Triplet> gram;
  for (Index k = 0; k < fem->stiffness.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(fem->stiffness, k); it; ++it) {
      gram.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (Index k = 0; k < fem->mass.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(fem->mass, k); it; ++it) {
      gram.emplace_back(ni + it.row(), ni + it.col(), it.value());
    }
  }
  SparseMatrix gx(spec.n_x, spec.n_x);
  gx.setFromTriplets(gram.begin(), gram.end());
  spec.metric_x = SpaceMetric::from_gram(gx);
  spec.metric_y = fem->stiffness_metric;

  spec.lower.resize(spec.n_x);
  spec.upper.resize(spec.n_x);
  spec.lower.head(ni).setConstant(-kInfinity);
  spec.upper.head(ni).setConstant(kInfinity);
  spec.lower.tail(nn) = problem.q_lower;
  spec.upper.tail(nn) = problem.q_upper;
  spec.box = {ni, nn};

  spec.objective = [data](const Vector& x) {
    const FemAssembly& f = *data->fem;
    const Vector e = f.extend(x.head(data->ni)) - data->target;
    const auto q = x.tail(data->nn);
    return 0.5 * e.dot(f.mass * e) + 0.5 * data->gamma * q.dot(f.mass * q);
  };

  spec.objective_gradient = [data](const Vector& x) {
    const FemAssembly& f = *data->fem;
    const Vector e = f.extend(x.head(data->ni)) - data->target;
    Vector g(data->ni + data->nn);
    g.head(data->ni) = f.mass_interior_rows * e;
    g.tail(data->nn) = data->gamma * (f.mass * x.tail(data->nn));
    return g;
  };

  spec.constraint = [data](const Vector& x) {
    const FemAssembly& f = *data->fem;
    const Vector u = x.head(data->ni);
    Vector r = -(f.mass_interior_rows * x.tail(data->nn));
    for (Index t = 0; t < data->triangle_count(); ++t) {
      const Eigen::Vector3d ul = data->local(u, t);
      const auto& kt = f.local_stiffness[static_cast<std::size_t>(t)];
      const auto& mt = f.local_mass[static_cast<std::size_t>(t)];
      const double kappa = data->a + data->b * ul.dot(mt * ul) / f.area;
      const Eigen::Vector3d rl = kappa * (kt * ul);
      for (int k = 0; k < 3; ++k) {
        const Index i = data->interior_index(t, k);
        if (i >= 0) r[i] += rl[k];
      }
    }
    return r;
  };

  spec.constraint_jacobian = [data](const Vector& x) {
    const FemAssembly& f = *data->fem;
    const Vector u = x.head(data->ni);
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(9 * data->triangle_count() +
                                          f.mass_interior_rows.nonZeros()));
    for (Index t = 0; t < data->triangle_count(); ++t) {
      const Eigen::Vector3d ul = data->local(u, t);
      const auto& kt = f.local_stiffness[static_cast<std::size_t>(t)];
      const auto& mt = f.local_mass[static_cast<std::size_t>(t)];
      const double kappa = data->a + data->b * ul.dot(mt * ul) / f.area;
      const Eigen::Vector3d ku = kt * ul;
      const Eigen::Vector3d dkappa = (2.0 * data->b / f.area) * (mt * ul);
      for (int r = 0; r < 3; ++r) {
        const Index i = data->interior_index(t, r);
        if (i < 0) continue;
        for (int c = 0; c < 3; ++c) {
          const Index j = data->interior_index(t, c);
          if (j < 0) continue;
          trip.emplace_back(i, j, kappa * kt(r, c) + ku[r] * dkappa[c]);
        }
      }
    }
    for (Index k = 0; k < f.mass_interior_rows.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(f.mass_interior_rows, k); it; ++it) {
        trip.emplace_back(it.row(), data->ni + it.col(), -it.value());
      }
    }
    SparseMatrix jac(data->ni, data->ni + data->nn);
    jac.setFromTriplets(trip.begin(), trip.end());
    return jac;
  };

  spec.lagrangian_hessian = [data](const Vector& x, const Vector& yt) {
    const FemAssembly& f = *data->fem;
    const Vector u = x.head(data->ni);
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(9 * data->triangle_count() +
                                          f.mass_interior.nonZeros() + f.mass.nonZeros()));
    for (Index t = 0; t < data->triangle_count(); ++t) {
      const Eigen::Vector3d ul = data->local(u, t);
      const Eigen::Vector3d yl = data->local(yt, t);
      const auto& kt = f.local_stiffness[static_cast<std::size_t>(t)];
      const auto& mt = f.local_mass[static_cast<std::size_t>(t)];
      const Eigen::Vector3d ky = kt * yl;
      const Eigen::Vector3d dkappa = (2.0 * data->b / f.area) * (mt * ul);
      const double pairing = yl.dot(kt * ul);
      const Eigen::Matrix3d local = ky * dkappa.transpose() + dkappa * ky.transpose() +
                                    (2.0 * data->b * pairing / f.area) * mt;
      for (int r = 0; r < 3; ++r) {
        const Index i = data->interior_index(t, r);
        if (i < 0) continue;
        for (int c = 0; c < 3; ++c) {
          const Index j = data->interior_index(t, c);
          if (j >= 0) trip.emplace_back(i, j, local(r, c));
        }
      }
    }
    for (Index k = 0; k < f.mass_interior.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(f.mass_interior, k); it; ++it) {
        trip.emplace_back(it.row(), it.col(), it.value());
      }
    }
    for (Index k = 0; k < f.mass.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(f.mass, k); it; ++it) {
        trip.emplace_back(data->ni + it.row(), data->ni + it.col(), data->gamma * it.value());
      }
    }
    SparseMatrix h(data->ni + data->nn, data->ni + data->nn);
    h.setFromTriplets(trip.begin(), trip.end());
    return h;
  };

  // Riesz gradient on the q block is gamma q - E yt, with E the zero extension.
  spec.box_riesz_jacobian = [data](const Vector&, const Vector&) {
    const FemAssembly& f = *data->fem;
    const Index nx = data->ni + data->nn;
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(data->nn + data->ni));
    for (Index k = 0; k < data->nn; ++k) trip.emplace_back(k, data->ni + k, data->gamma);
    for (Index k = 0; k < data->ni; ++k) {
      trip.emplace_back(f.interior[static_cast<std::size_t>(k)], nx + k, -1.0);
    }
    SparseMatrix m(data->nn, nx + data->ni);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
  };

  spec.validate();
  return problem;
}

Vector EllipticProblem::nodal_state(const PrimalDual& z) const {
  return fem->extend(z.x.head(u_size()));
}

Vector EllipticProblem::control(const PrimalDual& z) const { return z.x.tail(q_size()); }

Index EllipticProblem::count_at_lower(const PrimalDual& z) const {
  const ActiveSet s = classify_point(project_box(z.x, spec), spec);
  return s.count(BoundStatus::at_lower);
}

Index EllipticProblem::count_at_upper(const PrimalDual& z) const {
  const ActiveSet s = classify_point(project_box(z.x, spec), spec);
  return s.count(BoundStatus::at_upper);
}

void write_elliptic_grid_csv(std::ostream& os, const EllipticProblem& problem,
                             const PrimalDual& z) {
  check_dimensions(z, problem.spec);
  const Vector u = problem.nodal_state(z);
  const Vector q = problem.control(z);
  const ActiveSet s = classify_point(project_box(z.x, problem.spec), problem.spec);
  const Index offset = problem.spec.box.offset;
  os << "xi1,xi2,u,q,at_lower,at_upper\n" << std::setprecision(17);
  for (Index i = 0; i < problem.q_size(); ++i) {
    const Eigen::Vector2d& p = problem.fem->nodes[static_cast<std::size_t>(i)];
    const BoundStatus st = s.status[static_cast<std::size_t>(offset + i)];
    os << p[0] << ',' << p[1] << ',' << u[i] << ',' << q[i] << ','
       << (st == BoundStatus::at_lower ? 1 : 0) << ',' << (st == BoundStatus::at_upper ? 1 : 0)
       << '\n';
  }
}

}  // namespace seqhom
