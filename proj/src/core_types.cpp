#include "seqhom/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/SparseCholesky>

namespace seqhom {

struct SpaceMetric::Impl {
  SparseMatrix gram;
  Eigen::SimplicialLLT<SparseMatrix> llt;
};

SpaceMetric SpaceMetric::identity(Index dim) {
  SpaceMetric m;
  m.dim_ = dim;
  return m;
}

SpaceMetric SpaceMetric::from_gram(SparseMatrix gram) {
  if (gram.rows() != gram.cols()) {
    throw std::invalid_argument("Gram matrix must be square");
  }
  auto impl = std::make_shared<Impl>();
  impl->gram = std::move(gram);
  impl->gram.makeCompressed();
  impl->llt.compute(impl->gram);
  if (impl->llt.info() != Eigen::Success) {
    throw std::invalid_argument("Gram matrix is not symmetric positive definite");
  }
  SpaceMetric m;
  m.dim_ = impl->gram.rows();
  m.impl_ = std::move(impl);
  return m;
}

Vector SpaceMetric::apply(const Vector& v) const {
  if (v.size() != dim_) throw DimensionError("SpaceMetric::apply: size mismatch");
  if (!impl_) return v;
  return impl_->gram * v;
}

Vector SpaceMetric::solve(const Vector& f) const {
  if (f.size() != dim_) throw DimensionError("SpaceMetric::solve: size mismatch");
  if (!impl_) return f;
  return impl_->llt.solve(f);
}

double SpaceMetric::inner(const Vector& a, const Vector& b) const {
  if (!impl_) {
    if (a.size() != dim_ || b.size() != dim_) {
      throw DimensionError("SpaceMetric::inner: size mismatch");
    }
    return a.dot(b);
  }
  return a.dot(apply(b));
}

double SpaceMetric::squared_norm(const Vector& v) const { return inner(v, v); }

double SpaceMetric::norm(const Vector& v) const {
  return std::sqrt(std::max(0.0, squared_norm(v)));
}

SparseMatrix SpaceMetric::gram() const {
  if (impl_) return impl_->gram;
  SparseMatrix eye(dim_, dim_);
  eye.setIdentity();
  return eye;
}

bool ProblemSpec::has_finite_bounds() const {
  for (Index i = 0; i < lower.size(); ++i) {
    if (std::isfinite(lower[i]) || std::isfinite(upper[i])) return true;
  }
  return false;
}

void ProblemSpec::validate() const {
  auto fail = [this](const std::string& what) {
    throw std::invalid_argument("problem '" + name + "': " + what);
  };
  if (n_x <= 0 || n_y < 0) fail("dimensions must be positive");
  if (metric_x.dim() != n_x) fail("metric_x dimension differs from n_x");
  if (metric_y.dim() != n_y) fail("metric_y dimension differs from n_y");
  if (lower.size() != n_x || upper.size() != n_x) fail("bounds must have size n_x");
  if (box.offset < 0 || box.size < 0 || box.offset + box.size > n_x) {
    fail("box block out of range");
  }
  for (Index i = 0; i < n_x; ++i) {
    if (std::isnan(lower[i]) || std::isnan(upper[i])) fail("NaN bound");
    if (lower[i] > upper[i]) {
      std::ostringstream os;
      os << "lower bound exceeds upper bound at index " << i;
      fail(os.str());
    }
    if (!box.contains(i) && (std::isfinite(lower[i]) || std::isfinite(upper[i]))) {
      fail("finite bound outside the box block");
    }
  }
  if (!objective || !objective_gradient || !constraint || !constraint_jacobian ||
      !lagrangian_hessian) {
    fail("missing callback");
  }
  if (box.size > 0 && !metric_x.is_identity()) {
    if (!box_riesz_jacobian) fail("non-identity metric_x requires box_riesz_jacobian");
    const SparseMatrix g = metric_x.gram();
    for (Index k = 0; k < g.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(g, k); it; ++it) {
        if (it.value() != 0.0 && box.contains(it.row()) != box.contains(it.col())) {
          fail("metric_x must not couple the box block with the other coordinates");
        }
      }
    }
  }
}

void check_dimensions(const PrimalDual& z, const ProblemSpec& spec) {
  if (z.x.size() != spec.n_x || z.y.size() != spec.n_y) {
    std::ostringstream os;
    os << "point of size (" << z.x.size() << ", " << z.y.size()
       << ") does not match problem '" << spec.name << "' of size (" << spec.n_x
       << ", " << spec.n_y << ")";
    throw DimensionError(os.str());
  }
}

double z_norm(const PrimalDual& z, const ProblemSpec& spec) {
  check_dimensions(z, spec);
  return std::sqrt(spec.metric_x.squared_norm(z.x) +
                   spec.metric_y.squared_norm(z.y));
}

Vector grad_phi(const ProblemSpec& spec, const Vector& x) {
  return spec.metric_x.solve(spec.objective_gradient(x));
}

Vector constraint_value(const ProblemSpec& spec, const Vector& x) {
  return spec.metric_y.solve(spec.constraint(x));
}

Vector jac_c_apply(const ProblemSpec& spec, const Vector& x, const Vector& v) {
  return spec.metric_y.solve(spec.constraint_jacobian(x) * v);
}

Vector jac_c_adjoint_apply(const ProblemSpec& spec, const Vector& x,
                           const Vector& w) {
  return spec.metric_x.solve(spec.constraint_jacobian(x).transpose() * w);
}

double DerivativeReport::max() const {
  return std::max({gradient, jacobian, hessian, box_riesz});
}

namespace {

double relative_deviation(const DenseMatrix& analytic, const DenseMatrix& fd) {
  if (analytic.size() == 0) return 0.0;
  const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
  return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

// Central differences of a vector-valued map, one column per coordinate.
template <class F>
DenseMatrix fd_jacobian(F&& f, const Vector& x0, Index rows, double h) {
  DenseMatrix jac(rows, x0.size());
  Vector xp = x0;
  for (Index j = 0; j < x0.size(); ++j) {
    xp[j] = x0[j] + h;
    const Vector fp = f(xp);
    xp[j] = x0[j] - h;
    const Vector fm = f(xp);
    xp[j] = x0[j];
    jac.col(j) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

}  // namespace

DerivativeReport check_derivatives(const ProblemSpec& spec, const Vector& x0,
                                   double h, const Vector& yt_in) {
  const Vector yt = yt_in.size() == spec.n_y ? yt_in : Vector::Ones(spec.n_y);
  DerivativeReport report;

  const auto phi_as_vector = [&](const Vector& x) {
    Vector v(1);
    v[0] = spec.objective(x);
    return v;
  };
  const DenseMatrix grad_fd = fd_jacobian(phi_as_vector, x0, 1, h);
  report.gradient =
      relative_deviation(spec.objective_gradient(x0).transpose(), grad_fd);

  const DenseMatrix jac_fd = fd_jacobian(spec.constraint, x0, spec.n_y, h);
  const DenseMatrix jac = DenseMatrix(spec.constraint_jacobian(x0));
  report.jacobian = relative_deviation(jac, jac_fd);

  const auto lagrangian_covector = [&](const Vector& x) -> Vector {
    return spec.objective_gradient(x) +
           spec.constraint_jacobian(x).transpose() * yt;
  };
  const DenseMatrix hess_fd = fd_jacobian(lagrangian_covector, x0, spec.n_x, h);
  const DenseMatrix hess = DenseMatrix(spec.lagrangian_hessian(x0, yt));
  report.hessian = relative_deviation(hess, hess_fd);

  if (spec.box_riesz_jacobian && spec.box.size > 0) {
    // Reference: box rows of G_X^{-1} [W | J_r^T].
    DenseMatrix full(spec.n_x, spec.n_x + spec.n_y);
    full.leftCols(spec.n_x) = hess;
    full.rightCols(spec.n_y) = jac.transpose();
    DenseMatrix riesz(spec.n_x, spec.n_x + spec.n_y);
    for (Index j = 0; j < full.cols(); ++j) {
      riesz.col(j) = spec.metric_x.solve(full.col(j));
    }
    const DenseMatrix expected = riesz.middleRows(spec.box.offset, spec.box.size);
    const DenseMatrix supplied = DenseMatrix(spec.box_riesz_jacobian(x0, yt));
    report.box_riesz = relative_deviation(supplied, expected);
  }
  return report;
}

double check_adjoint_consistency(const ProblemSpec& spec, const Vector& x,
                                 int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto random_vector = [&](Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
  };
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Vector v = random_vector(spec.n_x);
    const Vector w = random_vector(spec.n_y);
    const double lhs = spec.metric_x.inner(jac_c_adjoint_apply(spec, x, w), v);
    const double rhs = spec.metric_y.inner(w, jac_c_apply(spec, x, v));
    worst = std::max(worst, std::abs(lhs - rhs) / (std::abs(rhs) + 1.0));
  }
  return worst;
}

double check_gram_roundtrip(const SpaceMetric& metric, int samples,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Vector v(metric.dim());
    for (Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
    const Vector back = metric.solve(metric.apply(v));
    worst = std::max(worst, (back - v).norm() / std::max(v.norm(), 1e-300));
  }
  return worst;
}

}  // namespace seqhom
