#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace seqhom {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Raised when vector sizes disagree with the problem dimensions.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/**
 * Inner product on a coordinate space, given by a symmetric positive definite
 * Gram matrix G: <a, b> = a^T G b.
 *
 * The Riesz map of a coordinate covector f is G^{-1} f. Metrics are immutable
 * and cheap to copy; the Cholesky factor of G is shared between copies.
 */
class SpaceMetric {
 public:
  SpaceMetric() = default;

  static SpaceMetric identity(Index dim);
  /// Factorizes `gram` once. Throws std::invalid_argument if it is not SPD.
  static SpaceMetric from_gram(SparseMatrix gram);

  Index dim() const { return dim_; }
  bool is_identity() const { return impl_ == nullptr; }

  Vector apply(const Vector& v) const;
  Vector solve(const Vector& f) const;
  double inner(const Vector& a, const Vector& b) const;
  double norm(const Vector& v) const;
  double squared_norm(const Vector& v) const;

  /// Gram matrix (materialized identity for identity metrics).
  SparseMatrix gram() const;

 private:
  struct Impl;
  Index dim_ = 0;
  std::shared_ptr<const Impl> impl_;
};

/// Contiguous coordinate range [offset, offset + size) of x subject to bounds.
struct BoxBlock {
  Index offset = 0;
  Index size = 0;

  bool contains(Index i) const { return i >= offset && i < offset + size; }
};

/**
 * Callback bundle describing `min phi(x) over x in C subject to c(x) = 0`.
 *
 * All callbacks work on coordinate vectors. Derivatives are returned as
 * coordinate covectors (plain partial derivatives); the library applies the
 * Riesz maps of `metric_x` and `metric_y` itself. The constraint is supplied
 * in covector form r(x) = G_Y c(x), so that c(x) = G_Y^{-1} r(x) is the
 * Riesz-represented constraint value and <y, c(x)>_Y = y^T r(x).
 *
 * Callbacks must be pure.
 */
struct ProblemSpec {
  std::string name;
  Index n_x = 0;
  Index n_y = 0;
  SpaceMetric metric_x;
  SpaceMetric metric_y;
  /// +-kInfinity marks an absent bound. Entries outside `box` must be infinite.
  Vector lower;
  Vector upper;
  BoxBlock box;

  std::function<double(const Vector& x)> objective;
  /// phi'(x) as a covector.
  std::function<Vector(const Vector& x)> objective_gradient;
  /// r(x) = G_Y c(x).
  std::function<Vector(const Vector& x)> constraint;
  /// dr/dx, n_y x n_x.
  std::function<SparseMatrix(const Vector& x)> constraint_jacobian;
  /// Coordinate Hessian of phi(x) + yt^T r(x) with respect to x, where yt is
  /// the (already shifted) multiplier y + rho c(x).
  std::function<SparseMatrix(const Vector& x, const Vector& yt)>
      lagrangian_hessian;
  /// Optional. Rows of d/d(x, yt) of the box block of the Riesz gradient
  /// G_X^{-1} (phi'(x) + J_r(x)^T yt), as a box.size x (n_x + n_y) matrix.
  /// Required when the box block of metric_x is not the identity.
  std::function<SparseMatrix(const Vector& x, const Vector& yt)>
      box_riesz_jacobian;

  bool has_finite_bounds() const;
  /// Throws std::invalid_argument on inconsistent dimensions or bounds.
  void validate() const;
};

/// Primal-dual point z = (x, y); y is Riesz-represented in Y coordinates.
struct PrimalDual {
  Vector x;
  Vector y;

  PrimalDual() = default;
  PrimalDual(Vector x_, Vector y_) : x(std::move(x_)), y(std::move(y_)) {}

  static PrimalDual zero(const ProblemSpec& spec) {
    return {Vector::Zero(spec.n_x), Vector::Zero(spec.n_y)};
  }

  PrimalDual operator+(const PrimalDual& o) const { return {x + o.x, y + o.y}; }
  PrimalDual operator-(const PrimalDual& o) const { return {x - o.x, y - o.y}; }
  PrimalDual operator*(double s) const { return {s * x, s * y}; }

  bool all_finite() const { return x.allFinite() && y.allFinite(); }
};

/// Throws DimensionError if z does not fit spec.
void check_dimensions(const PrimalDual& z, const ProblemSpec& spec);

/// sqrt(||x||_X^2 + ||y||_Y^2).
double z_norm(const PrimalDual& z, const ProblemSpec& spec);

// Metric-aware evaluations derived from the callbacks.

/// Riesz gradient of phi.
Vector grad_phi(const ProblemSpec& spec, const Vector& x);
/// Riesz-represented c(x) = G_Y^{-1} r(x).
Vector constraint_value(const ProblemSpec& spec, const Vector& x);
/// c'(x) v in Y coordinates.
Vector jac_c_apply(const ProblemSpec& spec, const Vector& x, const Vector& v);
/// Metric adjoint (c'(x))^* w = G_X^{-1} J_r(x)^T w.
Vector jac_c_adjoint_apply(const ProblemSpec& spec, const Vector& x,
                           const Vector& w);

struct DerivativeReport {
  double gradient = 0.0;
  double jacobian = 0.0;
  double hessian = 0.0;
  /// Only filled when the spec provides box_riesz_jacobian.
  double box_riesz = 0.0;

  double max() const;
};

/// Max relative deviation (inf-norm, scaled by max(1, |fd|)) of the analytic
/// derivatives against central differences with step h. `yt` defaults to a
/// vector of ones.
DerivativeReport check_derivatives(const ProblemSpec& spec, const Vector& x0,
                                   double h, const Vector& yt = Vector());

/// Largest |<A^* w, v>_X - <w, A v>_Y| / (|<w, A v>_Y| + 1) over random pairs.
double check_adjoint_consistency(const ProblemSpec& spec, const Vector& x,
                                 int samples, std::uint64_t seed);

/// Largest ||G^{-1} G v - v|| / ||v|| over random v.
double check_gram_roundtrip(const SpaceMetric& metric, int samples,
                            std::uint64_t seed);

}  // namespace seqhom
