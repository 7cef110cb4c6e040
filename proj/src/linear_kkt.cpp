#include "seqhom/linear_kkt.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/LU>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseLU>

namespace seqhom {

struct Factorization::Impl {
  SparseMatrix matrix;
  FactorizationOptions options;
  bool dense = false;
  Eigen::PartialPivLU<DenseMatrix> dense_lu;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> sparse_lu;

  Vector raw_solve(const Vector& rhs) const {
    if (dense) return dense_lu.solve(rhs);
    return sparse_lu.solve(rhs);
  }
};

Factorization::Factorization() = default;
Factorization::~Factorization() = default;
Factorization::Factorization(Factorization&&) noexcept = default;
Factorization& Factorization::operator=(Factorization&&) noexcept = default;

Index Factorization::dim() const { return impl_ ? impl_->matrix.rows() : 0; }
bool Factorization::is_dense() const { return impl_ && impl_->dense; }

Factorization factorize(const SparseMatrix& m, const FactorizationOptions& options) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("factorize: matrix must be square");
  }
  Factorization f;
  f.impl_ = std::make_unique<Factorization::Impl>();
  auto& impl = *f.impl_;
  impl.matrix = m;
  impl.matrix.makeCompressed();
  impl.options = options;
  for (Index k = 0; k < impl.matrix.nonZeros(); ++k) {
    if (!std::isfinite(impl.matrix.valuePtr()[k])) {
      throw std::invalid_argument("factorize: non-finite matrix entry");
    }
  }
  const Index n = m.rows();
  if (n == 0) {
    impl.dense = true;
    return f;
  }

  impl.dense = options.backend == FactorizationBackend::dense ||
               (options.backend == FactorizationBackend::automatic &&
                n <= options.dense_threshold);
  if (impl.dense) {
    impl.dense_lu.compute(DenseMatrix(impl.matrix));
    const auto diag = impl.dense_lu.matrixLU().diagonal().cwiseAbs();
    const double scale = diag.maxCoeff();
    for (Index k = 0; k < n; ++k) {
      if (!(diag[k] > options.pivot_tolerance * scale)) {
        std::ostringstream os;
        os << "dense LU: numerically singular pivot at index " << k;
        throw SingularMatrixError(os.str(), k);
      }
    }
    return f;
  }

  impl.sparse_lu.analyzePattern(impl.matrix);
  impl.sparse_lu.factorize(impl.matrix);
  if (impl.sparse_lu.info() != Eigen::Success) {
    // Eigen reports the failing column in its message ("... AT k").
    const std::string msg = impl.sparse_lu.lastErrorMessage();
    Index index = -1;
    const auto pos = msg.find_last_of(' ');
    if (pos != std::string::npos) {
      try {
        index = std::stol(msg.substr(pos + 1));
      } catch (const std::exception&) {
        index = -1;
      }
    }
    throw SingularMatrixError("sparse LU: " + msg, index);
  }
  return f;
}

Vector Factorization::solve(const Vector& rhs) const {
  if (rhs.size() != dim()) throw DimensionError("Factorization::solve: size mismatch");
  stats_ = {};
  if (dim() == 0) return rhs;
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return Vector::Zero(rhs.size());

  const auto& opt = impl_->options;
  Vector x = impl_->raw_solve(rhs);
  Vector r = rhs - impl_->matrix * x;
  double rel = x.allFinite() ? r.norm() / rhs_norm : kInfinity;
  while (rel > opt.refine_threshold && stats_.refinement_sweeps < opt.max_refinement_sweeps &&
         std::isfinite(rel)) {
    x += impl_->raw_solve(r);
    r = rhs - impl_->matrix * x;
    rel = x.allFinite() ? r.norm() / rhs_norm : kInfinity;
    ++stats_.refinement_sweeps;
    ++refinements_;
  }
  stats_.relative_residual = rel;
  if (!(rel <= opt.failure_threshold)) {
    std::ostringstream os;
    os << "linear solve failed: relative residual " << rel;
    throw SingularMatrixError(os.str(), -1);
  }
  return x;
}

}  // namespace seqhom
