#pragma once

#include <memory>
#include <stdexcept>
#include <string>

#include "seqhom/core_types.hpp"

namespace seqhom {

/// Structural or numerical singularity detected while factorizing or solving.
/// `index` is the offending column/pivot when known, otherwise -1.
class SingularMatrixError : public std::runtime_error {
 public:
  SingularMatrixError(const std::string& what, Index index)
      : std::runtime_error(what), index_(index) {}
  Index index() const { return index_; }

 private:
  Index index_;
};

enum class FactorizationBackend { automatic, dense, sparse };

struct FactorizationOptions {
  FactorizationBackend backend = FactorizationBackend::automatic;
  /// automatic picks the dense LU up to this dimension.
  Index dense_threshold = 64;
  /// Dense LU: a pivot with |u_kk| <= pivot_tolerance * max|u_jj| is singular.
  double pivot_tolerance = 1e-13;
  /// Refinement sweeps are triggered above this relative residual.
  double refine_threshold = 1e-10;
  int max_refinement_sweeps = 2;
  /// A solve whose relative residual stays above this is reported singular.
  double failure_threshold = 1e-6;
};

struct SolveStats {
  double relative_residual = 0.0;
  int refinement_sweeps = 0;
};

/**
 * LU factorization of a square, possibly indefinite, sparse matrix.
 *
 * Sparse systems are factorized by a supernodal LU with COLAMD ordering and
 * partial pivoting; small systems by a dense partial-pivoting LU. Every solve
 * checks its true residual and applies up to two sweeps of iterative
 * refinement when needed.
 */
class Factorization {
 public:
  Factorization();
  ~Factorization();
  Factorization(Factorization&&) noexcept;
  Factorization& operator=(Factorization&&) noexcept;

  Index dim() const;
  bool is_dense() const;

  Vector solve(const Vector& rhs) const;
  const SolveStats& last_stats() const { return stats_; }
  /// Total refinement sweeps over the lifetime of this factorization.
  int refinement_count() const { return refinements_; }

 private:
  friend Factorization factorize(const SparseMatrix&, const FactorizationOptions&);
  struct Impl;
  std::unique_ptr<Impl> impl_;
  mutable SolveStats stats_;
  mutable int refinements_ = 0;
};

/// Throws std::invalid_argument for non-square or non-finite input and
/// SingularMatrixError for singular matrices.
Factorization factorize(const SparseMatrix& m,
                        const FactorizationOptions& options = {});

}  // namespace seqhom
