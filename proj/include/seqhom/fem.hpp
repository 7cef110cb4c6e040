#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "seqhom/core_types.hpp"

namespace seqhom {

/**
 * P1 finite elements on the unit square, split into N x N cells and each cell
 * cut along its (i, j)-(i+1, j+1) diagonal. Node (i, j) has index j (N + 1) + i
 * and coordinates (i / N, j / N).
 */
struct FemAssembly {
  int n = 0;
  std::vector<Eigen::Vector2d> nodes;
  std::vector<std::array<Index, 3>> triangles;
  /// Local matrices per triangle.
  std::vector<Eigen::Matrix3d> local_stiffness;
  std::vector<Eigen::Matrix3d> local_mass;
  /// Triangle area (all triangles are congruent).
  double area = 0.0;

  /// Laplace stiffness on all nodes.
  SparseMatrix stiffness_full;
  /// Stiffness restricted to interior nodes (homogeneous Dirichlet).
  SparseMatrix stiffness;
  /// Mass matrix on all nodes.
  SparseMatrix mass;
  /// Mass rows of interior nodes, all columns.
  SparseMatrix mass_interior_rows;
  /// Interior mass block.
  SparseMatrix mass_interior;

  /// interior[k] = node index of the k-th interior unknown.
  std::vector<Index> interior;
  /// node -> interior index, or -1 on the boundary.
  std::vector<Index> node_to_interior;

  /// Cached Cholesky factor of `stiffness`.
  SpaceMetric stiffness_metric;
  SpaceMetric mass_metric;

  Index node_count() const { return static_cast<Index>(nodes.size()); }
  Index interior_count() const { return static_cast<Index>(interior.size()); }

  /// Zero extension of interior values to all nodes.
  Vector extend(const Vector& interior_values) const;
  /// Restriction of nodal values to interior nodes.
  Vector restrict(const Vector& nodal_values) const;
};

/// Throws std::invalid_argument for n < 2.
FemAssembly assemble_unit_square(int n);

/// K^{-1} f: the Riesz representative in H^1_0 of an interior dual vector.
Vector riesz_solve(const FemAssembly& fem, const Vector& rhs);

}  // namespace seqhom
