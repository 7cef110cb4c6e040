#include "seqhom/fem.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/LU>

namespace seqhom {

Vector FemAssembly::extend(const Vector& interior_values) const {
  if (interior_values.size() != interior_count()) {
    throw DimensionError("extend: expected one value per interior node");
  }
  Vector out = Vector::Zero(node_count());
  for (Index k = 0; k < interior_count(); ++k) {
    out[interior[static_cast<std::size_t>(k)]] = interior_values[k];
  }
  return out;
}

Vector FemAssembly::restrict(const Vector& nodal_values) const {
  if (nodal_values.size() != node_count()) {
    throw DimensionError("restrict: expected one value per node");
  }
  Vector out(interior_count());
  for (Index k = 0; k < interior_count(); ++k) {
    out[k] = nodal_values[interior[static_cast<std::size_t>(k)]];
  }
  return out;
}

namespace {

void local_matrices(const std::array<Eigen::Vector2d, 3>& p, Eigen::Matrix3d& k,
                    Eigen::Matrix3d& m, double& area) {
  Eigen::Matrix2d jac;
  jac.col(0) = p[1] - p[0];
  jac.col(1) = p[2] - p[0];
  const double det = jac.determinant();
  area = 0.5 * std::abs(det);
  // Gradients of the barycentric coordinates.
  const Eigen::Matrix2d inv_t = jac.inverse().transpose();
  std::array<Eigen::Vector2d, 3> grad;
  grad[1] = inv_t.col(0);
  grad[2] = inv_t.col(1);
  grad[0] = -grad[1] - grad[2];
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      k(a, b) = area * grad[a].dot(grad[b]);
      m(a, b) = area / 12.0 * (a == b ? 2.0 : 1.0);
    }
  }
}

}  // namespace

FemAssembly assemble_unit_square(int n) {
  if (n < 2) throw std::invalid_argument("assemble_unit_square: need at least 2 cells per side");
  FemAssembly fem;
  fem.n = n;
  const Index side = n + 1;
  const double h = 1.0 / n;
  fem.nodes.reserve(static_cast<std::size_t>(side * side));
  for (Index j = 0; j < side; ++j) {
    for (Index i = 0; i < side; ++i) fem.nodes.emplace_back(i * h, j * h);
  }
  auto id = [side](Index i, Index j) { return j * side + i; };
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      fem.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      fem.triangles.push_back({id(i, j), id(i, j + 1), id(i + 1, j + 1)});
    }
  }

  fem.node_to_interior.assign(fem.nodes.size(), -1);
  for (Index j = 1; j < n; ++j) {
    for (Index i = 1; i < n; ++i) {
      fem.node_to_interior[static_cast<std::size_t>(id(i, j))] = fem.interior_count();
      fem.interior.push_back(id(i, j));
    }
  }

  std::vector<Triplet> kt;
  std::vector<Triplet> mt;
  kt.reserve(fem.triangles.size() * 9);
  mt.reserve(fem.triangles.size() * 9);
  for (const auto& tri : fem.triangles) {
    const std::array<Eigen::Vector2d, 3> p{fem.nodes[static_cast<std::size_t>(tri[0])],
                                           fem.nodes[static_cast<std::size_t>(tri[1])],
                                           fem.nodes[static_cast<std::size_t>(tri[2])]};
    Eigen::Matrix3d k;
    Eigen::Matrix3d m;
    local_matrices(p, k, m, fem.area);
    fem.local_stiffness.push_back(k);
    fem.local_mass.push_back(m);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        kt.emplace_back(tri[a], tri[b], k(a, b));
        mt.emplace_back(tri[a], tri[b], m(a, b));
      }
    }
  }
  const Index nn = fem.node_count();
  fem.stiffness_full.resize(nn, nn);
  fem.stiffness_full.setFromTriplets(kt.begin(), kt.end());
  fem.mass.resize(nn, nn);
  fem.mass.setFromTriplets(mt.begin(), mt.end());

  // Interior restrictions.
  std::vector<Triplet> k_int;
  std::vector<Triplet> m_rows;
  std::vector<Triplet> m_int;
  for (Index col = 0; col < nn; ++col) {
    for (SparseMatrix::InnerIterator it(fem.stiffness_full, col); it; ++it) {
      const Index r = fem.node_to_interior[static_cast<std::size_t>(it.row())];
      const Index c = fem.node_to_interior[static_cast<std::size_t>(it.col())];
      if (r >= 0 && c >= 0) k_int.emplace_back(r, c, it.value());
    }
    for (SparseMatrix::InnerIterator it(fem.mass, col); it; ++it) {
      const Index r = fem.node_to_interior[static_cast<std::size_t>(it.row())];
      if (r < 0) continue;
      m_rows.emplace_back(r, it.col(), it.value());
      const Index c = fem.node_to_interior[static_cast<std::size_t>(it.col())];
      if (c >= 0) m_int.emplace_back(r, c, it.value());
    }
  }
  const Index ni = fem.interior_count();
  fem.stiffness.resize(ni, ni);
  fem.stiffness.setFromTriplets(k_int.begin(), k_int.end());
  fem.mass_interior_rows.resize(ni, nn);
  fem.mass_interior_rows.setFromTriplets(m_rows.begin(), m_rows.end());
  fem.mass_interior.resize(ni, ni);
  fem.mass_interior.setFromTriplets(m_int.begin(), m_int.end());

  fem.stiffness_full.prune(0.0);
  fem.stiffness.prune(0.0);
  fem.stiffness_metric = SpaceMetric::from_gram(fem.stiffness);
  fem.mass_metric = SpaceMetric::from_gram(fem.mass);
  return fem;
}

Vector riesz_solve(const FemAssembly& fem, const Vector& rhs) {
  return fem.stiffness_metric.solve(rhs);
}

}  // namespace seqhom
