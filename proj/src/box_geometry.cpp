#include "seqhom/box_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "seqhom/aug_lagrangian.hpp"

namespace seqhom {

Index ActiveSet::count(BoundStatus s) const {
  return static_cast<Index>(std::count(status.begin(), status.end(), s));
}

Index ActiveSet::count_active() const {
  return static_cast<Index>(status.size()) - count(BoundStatus::inactive);
}

Vector project_box(const Vector& v, const ProblemSpec& spec) {
  if (v.size() != spec.n_x) throw DimensionError("project_box: size mismatch");
  Vector p = v;
  for (Index i = spec.box.offset; i < spec.box.offset + spec.box.size; ++i) {
    p[i] = std::max(spec.lower[i], std::min(v[i], spec.upper[i]));
  }
  return p;
}

bool in_box(const Vector& x, const ProblemSpec& spec, double tolerance) {
  for (Index i = spec.box.offset; i < spec.box.offset + spec.box.size; ++i) {
    if (x[i] < spec.lower[i] - tolerance || x[i] > spec.upper[i] + tolerance) {
      return false;
    }
  }
  return true;
}

namespace {

bool near_bound(double xi, double bound) {
  return std::isfinite(bound) &&
         std::abs(xi - bound) <= kActivityTolerance * std::max(1.0, std::abs(bound));
}

}  // namespace

ActiveSet classify_point(const Vector& x, const ProblemSpec& spec) {
  if (x.size() != spec.n_x) throw DimensionError("classify_point: size mismatch");
  ActiveSet set;
  set.status.assign(static_cast<std::size_t>(spec.n_x), BoundStatus::inactive);
  for (Index i = spec.box.offset; i < spec.box.offset + spec.box.size; ++i) {
    if (near_bound(x[i], spec.lower[i])) {
      set.status[static_cast<std::size_t>(i)] = BoundStatus::at_lower;
    } else if (near_bound(x[i], spec.upper[i])) {
      set.status[static_cast<std::size_t>(i)] = BoundStatus::at_upper;
    }
  }
  return set;
}

Vector project_tangent_cone(const Vector& d, const Vector& x, const ProblemSpec& spec) {
  if (d.size() != spec.n_x) throw DimensionError("project_tangent_cone: size mismatch");
  if (!in_box(x, spec)) {
    throw std::domain_error("project_tangent_cone: x lies outside C");
  }
  Vector t = d;
  for (Index i = spec.box.offset; i < spec.box.offset + spec.box.size; ++i) {
    const bool lo = near_bound(x[i], spec.lower[i]);
    const bool up = near_bound(x[i], spec.upper[i]);
    if (lo && up) {
      t[i] = 0.0;
    } else if (lo) {
      t[i] = std::max(d[i], 0.0);
    } else if (up) {
      t[i] = std::min(d[i], 0.0);
    }
  }
  return t;
}

MoreauParts moreau_decompose(const Vector& d, const Vector& x, const ProblemSpec& spec) {
  MoreauParts parts;
  parts.tangent = project_tangent_cone(d, x, spec);
  parts.polar = d - parts.tangent;
  return parts;
}

Criticality criticality_residual(const PrimalDual& z, const ProblemSpec& spec,
                                 double rho) {
  check_dimensions(z, spec);
  const Vector g = grad_x_L_rho(z, spec, rho);
  const Vector xc = project_box(z.x, spec);
  Criticality out;
  out.stationarity = spec.metric_x.norm(project_tangent_cone(-g, xc, spec));
  out.feasibility = spec.metric_y.norm(constraint_value(spec, z.x));
  return out;
}

}  // namespace seqhom
