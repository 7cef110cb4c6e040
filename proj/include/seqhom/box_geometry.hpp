#pragma once

#include <utility>
#include <vector>

#include "seqhom/core_types.hpp"

namespace seqhom {

enum class BoundStatus : unsigned char { inactive, at_lower, at_upper };

/// Per-coordinate bound status over all of x; unbounded coordinates are
/// always inactive.
struct ActiveSet {
  std::vector<BoundStatus> status;

  Index count_active() const;
  Index count(BoundStatus s) const;
  bool operator==(const ActiveSet&) const = default;
};

/// Membership tolerance of x in C, absolute per coordinate.
inline constexpr double kBoxMembershipTolerance = 1e-12;
/// Relative tolerance for "x_i sits on its bound".
inline constexpr double kActivityTolerance = 1e-12;

/// Componentwise clamp max(l, min(v, u)).
Vector project_box(const Vector& v, const ProblemSpec& spec);

bool in_box(const Vector& x, const ProblemSpec& spec,
            double tolerance = kBoxMembershipTolerance);

/// Bound status of a point x in C.
ActiveSet classify_point(const Vector& x, const ProblemSpec& spec);

/// Projection of d onto the tangent cone T(C, x). Throws std::domain_error if x
/// lies outside C beyond the membership tolerance.
Vector project_tangent_cone(const Vector& d, const Vector& x,
                            const ProblemSpec& spec);

struct MoreauParts {
  Vector tangent;
  Vector polar;
};

/// d = P_T(d) + P_{T^-}(d) with orthogonal parts.
MoreauParts moreau_decompose(const Vector& d, const Vector& x,
                             const ProblemSpec& spec);

struct Criticality {
  /// ||P_{T(C,x)}(-grad_x L^rho(x, y))||_X
  double stationarity = 0.0;
  /// ||c(x)||_Y
  double feasibility = 0.0;
};

/// Criticality measures at z. The tangent cone is taken at P_C(x), so iterates
/// that sit on a bound up to roundoff are admissible.
Criticality criticality_residual(const PrimalDual& z, const ProblemSpec& spec,
                                 double rho = 0.0);

}  // namespace seqhom
