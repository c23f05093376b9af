#pragma once

// Strictly convex, origin-centred bodies in two and three dimensions.
//
// A body is stored in one of three closed forms: a ball, an ellipsoid grown by
// a parallel offset (Minkowski sum with a ball), or a 2-D support function
// given by a truncated Fourier series. The parallel offset is what keeps the
// homotopy t*Omega + (1-t)*B_1 closed under the ellipsoid representation.

#include <utility>
#include <vector>

#include "slt/common.hpp"

namespace slt {

enum class BodyKind { Ball, Ellipsoid, Support2d };

struct DomainDescriptor {
  int dim = 2;
  BodyKind kind = BodyKind::Ball;
  double radius = 1.0;
  std::vector<double> axes;     // ellipsoid semi-axes, one per dimension
  std::vector<double> fourier;  // a0, a1, b1, a2, b2, ...
};

class ConvexBody {
 public:
  int dim() const { return dim_; }
  BodyKind kind() const { return kind_; }
  double radius() const { return radius_; }
  const Vec& axes() const { return axes_; }
  double offset() const { return offset_; }
  const std::vector<double>& fourier() const { return fourier_; }

  /// Support function h(u) = max_{y in body} <y, u> for a unit vector u.
  double support(const Vec& u) const;

  // Support function of a 2-D body and its first two angular derivatives.
  double support_angle(double theta, int derivative = 0) const;

  /// Smallest and largest principal curvature over the boundary.
  std::pair<double, double> curvature_range() const;

  /// Distance from the origin to the boundary.
  double inradius() const;

  /// Axis-aligned bounding box [lo, hi].
  std::pair<Vec, Vec> bounding_box() const;

  bool is_ball() const { return kind_ == BodyKind::Ball; }

 private:
  friend ConvexBody make_domain(const DomainDescriptor&);
  friend ConvexBody homotopy_domain(const ConvexBody&, double);

  int dim_ = 2;
  BodyKind kind_ = BodyKind::Ball;
  double radius_ = 1.0;
  Vec axes_;
  double offset_ = 0.0;
  std::vector<double> fourier_;
};

struct DistanceData {
  double d = 0.0;    // positive inside
  Vec foot;          // nearest boundary point
  Vec nu;            // outward unit normal at foot
  Vec curvatures;    // principal curvatures at foot (n-1 entries)
  Mat tangents;      // principal directions at foot, one per column
  Vec grad_d;
  Mat hess_d;
  bool smooth = true;  // false on the medial axis, where grad_d/hess_d are not defined
};

struct BarrierH {
  double h = 0.0;
  Vec grad_h;
  Mat hess_h;
  double mu = 0.0;
  Vec hess_eigs;  // pointwise, ascending
  double kappa0 = 0.0;  // collar-wide bounds kappa0 I <= D^2 h <= K0 I
  double K0 = 0.0;
};

ConvexBody make_domain(const DomainDescriptor& desc);

DistanceData signed_distance(const ConvexBody& body, const Vec& x);

/// h = -d + d^2 restricted to the collar 0 <= d <= mu.
BarrierH barrier_h(const ConvexBody& body, const Vec& x, double mu);

/// Analytic bounds of D^2 h over the collar of width mu.
std::pair<double, double> collar_hessian_bounds(const ConvexBody& body, double mu);

/// Minkowski combination t*body + (1-t)*B_1.
ConvexBody homotopy_domain(const ConvexBody& body, double t);

/// 0.2 * min(inradius, 1), capped at half the smallest radius of curvature.
double default_collar_width(const ConvexBody& body);

}  // namespace slt
