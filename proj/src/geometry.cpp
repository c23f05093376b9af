#include "slt/geometry.hpp"

#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "slt/specops.hpp"

namespace slt {

namespace {

constexpr double kConvexCheck = 1e-6;
constexpr double kSupportMin = 1e-6;
constexpr int kAngleSamples = 1440;
constexpr int kMaxNewton = 100;

struct FootPoint {
  Vec foot;
  Vec nu;
  Vec curvatures;
  Mat tangents;
  double d = 0.0;
};

// Safeguarded Newton for the decreasing convex secular function
// F(t) = sum (a_i z_i / (t + a_i^2))^2 - 1 on a bracket [lo, hi] with F(lo) >= 0 >= F(hi).
double secular_root(const Vec& a, const Vec& z, int m, double lo, double hi) {
  auto eval = [&](double t, double& deriv) {
    double value = -1.0;
    deriv = 0.0;
    for (int i = 0; i < m; ++i) {
      const double den = t + a(i) * a(i);
      const double r = a(i) * z(i) / den;
      value += r * r;
      deriv -= 2.0 * r * r / den;
    }
    return value;
  };
  double t = lo;
  for (int it = 0; it < kMaxNewton; ++it) {
    double deriv = 0.0;
    const double value = std::isfinite(t) ? eval(t, deriv) : std::numeric_limits<double>::infinity();
    if (value == 0.0) return t;
    if (value > 0.0) {
      lo = t;
    } else {
      hi = t;
    }
    double next = t - value / deriv;
    if (!std::isfinite(value) || !std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
    const double scale = std::abs(t) + a(0) * a(0);
    if (std::abs(next - t) <= 4e-16 * scale || hi - lo <= 4e-16 * scale) return next;
    t = next;
  }
  fail(ErrorCode::ProjectionDiverged, "ellipsoid projection did not converge");
}

// Closest point on sum (y_i/a_i)^2 = 1 to z, with z >= 0 and a sorted descending.
Vec project_first_orthant(const Vec& a, const Vec& z) {
  const int n = static_cast<int>(a.size());
  const int k = n - 1;
  Vec y(n);
  if (z(k) > 0.0) {
    const double lo = -a(k) * a(k) + a(k) * z(k);
    const double hi = -a(k) * a(k) + a.cwiseProduct(z).norm();
    const double t = secular_root(a, z, n, lo, std::max(lo, hi));
    for (int i = 0; i < n; ++i) y(i) = a(i) * a(i) * z(i) / (t + a(i) * a(i));
    return y;
  }
  // z_k = 0: either the nearest point stays in the plane y_k = 0, or it leaves it.
  const double ak2 = a(k) * a(k);
  double at_pole = -1.0;
  bool pole = false;
  for (int i = 0; i < k; ++i) {
    const double den = a(i) * a(i) - ak2;
    if (z(i) > 0.0 && den <= 0.0) {
      pole = true;
      break;
    }
    if (z(i) > 0.0) at_pole += std::pow(a(i) * z(i) / den, 2);
  }
  if (pole || at_pole > 0.0) {
    const double lo = -ak2;
    const double hi = -ak2 + a.head(k).cwiseProduct(z.head(k)).norm();
    const double t = secular_root(a, z, k, lo, std::max(lo, hi));
    for (int i = 0; i < k; ++i) y(i) = a(i) * a(i) * z(i) / (t + a(i) * a(i));
    y(k) = 0.0;
    return y;
  }
  double used = 0.0;
  for (int i = 0; i < k; ++i) {
    const double den = a(i) * a(i) - ak2;
    y(i) = z(i) > 0.0 ? a(i) * a(i) * z(i) / den : 0.0;
    used += std::pow(y(i) / a(i), 2);
  }
  y(k) = a(k) * std::sqrt(std::max(0.0, 1.0 - used));
  return y;
}

// Orthonormal basis of the plane orthogonal to the unit vector nu (columns).
Mat tangent_basis(const Vec& nu) {
  const int n = static_cast<int>(nu.size());
  Mat t(n, n - 1);
  if (n == 2) {
    t.col(0) << -nu(1), nu(0);
    return t;
  }
  int best = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(nu(i)) < std::abs(nu(best))) best = i;
  }
  Vec e = Vec::Zero(3);
  e(best) = 1.0;
  Vec t1 = e - nu.dot(e) * nu;
  t1.normalize();
  const Eigen::Vector3d t2 = Eigen::Vector3d(nu).cross(Eigen::Vector3d(t1));
  t.col(0) = t1;
  t.col(1) = t2;
  return t;
}

FootPoint ellipsoid_foot(const Vec& axes, const Vec& x) {
  const int n = static_cast<int>(axes.size());
  std::array<int, kMaxDim> order{};
  std::iota(order.begin(), order.begin() + n, 0);
  std::stable_sort(order.begin(), order.begin() + n, [&](int i, int j) { return axes(i) > axes(j); });
  Vec a(n);
  Vec z(n);
  for (int k = 0; k < n; ++k) {
    a(k) = axes(order[k]);
    z(k) = std::abs(x(order[k]));
  }
  const Vec ys = project_first_orthant(a, z);
  FootPoint fp;
  fp.foot.resize(n);
  for (int k = 0; k < n; ++k) {
    const int i = order[k];
    fp.foot(i) = x(i) < 0.0 ? -ys(k) : ys(k);
  }
  const Vec inv_a2 = axes.cwiseProduct(axes).cwiseInverse();
  const Vec grad = fp.foot.cwiseProduct(inv_a2);
  const double gnorm = grad.norm();
  fp.nu = grad / gnorm;

  // Shape operator restricted to the tangent plane: T^T diag(1/a^2) T / |grad|.
  const Mat tb = tangent_basis(fp.nu);
  const Mat shape = tb.transpose() * inv_a2.asDiagonal() * tb / gnorm;
  if (n == 2) {
    fp.curvatures = shape.diagonal();
    fp.tangents = tb;
  } else {
    const auto sp = eig_sym(shape);
    fp.curvatures = sp.lambda;
    fp.tangents = tb * sp.frame;
  }
  const double level = x.cwiseProduct(x).dot(inv_a2);
  const double dist = (x - fp.foot).norm();
  fp.d = level < 1.0 ? dist : -dist;
  return fp;
}

struct AngleFourier {
  const std::vector<double>& c;
  double operator()(double theta, int derivative) const {
    double s = derivative == 0 ? c[0] : 0.0;
    const int terms = static_cast<int>(c.size() - 1) / 2;
    for (int k = 1; k <= terms; ++k) {
      const double ak = c[2 * k - 1];
      const double bk = c[2 * k];
      const double ck = std::cos(k * theta);
      const double sk = std::sin(k * theta);
      switch (derivative) {
        case 0: s += ak * ck + bk * sk; break;
        case 1: s += k * (-ak * sk + bk * ck); break;
        default: s += -k * k * (ak * ck + bk * sk); break;
      }
    }
    return s;
  }
};

// d(x) = min_theta [s(theta) - <x, nu(theta)>] for a 2-D convex body.
FootPoint fourier_foot(const std::vector<double>& coeffs, const Vec& x) {
  using std::numbers::pi;
  const AngleFourier s{coeffs};
  auto phi = [&](double th, int derivative) {
    const double c = std::cos(th);
    const double sn = std::sin(th);
    switch (derivative) {
      case 0: return s(th, 0) - (x(0) * c + x(1) * sn);
      case 1: return s(th, 1) - (-x(0) * sn + x(1) * c);
      default: return s(th, 2) + (x(0) * c + x(1) * sn);
    }
  };
  const double step = 2 * pi / kAngleSamples;
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kAngleSamples; ++k) {
    const double v = phi(k * step, 0);
    if (v < best_val) {
      best_val = v;
      best = k;
    }
  }
  double lo = (best - 1) * step;
  double hi = (best + 1) * step;
  double th = best * step;
  const double scale = 1.0 + x.norm() + std::abs(coeffs[0]);
  bool converged = false;
  for (int it = 0; it < kMaxNewton; ++it) {
    const double g = phi(th, 1);
    if (std::abs(g) <= 1e-13 * scale) {
      converged = true;
      break;
    }
    // phi' is increasing near a minimum; keep the sign-change bracket.
    if (g > 0.0) {
      hi = th;
    } else {
      lo = th;
    }
    const double curv = phi(th, 2);
    double next = curv > 0.0 ? th - g / curv : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo < 1e-15) {
      th = next;
      converged = true;
      break;
    }
    th = next;
  }
  if (!converged) fail(ErrorCode::ProjectionDiverged, "support-function projection did not converge");

  FootPoint fp;
  const Vec nu = (Vec(2) << std::cos(th), std::sin(th)).finished();
  const Vec tau = (Vec(2) << -std::sin(th), std::cos(th)).finished();
  fp.nu = nu;
  fp.foot = s(th, 0) * nu + s(th, 1) * tau;
  fp.curvatures = Vec::Constant(1, 1.0 / (s(th, 0) + s(th, 2)));
  fp.tangents = tau;
  fp.d = phi(th, 0);
  return fp;
}

void fill_derivatives(DistanceData& dd) {
  const int n = static_cast<int>(dd.nu.size());
  dd.grad_d = -dd.nu;
  dd.hess_d = Mat::Zero(n, n);
  dd.smooth = true;
  for (int i = 0; i < n - 1; ++i) {
    const double k = dd.curvatures(i);
    const double den = 1.0 - k * dd.d;
    if (!(den > 1e-12)) {
      dd.smooth = false;
      continue;
    }
    dd.hess_d -= (k / den) * dd.tangents.col(i) * dd.tangents.col(i).transpose();
  }
}

}  // namespace

double ConvexBody::support(const Vec& u) const {
  switch (kind_) {
    case BodyKind::Ball: return radius_ * u.norm();
    case BodyKind::Ellipsoid: return axes_.cwiseProduct(u).norm() + offset_ * u.norm();
    case BodyKind::Support2d: return u.norm() * support_angle(std::atan2(u(1), u(0)));
  }
  return 0.0;
}

double ConvexBody::support_angle(double theta, int derivative) const {
  if (dim_ != 2) fail(ErrorCode::BadDimension, "angular support needs a 2-D body");
  switch (kind_) {
    case BodyKind::Ball: return derivative == 0 ? radius_ : 0.0;
    case BodyKind::Support2d: return AngleFourier{fourier_}(theta, derivative);
    case BodyKind::Ellipsoid: {
      // s = sqrt(a^2 c^2 + b^2 s^2) + r; derivatives by hand.
      const double a2 = axes_(0) * axes_(0);
      const double b2 = axes_(1) * axes_(1);
      const double c = std::cos(theta);
      const double sn = std::sin(theta);
      const double q = a2 * c * c + b2 * sn * sn;
      const double root = std::sqrt(q);
      const double dq = 2.0 * (b2 - a2) * sn * c;
      const double ddq = 2.0 * (b2 - a2) * (c * c - sn * sn);
      if (derivative == 0) return root + offset_;
      if (derivative == 1) return dq / (2.0 * root);
      return ddq / (2.0 * root) - dq * dq / (4.0 * q * root);
    }
  }
  return 0.0;
}

std::pair<double, double> ConvexBody::curvature_range() const {
  switch (kind_) {
    case BodyKind::Ball: return {1.0 / radius_, 1.0 / radius_};
    case BodyKind::Ellipsoid: {
      const double amax = axes_.maxCoeff();
      const double amin = axes_.minCoeff();
      const double kmin = amin / (amax * amax);
      const double kmax = amax / (amin * amin);
      return {kmin / (1.0 + offset_ * kmin), kmax / (1.0 + offset_ * kmax)};
    }
    case BodyKind::Support2d: {
      using std::numbers::pi;
      double lo = std::numeric_limits<double>::infinity();
      double hi = 0.0;
      for (int k = 0; k < kAngleSamples; ++k) {
        const double th = 2 * pi * k / kAngleSamples;
        const double k_val = 1.0 / (support_angle(th, 0) + support_angle(th, 2));
        lo = std::min(lo, k_val);
        hi = std::max(hi, k_val);
      }
      return {lo, hi};
    }
  }
  return {0.0, 0.0};
}

double ConvexBody::inradius() const {
  switch (kind_) {
    case BodyKind::Ball: return radius_;
    case BodyKind::Ellipsoid: return axes_.minCoeff() + offset_;
    case BodyKind::Support2d: return signed_distance(*this, Vec::Zero(2)).d;
  }
  return 0.0;
}

std::pair<Vec, Vec> ConvexBody::bounding_box() const {
  Vec lo(dim_);
  Vec hi(dim_);
  for (int a = 0; a < dim_; ++a) {
    Vec e = Vec::Zero(dim_);
    e(a) = 1.0;
    hi(a) = support(e);
    lo(a) = -support(-e);
  }
  return {lo, hi};
}

ConvexBody make_domain(const DomainDescriptor& desc) {
  if (desc.dim != 2 && desc.dim != 3) fail(ErrorCode::BadDimension, "domain dimension must be 2 or 3");
  ConvexBody body;
  body.dim_ = desc.dim;
  body.kind_ = desc.kind;
  switch (desc.kind) {
    case BodyKind::Ball:
      if (!(desc.radius > 0.0)) fail(ErrorCode::NonConvex, "ball radius must be positive");
      body.radius_ = desc.radius;
      break;
    case BodyKind::Ellipsoid:
      if (static_cast<int>(desc.axes.size()) != desc.dim) {
        fail(ErrorCode::BadDimension, "ellipsoid needs one semi-axis per dimension");
      }
      body.axes_.resize(desc.dim);
      for (int i = 0; i < desc.dim; ++i) {
        if (!(desc.axes[i] > 0.0)) fail(ErrorCode::NonConvex, "ellipsoid semi-axes must be positive");
        body.axes_(i) = desc.axes[i];
      }
      break;
    case BodyKind::Support2d: {
      using std::numbers::pi;
      if (desc.dim != 2) fail(ErrorCode::BadDimension, "support-function bodies are 2-D only");
      if (desc.fourier.empty() || desc.fourier.size() % 2 == 0) {
        fail(ErrorCode::NonConvex, "fourier coefficients must be a0 followed by (a_k, b_k) pairs");
      }
      body.fourier_ = desc.fourier;
      for (int k = 0; k < kAngleSamples; ++k) {
        const double th = 2 * pi * k / kAngleSamples;
        const double s = body.support_angle(th, 0);
        const double radius_of_curvature = s + body.support_angle(th, 2);
        if (!(s >= kSupportMin) || !(radius_of_curvature >= kConvexCheck)) {
          fail(ErrorCode::NonConvex, "support function fails s > 0 and s + s'' > 0");
        }
      }
      break;
    }
  }
  return body;
}

DistanceData signed_distance(const ConvexBody& body, const Vec& x) {
  const int n = body.dim();
  if (x.size() != n) fail(ErrorCode::BadDimension, "point dimension does not match body");
  DistanceData dd;
  switch (body.kind()) {
    case BodyKind::Ball: {
      const double r = x.norm();
      const double R = body.radius();
      dd.d = R - r;
      dd.curvatures = Vec::Constant(n - 1, 1.0 / R);
      if (r <= 1e-14 * R) {
        dd.nu = Vec::Unit(n, 0);
        dd.foot = R * dd.nu;
        dd.tangents = tangent_basis(dd.nu);
        dd.grad_d = Vec::Zero(n);
        dd.hess_d = Mat::Zero(n, n);
        dd.smooth = false;
        return dd;
      }
      dd.nu = x / r;
      dd.foot = R * dd.nu;
      dd.tangents = tangent_basis(dd.nu);
      dd.grad_d = -dd.nu;
      dd.hess_d = -(Mat::Identity(n, n) - dd.nu * dd.nu.transpose()) / r;
      dd.smooth = true;
      return dd;
    }
    case BodyKind::Ellipsoid: {
      FootPoint fp = ellipsoid_foot(body.axes(), x);
      const double r = body.offset();
      dd.d = fp.d + r;
      dd.nu = fp.nu;
      dd.foot = fp.foot + r * fp.nu;
      dd.curvatures = fp.curvatures.array() / (1.0 + r * fp.curvatures.array());
      dd.tangents = fp.tangents;
      break;
    }
    case BodyKind::Support2d: {
      FootPoint fp = fourier_foot(body.fourier(), x);
      dd.d = fp.d;
      dd.nu = fp.nu;
      dd.foot = fp.foot;
      dd.curvatures = fp.curvatures;
      dd.tangents = fp.tangents;
      break;
    }
  }
  fill_derivatives(dd);
  return dd;
}

std::pair<double, double> collar_hessian_bounds(const ConvexBody& body, double mu) {
  // Eigenvalues of D^2 h: 2 along the normal and (1-2d) k / (1 - k d) along
  // each principal direction, monotone in both k and d on the collar.
  const auto [kmin, kmax] = body.curvature_range();
  auto tangential = [](double k, double d) { return (1.0 - 2.0 * d) * k / (1.0 - k * d); };
  const double lo = std::min(tangential(kmin, 0.0), tangential(kmin, mu));
  const double hi = std::max(tangential(kmax, 0.0), tangential(kmax, mu));
  return {std::min(2.0, lo), std::max(2.0, hi)};
}

BarrierH barrier_h(const ConvexBody& body, const Vec& x, double mu) {
  const DistanceData dd = signed_distance(body, x);
  const double tol = 1e-12 * (1.0 + mu);
  if (dd.d < -tol || dd.d > mu + tol || !dd.smooth) {
    fail(ErrorCode::OutsideCollar, "barrier is only defined on the boundary collar");
  }
  const double d = dd.d;
  BarrierH b;
  b.mu = mu;
  b.h = -d + d * d;
  b.grad_h = (-1.0 + 2.0 * d) * dd.grad_d;
  b.hess_h = (-1.0 + 2.0 * d) * dd.hess_d + 2.0 * dd.grad_d * dd.grad_d.transpose();
  const auto sp = eig_sym(b.hess_h);
  b.hess_eigs = sp.lambda.reverse();
  std::tie(b.kappa0, b.K0) = collar_hessian_bounds(body, mu);
  return b;
}

ConvexBody homotopy_domain(const ConvexBody& body, double t) {
  t = std::clamp(t, 0.0, 1.0);
  if (t == 1.0) return body;
  ConvexBody out = body;
  if (t == 0.0) {
    out.kind_ = BodyKind::Ball;
    out.radius_ = 1.0;
    out.axes_.resize(0);
    out.offset_ = 0.0;
    out.fourier_.clear();
    return out;
  }
  switch (body.kind()) {
    case BodyKind::Ball:
      out.radius_ = t * body.radius_ + (1.0 - t);
      break;
    case BodyKind::Ellipsoid:
      out.axes_ = t * body.axes_;
      out.offset_ = t * body.offset_ + (1.0 - t);
      break;
    case BodyKind::Support2d:
      for (double& c : out.fourier_) c *= t;
      out.fourier_[0] += 1.0 - t;
      break;
  }
  return out;
}

double default_collar_width(const ConvexBody& body) {
  const double base = 0.2 * std::min(body.inradius(), 1.0);
  return std::min(base, 0.5 / body.curvature_range().second);
}

}  // namespace slt
