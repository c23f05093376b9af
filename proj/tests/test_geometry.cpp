#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "slt/geometry.hpp"
#include "slt/specops.hpp"

using namespace slt;
using std::numbers::pi;

namespace {

Vec v2(double x, double y) { return (Vec(2) << x, y).finished(); }
Vec v3(double x, double y, double z) { return (Vec(3) << x, y, z).finished(); }

ConvexBody ball(int dim, double r) {
  DomainDescriptor d;
  d.dim = dim;
  d.kind = BodyKind::Ball;
  d.radius = r;
  return make_domain(d);
}

ConvexBody ellipsoid(std::vector<double> axes) {
  DomainDescriptor d;
  d.dim = static_cast<int>(axes.size());
  d.kind = BodyKind::Ellipsoid;
  d.axes = std::move(axes);
  return make_domain(d);
}

ConvexBody fourier(std::vector<double> c) {
  DomainDescriptor d;
  d.dim = 2;
  d.kind = BodyKind::Support2d;
  d.fourier = std::move(c);
  return make_domain(d);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::ConfigError;
}

// Brute-force distance from an interior point to the ellipse boundary.
double ellipse_distance_oracle(double a, double b, const Vec& x) {
  const int samples = 20000;
  double best = 1e300;
  double best_t = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double t = 2 * pi * k / samples;
    const double dist = std::hypot(a * std::cos(t) - x(0), b * std::sin(t) - x(1));
    if (dist < best) {
      best = dist;
      best_t = t;
    }
  }
  // Golden-section refinement around the best sample.
  double lo = best_t - 2 * pi / samples;
  double hi = best_t + 2 * pi / samples;
  const double g = (std::sqrt(5.0) - 1) / 2;
  auto dist = [&](double t) { return std::hypot(a * std::cos(t) - x(0), b * std::sin(t) - x(1)); };
  for (int it = 0; it < 100; ++it) {
    const double m1 = hi - g * (hi - lo);
    const double m2 = lo + g * (hi - lo);
    if (dist(m1) < dist(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  return dist(0.5 * (lo + hi));
}

std::vector<ConvexBody> test_bodies() {
  std::vector<ConvexBody> out;
  out.push_back(ball(2, 1.0));
  out.push_back(ball(3, 1.0));
  out.push_back(ellipsoid({1.2, 0.8}));
  out.push_back(ellipsoid({1.0, 0.8, 0.7}));
  out.push_back(fourier({1.0, 0.1, 0.05, 0.05, -0.02}));
  out.push_back(homotopy_domain(ellipsoid({1.2, 0.8}), 0.5));
  out.push_back(homotopy_domain(ellipsoid({1.0, 0.8, 0.7}), 0.3));
  return out;
}

Vec random_in_box(std::mt19937_64& rng, const ConvexBody& body) {
  const auto [lo, hi] = body.bounding_box();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec x(body.dim());
  for (int a = 0; a < body.dim(); ++a) x(a) = lo(a) + u(rng) * (hi(a) - lo(a));
  return x;
}

}  // namespace

TEST_CASE("make_domain examples and validation") {
  const auto b = ball(2, 1.0);
  for (double th : {0.0, 0.7, 2.0, 4.5}) CHECK(b.support(v2(std::cos(th), std::sin(th))) == doctest::Approx(1.0));

  const auto e = ellipsoid({1.2, 0.8});
  const auto [kmin, kmax] = e.curvature_range();
  CHECK(kmin <= 0.8 / (1.2 * 1.2) + 1e-12);
  CHECK(kmax >= 1.2 / (0.8 * 0.8) - 1e-12);
  CHECK(kmin == doctest::Approx(0.5555555556));
  CHECK(kmax == doctest::Approx(1.875));

  CHECK_NOTHROW(fourier({1.0, 0.5, 0.0}));
  CHECK(code_of([] { fourier({1.0, 1.1, 0.0}); }) == ErrorCode::NonConvex);
  // Non-convex but positive support: 1 + 0.3 cos(3 theta) has s + s'' = 1 - 2.4 cos(3 theta).
  CHECK(code_of([] { fourier({1.0, 0, 0, 0, 0, 0.3, 0.0}); }) == ErrorCode::NonConvex);

  DomainDescriptor bad;
  bad.dim = 4;
  CHECK(code_of([&] { make_domain(bad); }) == ErrorCode::BadDimension);
  bad.dim = 1;
  CHECK(code_of([&] { make_domain(bad); }) == ErrorCode::BadDimension);
}

TEST_CASE("signed_distance examples") {
  const auto b = ball(2, 1.0);
  const auto dd = signed_distance(b, v2(0.5, 0.0));
  CHECK(dd.d == doctest::Approx(0.5));
  CHECK(dd.foot(0) == doctest::Approx(1.0));
  CHECK(dd.nu(0) == doctest::Approx(1.0));
  CHECK(dd.curvatures(0) == doctest::Approx(1.0));
  CHECK(dd.smooth);

  const auto c = signed_distance(b, v2(0.0, 0.0));
  CHECK(c.d == doctest::Approx(1.0));
  CHECK_FALSE(c.smooth);

  const auto e = ellipsoid({1.2, 0.8});
  const auto de = signed_distance(e, v2(1.1, 0.0));
  CHECK(std::abs(de.d - 0.1) < 1e-10);
  CHECK(de.nu(0) == doctest::Approx(1.0));
  CHECK(std::abs(de.nu(1)) < 1e-12);
  CHECK(de.curvatures(0) == doctest::Approx(1.875));

  // Outside points are negative.
  CHECK(signed_distance(b, v2(1.3, 0.0)).d == doctest::Approx(-0.3));
  CHECK(signed_distance(e, v2(0.0, 1.0)).d == doctest::Approx(-0.2));
}

TEST_CASE("ellipse distance matches brute force") {
  const auto e = ellipsoid({1.2, 0.8});
  std::mt19937_64 rng(3);
  int tested = 0;
  for (int k = 0; k < 400; ++k) {
    const Vec x = random_in_box(rng, e);
    const auto dd = signed_distance(e, x);
    if (dd.d <= 0) continue;
    CHECK(std::abs(dd.d - ellipse_distance_oracle(1.2, 0.8, x)) < 1e-9);
    ++tested;
  }
  CHECK(tested > 200);
  // Axis points, including the degenerate branch where the foot leaves the axis.
  CHECK(signed_distance(e, v2(0.0, 0.3)).d == doctest::Approx(0.5));
  CHECK(signed_distance(e, v2(0.1, 0.0)).d == doctest::Approx(ellipse_distance_oracle(1.2, 0.8, v2(0.1, 0.0))));
  CHECK(signed_distance(e, v2(0.0, 0.0)).d == doctest::Approx(0.8));
}

TEST_CASE("fourier body agrees with the ball and ellipse representations") {
  const auto f = fourier({1.0});
  const auto b = ball(2, 1.0);
  std::mt19937_64 rng(9);
  for (int k = 0; k < 100; ++k) {
    const Vec x = random_in_box(rng, b) * 0.9;
    const auto df = signed_distance(f, x);
    const auto db = signed_distance(b, x);
    CHECK(std::abs(df.d - db.d) < 1e-12);
  }
  // Parallel-offset ellipse: distance is the ellipse distance plus the offset.
  const auto e = homotopy_domain(ellipsoid({2.0, 1.0}), 0.5);
  const Vec x = v2(0.3, 0.2);
  CHECK(signed_distance(e, x).d == doctest::Approx(ellipse_distance_oracle(1.0, 0.5, x) + 0.5));
}

TEST_CASE("barrier_h examples") {
  const auto b = ball(2, 1.0);
  const auto h = barrier_h(b, v2(0.9, 0.0), 0.2);
  CHECK(h.h == doctest::Approx(-0.09));
  CHECK(h.grad_h(0) == doctest::Approx(0.8));
  CHECK(std::abs(h.grad_h(1)) < 1e-15);
  CHECK(h.hess_eigs(0) == doctest::Approx(0.8 / 0.9));
  CHECK(h.hess_eigs(1) == doctest::Approx(2.0));
  CHECK(h.kappa0 == doctest::Approx(0.75));
  CHECK(h.K0 == doctest::Approx(2.0));
  CHECK(h.hess_eigs(0) >= h.kappa0);

  const auto on = barrier_h(b, v2(1.0, 0.0), 0.2);
  CHECK(std::abs(on.h) < 1e-15);
  CHECK(on.grad_h(0) == doctest::Approx(1.0));

  CHECK(code_of([&] { barrier_h(b, v2(0.5, 0.0), 0.2); }) == ErrorCode::OutsideCollar);
  CHECK(code_of([&] { barrier_h(b, v2(1.1, 0.0), 0.2); }) == ErrorCode::OutsideCollar);
}

TEST_CASE("homotopy_domain examples") {
  const auto e = ellipsoid({2.0, 1.0});
  const auto h0 = homotopy_domain(e, 0.0);
  CHECK(h0.is_ball());
  CHECK(h0.radius() == 1.0);
  const auto h1 = homotopy_domain(e, 1.0);
  CHECK(h1.support(v2(1, 0)) == doctest::Approx(2.0));
  const auto half = homotopy_domain(e, 0.5);
  CHECK(half.support(v2(1, 0)) == doctest::Approx(1.5));
  CHECK(half.support(v2(0, 1)) == doctest::Approx(1.0));

  const auto f = fourier({1.5, 0.2, 0.0});
  const auto fh = homotopy_domain(f, 0.25);
  CHECK(fh.support_angle(0.0) == doctest::Approx(0.25 * 1.7 + 0.75));
}

TEST_CASE("barrier properties on random collar points") {
  std::mt19937_64 rng(21);
  for (const auto& body : test_bodies()) {
    const double mu = default_collar_width(body);
    const auto [k0, K0] = collar_hessian_bounds(body, mu);
    CHECK(k0 > 0.0);
    int accepted = 0;
    for (int attempt = 0; attempt < 200000 && accepted < 1000; ++attempt) {
      const Vec x = random_in_box(rng, body);
      const auto dd = signed_distance(body, x);
      if (dd.d < 0.0 || dd.d > mu) continue;
      ++accepted;
      const auto bh = barrier_h(body, x, mu);
      CHECK(bh.h <= 1e-15);
      CHECK(bh.h >= -mu + mu * mu - 1e-15);
      const double g = bh.grad_h.norm();
      CHECK(g >= 0.5);
      CHECK(g <= 2.0);
      CHECK(bh.hess_eigs(0) >= k0 - 1e-9);
      CHECK(bh.hess_eigs(body.dim() - 1) <= K0 + 1e-9);
      CHECK(std::abs(dd.grad_d.norm() - 1.0) < 1e-8);
    }
    CHECK(accepted == 1000);
  }
}

TEST_CASE("projection consistency and distance derivatives") {
  std::mt19937_64 rng(33);
  for (const auto& body : test_bodies()) {
    const int n = body.dim();
    int tested = 0;
    for (int attempt = 0; attempt < 5000 && tested < 200; ++attempt) {
      const Vec x = random_in_box(rng, body);
      const auto dd = signed_distance(body, x);
      if (dd.d <= 0.0) continue;
      ++tested;
      CHECK(std::abs((x - dd.foot).norm() - std::abs(dd.d)) < 1e-10);
      const Vec dir = (dd.foot - x) / std::max((dd.foot - x).norm(), 1e-300);
      if (dd.d > 1e-6) CHECK((dir - dd.nu).norm() < 1e-8);
      if (!dd.smooth) continue;
      // Gradient and Hessian of d against central differences.
      const double step = 1e-5;
      for (int a = 0; a < n; ++a) {
        Vec e = Vec::Zero(n);
        e(a) = step;
        const auto plus = signed_distance(body, x + e);
        const auto minus = signed_distance(body, x - e);
        if (!plus.smooth || !minus.smooth) continue;
        CHECK(std::abs((plus.d - minus.d) / (2 * step) - dd.grad_d(a)) < 1e-6);
        const Vec col = (plus.grad_d - minus.grad_d) / (2 * step);
        // Skip points near the medial axis, where the Hessian blows up.
        if (dd.hess_d.cwiseAbs().maxCoeff() < 20.0) {
          CHECK((col - dd.hess_d.col(a)).cwiseAbs().maxCoeff() < 1e-4 * (1 + dd.hess_d.cwiseAbs().maxCoeff()));
        }
      }
    }
    CHECK(tested > 100);
  }
}

TEST_CASE("homotopy preserves strict convexity") {
  for (const auto& base : {ellipsoid({1.2, 0.8}), fourier({1.0, 0.1, 0.05, 0.05, -0.02}),
                           ellipsoid({1.5, 0.6, 0.9})}) {
    const double kmin = base.curvature_range().first;
    for (int k = 0; k <= 20; ++k) {
      const double t = k / 20.0;
      const auto body = homotopy_domain(base, t);
      const auto [lo, hi] = body.curvature_range();
      CHECK(lo > 0.0);
      CHECK(lo >= std::min(kmin, 1.0) - 1e-12);
      CHECK(hi >= lo);
      if (body.dim() == 2) {
        for (int j = 0; j < 720; ++j) {
          const double th = 2 * pi * j / 720;
          CHECK(body.support_angle(th) + body.support_angle(th, 2) > 0.0);
        }
      }
    }
  }
}

TEST_CASE("ellipse support derivatives match finite differences") {
  const auto e = homotopy_domain(ellipsoid({1.2, 0.8}), 0.6);
  for (double th : {0.1, 1.0, 2.5, 4.0}) {
    const double s = 1e-5;
    CHECK(e.support_angle(th, 1) == doctest::Approx((e.support_angle(th + s) - e.support_angle(th - s)) / (2 * s)).epsilon(1e-6));
    CHECK(e.support_angle(th, 2) ==
          doctest::Approx((e.support_angle(th + s, 1) - e.support_angle(th - s, 1)) / (2 * s)).epsilon(1e-6));
    CHECK(e.support(v2(std::cos(th), std::sin(th))) == doctest::Approx(e.support_angle(th)));
  }
}

TEST_CASE("default collar width") {
  CHECK(default_collar_width(ball(2, 1.0)) == doctest::Approx(0.2));
  CHECK(default_collar_width(ellipsoid({1.2, 0.8})) == doctest::Approx(0.16));
  CHECK(default_collar_width(ball(3, 2.0)) == doctest::Approx(0.2));
}
