#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "slt/grid.hpp"

using namespace slt;
using std::numbers::pi;

namespace {

ConvexBody unit_ball(int dim) {
  DomainDescriptor d;
  d.dim = dim;
  return make_domain(d);
}

ConvexBody ellipse(double a, double b) {
  DomainDescriptor d;
  d.kind = BodyKind::Ellipsoid;
  d.axes = {a, b};
  return make_domain(d);
}

Vec v2(double x, double y) { return (Vec(2) << x, y).finished(); }

}  // namespace

TEST_CASE("build_grid on the unit disk") {
  const auto g = build_grid(unit_ball(2), 1.0 / 32);
  CHECK(std::abs(g->interior_count() - pi * 32 * 32) <= 0.03 * pi * 32 * 32);
  CHECK(g->tag_at({0, 0, 0}) == NodeTag::Interior);
  CHECK(g->tag_at({32, 0, 0}) == NodeTag::Ghost);
  CHECK(g->tag_at({33, 0, 0}) == NodeTag::Exterior);
  const int ghost = g->unknown_at({32, 0, 0});
  REQUIRE(ghost >= g->interior_count());
  const auto& info = g->ghost(ghost - g->interior_count());
  CHECK(info.dist.foot(0) == doctest::Approx(1.0));
  CHECK(std::abs(info.dist.foot(1)) < 1e-14);
  CHECK(info.probe1(0) == doctest::Approx(1.0 - 1.0 / 32));
  CHECK(info.probe2(0) == doctest::Approx(1.0 - 2.0 / 32));
}

TEST_CASE("build_grid rejects coarse spacing") {
  try {
    build_grid(unit_ball(2), 0.4);
    FAIL("expected TooCoarse");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooCoarse);
  }
}

TEST_CASE("grid invariants") {
  for (const auto& body : {unit_ball(2), ellipse(1.2, 0.8), unit_ball(3)}) {
    const double h = body.dim() == 2 ? 1.0 / 20 : 1.0 / 12;
    const auto g = build_grid(body, h);
    for (int i = 0; i < g->interior_count(); ++i) {
      for (int a = 0; a < g->dim(); ++a) {
        CHECK(g->axis_neighbor(i, a, 0) >= 0);
        CHECK(g->axis_neighbor(i, a, 1) >= 0);
        for (int b = a + 1; b < g->dim(); ++b) {
          for (int sa = 0; sa < 2; ++sa) {
            for (int sb = 0; sb < 2; ++sb) CHECK(g->diagonal_neighbor(i, a, b, sa, sb) >= 0);
          }
        }
      }
      CHECK(g->distance(i).d > 0.0);
    }
    for (int k = 0; k < g->ghost_count(); ++k) {
      const auto& gi = g->ghost(k);
      CHECK(gi.dist.d <= 0.0);
      CHECK(gi.dist.d >= -1.5 * h);
      CHECK(signed_distance(body, gi.probe1).d > 0.0);
      CHECK(signed_distance(body, gi.probe2).d > 0.0);
      double total = 0.0;
      for (double w : gi.at_probe1.weights) total += w;
      CHECK(total == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("hessian and gradient on polynomials") {
  const auto g = build_grid(unit_ball(2), 1.0 / 32);
  const Field sq = sample_field(g, [](const Vec& x) { return x(0) * x(0); });
  const Field xy = sample_field(g, [](const Vec& x) { return x(0) * x(1); });
  const Field lin = sample_field(g, [](const Vec& x) { return x(0); });
  const Field quad =
      sample_field(g, [](const Vec& x) { return 0.3 * x(0) * x(0) - 1.1 * x(0) * x(1) + 2.0 * x(1) * x(1) + x(0) - 4; });
  double worst = 0.0;
  for (int i = 0; i < g->interior_count(); ++i) {
    const Mat a = hessian_at(sq, i);
    const Mat b = hessian_at(xy, i);
    const Mat c = hessian_at(quad, i);
    worst = std::max(worst, std::abs(a(0, 0) - 2.0) + std::abs(a(0, 1)) + std::abs(a(1, 1)));
    worst = std::max(worst, std::abs(b(0, 1) - 1.0) + std::abs(b(0, 0)) + std::abs(b(1, 1)));
    worst = std::max(worst, std::abs(c(0, 0) - 0.6) + std::abs(c(0, 1) + 1.1) + std::abs(c(1, 1) - 4.0));
    const Vec d = gradient_at(lin, i);
    worst = std::max(worst, std::abs(d(0) - 1.0) + std::abs(d(1)));
    const Vec x = g->position(i);
    const Vec dq = gradient_at(quad, i);
    worst = std::max(worst, std::abs(dq(0) - (0.6 * x(0) - 1.1 * x(1) + 1.0)));
    worst = std::max(worst, std::abs(dq(1) - (-1.1 * x(0) + 4.0 * x(1))));
  }
  // Roundoff of second differences scales like eps / h^2.
  CHECK(worst < 1e-9);

  const auto g64 = build_grid(unit_ball(2), 1.0 / 64);
  const Field quartic = sample_field(g64, [](const Vec& x) { return std::pow(x(0), 4); });
  const int node = g64->unknown_at({32, 0, 0});
  CHECK(std::abs(hessian_at(quartic, node)(0, 0) - 3.0) <= 1e-2);
}

TEST_CASE("hessian converges at second order") {
  std::vector<double> errors;
  for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
    const auto g = build_grid(unit_ball(2), h);
    const Field u = sample_field(g, [](const Vec& x) { return std::sin(x(0)) * std::cos(x(1)); });
    double err = 0.0;
    for (int i = 0; i < g->interior_count(); ++i) {
      const Vec x = g->position(i);
      Mat exact(2, 2);
      exact << -std::sin(x(0)) * std::cos(x(1)), -std::cos(x(0)) * std::sin(x(1)), -std::cos(x(0)) * std::sin(x(1)),
          -std::sin(x(0)) * std::cos(x(1));
      err = std::max(err, (hessian_at(u, i) - exact).cwiseAbs().maxCoeff());
    }
    errors.push_back(err);
  }
  for (int k = 0; k + 1 < 3; ++k) {
    const double order = std::log2(errors[k] / errors[k + 1]);
    CHECK(order == doctest::Approx(2.0).epsilon(0.15));
  }
}

TEST_CASE("interpolation") {
  const double h = 1.0 / 32;
  const auto g = build_grid(unit_ball(2), h);
  const Field aff = sample_field(g, [](const Vec& x) { return x(0) + 2 * x(1); });
  const Vec centre = v2(0.25 + h / 2, -0.5 + h / 2);
  CHECK(interpolate(aff, centre) == doctest::Approx(centre(0) + 2 * centre(1)));
  const Field sq = sample_field(g, [](const Vec& x) { return x(0) * x(0); });
  const Vec mid = v2(0.25 + h / 2, 0.1);
  CHECK(std::abs(interpolate(sq, mid) - mid(0) * mid(0)) <= h * h / 4 + 1e-15);

  // Quadratic interpolation is exact on quadratics, including inward-shifted blocks.
  const Field q = sample_field(g, [](const Vec& x) { return 1.0 + x(0) - 3 * x(0) * x(1) + 0.5 * x(1) * x(1); });
  auto exact = [](const Vec& x) { return 1.0 + x(0) - 3 * x(0) * x(1) + 0.5 * x(1) * x(1); };
  for (int k = 0; k < g->ghost_count(); ++k) {
    const auto& gi = g->ghost(k);
    CHECK(std::abs(gi.at_foot.apply(q.values) - exact(gi.dist.foot)) < 1e-12);
    CHECK(std::abs(gi.at_probe1.apply(q.values) - exact(gi.probe1)) < 1e-12);
    CHECK(std::abs(gi.at_probe2.apply(q.values) - exact(gi.probe2)) < 1e-12);
  }
  CHECK(interpolate_quadratic(q, mid) == doctest::Approx(exact(mid)));

  try {
    interpolate(aff, v2(2.0, 0.0));
    FAIL("expected OutsideInterpolationDomain");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutsideInterpolationDomain);
  }
}

TEST_CASE("grids of a homotopy share lattice nodes") {
  const auto body = ellipse(1.2, 0.8);
  const auto a = build_grid(homotopy_domain(body, 0.3), 1.0 / 32);
  const auto b = build_grid(body, 1.0 / 32);
  const Vec x = a->position(a->interior_count() / 2);
  const auto k = a->lattice_index(a->interior_count() / 2);
  const int j = b->unknown_at(k);
  if (j >= 0) CHECK((b->position(j) - x).norm() == 0.0);
}

TEST_CASE("field export") {
  const auto g = build_grid(unit_ball(2), 1.0 / 16);
  const Field u = sample_field(g, [](const Vec& x) { return x(0); });
  std::ostringstream out;
  write_csv(out, u);
  const std::string s = out.str();
  CHECK(s.rfind("x,y,tag,u\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == g->unknown_count() + 1);
  Field bad = u;
  bad.values(0) = std::nan("");
  CHECK_THROWS_AS(check_finite(bad), Error);
}
