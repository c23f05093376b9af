#include <doctest.h>

#include <cmath>
#include <numbers>
#include <limits>
#include <random>
#include <set>

#include "slt/assembly.hpp"

using namespace slt;
using std::numbers::pi;

namespace {

ConvexBody body_of(int dim, BodyKind kind = BodyKind::Ball) {
  DomainDescriptor d;
  d.dim = dim;
  d.kind = kind;
  if (kind == BodyKind::Ellipsoid) d.axes = dim == 2 ? std::vector<double>{1.2, 0.8} : std::vector<double>{1.0, 0.8, 0.7};
  return make_domain(d);
}

BoundaryClosure closure(BcMode mode, double phi, double eps = 1.0, double lambda = 0.0) {
  BoundaryClosure bc;
  bc.mode = mode;
  bc.epsilon = eps;
  bc.lambda_fixed = lambda;
  bc.phi = Coefficient::constant(phi);
  return bc;
}

double half_r2(const Vec& x) { return 0.5 * x.squaredNorm(); }

}  // namespace

TEST_CASE("manufactured quadratic is a discrete solution") {
  const auto g = build_grid(body_of(2), 1.0 / 32);
  const auto p = make_problem(g, phase_classify(pi / 2, 2), Coefficient::constant(1.0), closure(BcMode::Robin, 1.5));
  const Field u = sample_field(g, half_r2);
  const auto r = residual(p, u);
  CHECK(r.max_interior < 1e-12);
  CHECK(r.max_bc < 1e-12);
  CHECK(r.jacobian.size() == 0);
}

TEST_CASE("zero field gives residual -Theta") {
  const auto g = build_grid(body_of(2), 1.0 / 16);
  const auto p = make_problem(g, phase_classify(pi / 2, 2), Coefficient::constant(1.0), closure(BcMode::Robin, 1.5));
  const Field u = sample_field(g, [](const Vec&) { return 0.0; });
  const auto r = residual(p, u);
  for (int i = 0; i < g->interior_count(); ++i) CHECK(r.residual(i) == doctest::Approx(-pi / 2));
  for (int k = 0; k < g->ghost_count(); ++k) CHECK(r.residual(g->interior_count() + k) == doctest::Approx(-1.5));
}

TEST_CASE("classical closure with the radial ansatz") {
  const auto g = build_grid(body_of(2), 1.0 / 32);
  const auto p =
      make_problem(g, phase_classify(pi / 2, 2), Coefficient::constant(1.0), closure(BcMode::Classical, 0.0, 1.0, 1.0));
  const auto r = residual(p, sample_field(g, half_r2));
  CHECK(r.max_bc < 1e-12);
  // The coefficient of u(b) in a classical row is 3/(2h), independent of u.
  const auto& row = p.ghost_rows[0];
  double foot_weight = 0.0;
  for (double w : g->ghost(0).at_foot.weights) foot_weight += w;
  double total = 0.0;
  for (double w : row.weights) total += w;
  CHECK(foot_weight == doctest::Approx(1.0));
  CHECK(std::abs(total) < 1e-9);  // derivative stencil annihilates constants
  const auto j1 = jacobian(p, sample_field(g, half_r2));
  const auto j2 = jacobian(p, sample_field(g, [](const Vec& x) { return std::exp(x(0)) + x(1) * x(1); }));
  const int row_index = g->interior_count();
  for (SparseMatrix::InnerIterator a(j1.jacobian, row_index), b(j2.jacobian, row_index); a; ++a, ++b) {
    CHECK(a.value() == b.value());
  }
}

TEST_CASE("epsilon closure and the offset rewrite") {
  const auto g = build_grid(body_of(2), 1.0 / 32);
  const double eps = 0.25;
  // u = |x|^2/2 + k solves u_nu + eps u = phi with phi = 1 + eps (1/2 + k).
  const double k = 3.0;
  const double phi = 1.0 + eps * (0.5 + k);
  auto bc = closure(BcMode::Epsilon, phi, eps);
  const auto p = make_problem(g, phase_classify(pi / 2, 2), Coefficient::constant(1.0), bc);
  CHECK(residual(p, sample_field(g, [&](const Vec& x) { return half_r2(x) + k; })).max_bc < 1e-12);
  bc.offset = k;
  const auto q = make_problem(g, phase_classify(pi / 2, 2), Coefficient::constant(1.0), bc);
  CHECK(residual(q, sample_field(g, half_r2)).max_bc < 1e-12);
}

TEST_CASE("Jacobian diagonal at the quadratic") {
  const double h = 1.0 / 32;
  const auto g = build_grid(body_of(2), h);
  const auto p = make_problem(g, phase_classify(pi / 2, 2), Coefficient::constant(1.0), closure(BcMode::Robin, 1.5));
  const auto j = jacobian(p, sample_field(g, half_r2));
  const int centre = g->unknown_at({0, 0, 0});
  CHECK(j.jacobian.coeff(centre, centre) == doctest::Approx(0.5 * (-4.0 / (h * h))));
  CHECK(j.jacobian.coeff(centre, g->axis_neighbor(centre, 0, 1)) == doctest::Approx(0.5 / (h * h)));
  CHECK(j.jacobian.coeff(centre, g->diagonal_neighbor(centre, 0, 1, 1, 1)) == 0.0);
}

TEST_CASE("Jacobian matches directional finite differences") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  struct Case {
    int dim;
    BodyKind kind;
    BcMode mode;
    double theta;
  };
  const Case cases[] = {
      {2, BodyKind::Ball, BcMode::Robin, pi / 2},        {2, BodyKind::Ellipsoid, BcMode::Epsilon, pi / 2 + 0.3},
      {2, BodyKind::Ellipsoid, BcMode::Classical, 0.0},  {3, BodyKind::Ball, BcMode::Classical, 3 * pi / 4},
      {3, BodyKind::Ellipsoid, BcMode::Robin, pi / 2},   {3, BodyKind::Ball, BcMode::Epsilon, 3 * pi / 4},
  };
  for (const auto& c : cases) {
    const auto g = build_grid(body_of(c.dim, c.kind), c.dim == 2 ? 1.0 / 16 : 1.0 / 12);
    const auto p = make_problem(g, phase_classify(c.theta, c.dim), Coefficient::quadratic(1.0, 0.5),
                                closure(c.mode, 0.3, 0.125, 0.7));
    // Smooth convex field plus small noise.
    Field u = sample_field(g, [&](const Vec& x) { return half_r2(x) + 0.1 * std::sin(2 * x(0)) * x(1); });
    for (int i = 0; i < u.values.size(); ++i) u.values(i) += 1e-4 * unit(rng);
    Eigen::VectorXd v(u.values.size());
    for (int i = 0; i < v.size(); ++i) v(i) = unit(rng);
    const auto j = jacobian(p, u);
    const double t = 1e-6 * (1.0 + u.values.lpNorm<Eigen::Infinity>());
    const auto rp = residual(p, Field{g, u.values + t * v});
    const auto rm = residual(p, Field{g, u.values - t * v});
    const Eigen::VectorXd fd = (rp.residual - rm.residual) / (2 * t);
    const Eigen::VectorXd jv = j.jacobian * v;
    CHECK((fd - jv).lpNorm<Eigen::Infinity>() <= 1e-6 * std::max(1.0, jv.lpNorm<Eigen::Infinity>()));
  }
}

TEST_CASE("quadratic exactness of the interior residual") {
  const auto g = build_grid(body_of(3), 1.0 / 10);
  const auto p = make_problem(g, phase_classify(pi / 2, 3), Coefficient::constant(2.0), closure(BcMode::Robin, 0.0));
  Mat a(3, 3);
  a << 2.0, 0.3, -0.1, 0.3, 1.0, 0.2, -0.1, 0.2, -0.4;
  const Field u = sample_field(g, [&](const Vec& x) { return 0.5 * x.dot(a * x) + x(2); });
  const double expected = theta_value(eig_sym(a), 2.0) - pi / 2;
  const auto r = residual(p, u);
  for (int i = 0; i < g->interior_count(); ++i) CHECK(std::abs(r.residual(i) - expected) < 1e-9);
}

TEST_CASE("row pattern matches the declared dependencies") {
  const auto g = build_grid(body_of(2, BodyKind::Ellipsoid), 1.0 / 16);
  const auto p = make_problem(g, phase_classify(pi / 2, 2), Coefficient::constant(1.0), closure(BcMode::Robin, 1.5));
  const auto j = jacobian(p, sample_field(g, half_r2));
  for (int i = 0; i < g->interior_count(); ++i) {
    std::set<int> allowed{i};
    for (int a = 0; a < 2; ++a) {
      allowed.insert(g->axis_neighbor(i, a, 0));
      allowed.insert(g->axis_neighbor(i, a, 1));
    }
    for (int sa = 0; sa < 2; ++sa) {
      for (int sb = 0; sb < 2; ++sb) allowed.insert(g->diagonal_neighbor(i, 0, 1, sa, sb));
    }
    for (SparseMatrix::InnerIterator it(j.jacobian, i); it; ++it) CHECK(allowed.count(static_cast<int>(it.col())) == 1);
  }
  for (int k = 0; k < g->ghost_count(); ++k) {
    const auto& gi = g->ghost(k);
    std::set<int> allowed{g->interior_count() + k};
    for (const auto* s : { &gi.at_probe1, &gi.at_probe2}) allowed.insert(s->nodes.begin(), s->nodes.end());
    for (SparseMatrix::InnerIterator it(j.jacobian, g->interior_count() + k); it; ++it) {
      CHECK(allowed.count(static_cast<int>(it.col())) == 1);
    }
  }
}

TEST_CASE("problem validation") {
  const auto g = build_grid(body_of(2), 1.0 / 16);
  CHECK_THROWS_AS(make_problem(g, phase_classify(pi, 2), Coefficient::constant(1.0), closure(BcMode::Robin, 0.0)),
                  Error);
  CHECK_THROWS_AS(make_problem(g, phase_classify(pi / 2, 2), Coefficient::constant(-1.0), closure(BcMode::Robin, 0.0)),
                  Error);
  Field bad = sample_field(g, half_r2);
  bad.values(3) = std::numeric_limits<double>::infinity();
  const auto p = make_problem(g, phase_classify(pi / 2, 2), Coefficient::constant(1.0), closure(BcMode::Robin, 0.0));
  try {
    residual(p, bad);
    FAIL("expected NonFiniteField");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteField);
  }
}
