#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "slt/oracle.hpp"
#include "slt/solver.hpp"

using namespace slt;
using std::numbers::pi;

namespace {

double closed_form_psi(double r) { return std::sqrt(2.0 / 3.0 * (std::pow(1 + r * r / 2, 3) - 1)); }

RadialProblem closed_form_problem(int steps) {
  RadialProblem p;
  p.n = 2;
  p.theta = pi / 2;
  p.f = [](double r) { return 1 + r * r / 2; };
  p.bc = RadialBc::Classical;
  p.steps = steps;
  return p;
}

}  // namespace

TEST_CASE("linear profile is a fixed point in 3D") {
  RadialProblem p;
  p.n = 3;
  p.theta = 3 * pi / 4;
  p.bc = RadialBc::Classical;
  const auto s = radial_solve(p);
  for (std::size_t k = 0; k < s.r.size(); k += 97) CHECK(std::abs(s.psi[k] - s.r[k]) < 1e-12);
  CHECK(s.lambda == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.midpoint_residual <= 1e-10);
  CHECK(s.branch_ok);
}

TEST_CASE("closed form for f = 1 + r^2/2") {
  const auto s = radial_solve(closed_form_problem(10000));
  CHECK(std::abs(s.lambda - std::sqrt(19.0 / 12.0)) < 1e-12);
  for (std::size_t k = 0; k < s.r.size(); k += 101) CHECK(std::abs(s.psi[k] - closed_form_psi(s.r[k])) < 1e-12);
  CHECK(s.midpoint_residual <= 1e-10);
  // u(r) = -int_r^1 psi, checked against Simpson on the closed form.
  const int m = 2000;
  double integral = 0.0;
  for (int k = 0; k < m; ++k) {
    const double a = 0.5 + 0.5 * k / m, b = a + 0.5 / m;
    integral += (b - a) / 6 * (closed_form_psi(a) + 4 * closed_form_psi((a + b) / 2) + closed_form_psi(b));
  }
  CHECK(std::abs(s.u_at(0.5) + integral) < 1e-10);
}

TEST_CASE("robin quadratic profile") {
  RadialProblem p;
  p.theta = pi / 2;
  p.phi = 1.5;
  const auto s = radial_solve(p);
  CHECK(s.u.back() == doctest::Approx(0.5).epsilon(1e-12));
  for (double r : {0.0, 0.3, 0.77, 1.0}) CHECK(std::abs(s.u_at(r) - r * r / 2) < 1e-12);
}

TEST_CASE("fourth-order convergence") {
  const double exact = std::sqrt(19.0 / 12.0);
  const double e1 = std::abs(radial_solve(closed_form_problem(40)).psi.back() - exact);
  const double e2 = std::abs(radial_solve(closed_form_problem(80)).psi.back() - exact);
  const double e3 = std::abs(radial_solve(closed_form_problem(160)).psi.back() - exact);
  CHECK(e1 / e2 == doctest::Approx(16.0).epsilon(0.15));
  CHECK(e2 / e3 == doctest::Approx(16.0).epsilon(0.15));
}

TEST_CASE("profile reproduces the phase through the spectral operator") {
  for (int n : {2, 3}) {
    for (double offset : {0.0, 0.2, 1.0}) {
      RadialProblem p;
      p.n = n;
      p.theta = (n - 2) * pi / 2 + offset;
      p.f = [](double r) { return 0.5 + 0.8 * r * r; };
      p.phi = 0.3;
      const auto s = radial_solve(p);
      CHECK(s.midpoint_residual <= 1e-10);
      const double h = s.r[1] - s.r[0];
      for (std::size_t k = 50; k + 1 < s.r.size(); k += 250) {
        const double r = s.r[k];
        const double dpsi = (s.psi[k + 1] - s.psi[k - 1]) / (2 * h);
        const double exact_slope = (s.psi_at(r + 1e-9) - s.psi_at(r - 1e-9)) / 2e-9;
        Mat m = Mat::Zero(n, n);
        m(0, 0) = std::abs(exact_slope - dpsi) < 1e-6 ? exact_slope : dpsi;
        for (int i = 1; i < n; ++i) m(i, i) = s.psi[k] / r;
        CHECK(std::abs(theta_value(eig_sym(m), p.f(r)) - p.theta) <= 1e-6);
      }
    }
  }
}

TEST_CASE("branch exit and invalid input") {
  RadialProblem p;
  p.n = 3;
  p.theta = pi / 2;
  p.f = [](double r) { return std::exp(-40 * r); };
  try {
    radial_solve(p);
    FAIL("expected BranchExit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BranchExit);
  }
  RadialProblem q;
  q.f = [](double r) { return 0.5 - r; };
  CHECK_THROWS_AS(radial_solve(q), Error);
  q.f = [](double) { return 1.0; };
  q.theta = pi;
  CHECK_THROWS_AS(radial_solve(q), Error);
  CHECK_THROWS_AS(radial_profile(Coefficient::samples({2, {{0.0, 1.0}, {0.0, 1.0}}, {1, 1, 1, 1}})), Error);
  CHECK(radial_profile(Coefficient::quadratic(1.0, 0.5).affine(0.5, 0.5))(1.0) == doctest::Approx(1.25));
}

TEST_CASE("comparison with grid fields") {
  DomainDescriptor d;
  d.dim = 2;
  const auto g = build_grid(make_domain(d), 1.0 / 32);
  const auto s = radial_solve(closed_form_problem(10000));
  const Field self = sample_field(g, [&](const Vec& x) { return s.u_at(x.norm()) + 3.0; });
  const auto c = compare(s, self, s.lambda);
  CHECK(c.max_error < 1e-14);
  CHECK(c.has_lambda);
  CHECK(c.lambda_error == 0.0);

  d.kind = BodyKind::Ellipsoid;
  d.axes = {1.2, 0.8};
  const auto ge = build_grid(make_domain(d), 1.0 / 32);
  try {
    compare(s, sample_field(ge, [](const Vec&) { return 0.0; }));
    FAIL("expected DomainMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DomainMismatch);
  }
}

TEST_CASE("manufactured grid solve against the oracle") {
  ProblemSpec spec;
  DomainDescriptor d;
  d.dim = 2;
  spec.body = make_domain(d);
  spec.phase = phase_classify(pi / 2, 2);
  spec.bc.phi = Coefficient::constant(1.5);
  spec.h = 1.0 / 64;
  const auto r = homotopy_solve(spec, {}, {});
  RadialProblem p;
  p.theta = pi / 2;
  p.phi = 1.5;
  CHECK(compare(radial_solve(p), r.u).max_error <= 5e-3);
}

TEST_CASE("profile CSV") {
  std::ostringstream os;
  write_csv(os, radial_solve(closed_form_problem(4)));
  const std::string s = os.str();
  CHECK(s.rfind("r,psi,u\n0,0,", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 6);
}
