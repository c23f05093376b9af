#include "slt/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace slt {

namespace {

constexpr double kBranchMargin = 1e-6;

struct Rhs {
  const RadialProblem& p;

  // Throws BranchExit when the tan argument leaves the guarded interval.
  double operator()(double r, double psi) const {
    const double f = p.f(r);
    const double arg = p.theta - (p.n - 1) * std::atan(psi / (r * f));
    if (!(std::abs(arg) < std::numbers::pi / 2 - kBranchMargin)) {
      fail(ErrorCode::BranchExit, "radial ODE left the arctan branch at r = " + std::to_string(r));
    }
    return f * std::tan(arg);
  }
};

// Hermite cubic on [r0, r1] with values y and slopes s.
double hermite(double r0, double r1, double y0, double y1, double s0, double s1, double r) {
  const double h = r1 - r0;
  const double t = (r - r0) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * s0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * s1;
}

double hermite_slope(double r0, double r1, double y0, double y1, double s0, double s1, double r) {
  const double h = r1 - r0;
  const double t = (r - r0) / h;
  const double t2 = t * t;
  return (6 * t2 - 6 * t) / h * y0 + (3 * t2 - 4 * t + 1) * s0 + (-6 * t2 + 6 * t) / h * y1 + (3 * t2 - 2 * t) * s1;
}

}  // namespace

std::function<double(double)> radial_profile(const Coefficient& c) {
  if (!c.is_radial()) fail(ErrorCode::ConfigError, "the radial oracle needs a radial coefficient");
  const double a = c.c0();
  const double b = c.c2();
  return [a, b](double r) { return a + b * r * r; };
}

RadialSolution radial_solve(const RadialProblem& p) {
  if (p.n < 2 || p.n > 3) fail(ErrorCode::BadDimension, "radial oracle supports n = 2, 3");
  const double lo = (p.n - 2) * std::numbers::pi / 2;
  if (!(p.theta >= lo && p.theta < p.n * std::numbers::pi / 2)) {
    fail(ErrorCode::PhaseViolated, "phase is outside [(n-2)pi/2, n pi/2)");
  }
  if (!(p.radius > 0.0) || p.steps < 2) fail(ErrorCode::ConfigError, "radius and step count must be positive");
  const int m = p.steps;
  const double h = p.radius / m;
  for (int k = 0; k <= m; ++k) {
    if (!(p.f(k * h) > 0.0)) fail(ErrorCode::NonpositiveF, "f must be positive on [0, R]");
  }

  RadialSolution out;
  out.bc = p.bc;
  out.n = p.n;
  out.radius = p.radius;
  out.r.resize(m + 1);
  out.psi.resize(m + 1);
  std::vector<double> integral(m + 1);  // int_0^r psi
  std::vector<double> slope(m + 1);     // psi'
  for (int k = 0; k <= m; ++k) out.r[k] = k * h;

  // Series start: psi = c0 r + c2 r^3 with n arctan(c0/f0) = Theta and c2
  // from the r^2 term of the equation (f = f0 + f2 r^2 + ...).
  const double f0 = p.f(0.0);
  const double c0 = f0 * std::tan(p.theta / p.n);
  const double s = 1e-3 * p.radius;
  const double f2 = (p.f(s) - f0) / (s * s);
  const double c2 = p.n * c0 * f2 / ((p.n + 2) * f0);
  // The series covers r <= 0.002 R (at least one step): closer to the origin
  // the psi/r term makes the explicit steps stiff (dg/dpsi ~ 1/r).
  const int start = std::clamp(static_cast<int>(std::ceil(0.002 * m)), 1, m);
  const Rhs rhs{p};
  slope[0] = c0;
  for (int k = 1; k <= start; ++k) {
    const double r = out.r[k];
    out.psi[k] = c0 * r + c2 * r * r * r;
    integral[k] = c0 * r * r / 2 + c2 * r * r * r * r / 4;
    slope[k] = rhs(r, out.psi[k]);
  }
  for (int k = start; k < m; ++k) {
    const double r = out.r[k];
    const double y = out.psi[k];
    const double k1 = slope[k];
    const double k2 = rhs(r + h / 2, y + h / 2 * k1);
    const double k3 = rhs(r + h / 2, y + h / 2 * k2);
    const double k4 = rhs(r + h, y + h * k3);
    out.psi[k + 1] = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    // u' = psi rides along: its stages are the psi stage values.
    const double y2 = y + h / 2 * k1, y3 = y + h / 2 * k2, y4 = y + h * k3;
    integral[k + 1] = integral[k] + h / 6 * (y + 2 * y2 + 2 * y3 + y4);
    slope[k + 1] = rhs(r + h, out.psi[k + 1]);
  }

  const double psi_r = out.psi[m];
  double u_r = 0.0;
  if (p.bc == RadialBc::Classical) {
    out.lambda = psi_r - p.phi;
  } else {
    u_r = p.phi - psi_r;
  }
  out.u.resize(m + 1);
  for (int k = 0; k <= m; ++k) out.u[k] = u_r - (integral[m] - integral[k]);

  // Equation residual at interval midpoints from the Hermite interpolant of psi.
  for (int k = 0; k < m; ++k) {
    const double r = out.r[k] + h / 2;
    const double y = hermite(out.r[k], out.r[k + 1], out.psi[k], out.psi[k + 1], slope[k], slope[k + 1], r);
    const double dy = hermite_slope(out.r[k], out.r[k + 1], out.psi[k], out.psi[k + 1], slope[k], slope[k + 1], r);
    const double f = p.f(r);
    const double res = std::atan(dy / f) + (p.n - 1) * std::atan(y / (r * f)) - p.theta;
    out.midpoint_residual = std::max(out.midpoint_residual, std::abs(res));
  }
  return out;
}

double RadialSolution::u_at(double radius) const {
  const int m = static_cast<int>(r.size()) - 1;
  const double h = r[1] - r[0];
  const int k = std::clamp(static_cast<int>(radius / h), 0, m - 1);
  return hermite(r[k], r[k + 1], u[k], u[k + 1], psi[k], psi[k + 1], radius);
}

double RadialSolution::psi_at(double radius) const {
  const int m = static_cast<int>(r.size()) - 1;
  const double h = r[1] - r[0];
  const int k = std::clamp(static_cast<int>(radius / h), 0, m - 1);
  // Linear is enough here: psi is only used for reporting.
  const double t = (radius - r[k]) / h;
  return (1 - t) * psi[k] + t * psi[k + 1];
}

OracleComparison compare(const RadialSolution& rs, const Field& u, std::optional<double> lambda_grid) {
  const Grid& g = *u.grid;
  const ConvexBody& body = g.body();
  if (g.dim() != rs.n || !body.is_ball() || std::abs(body.radius() - rs.radius) > 1e-12) {
    fail(ErrorCode::DomainMismatch, "grid domain is not the oracle's ball");
  }
  const int ni = g.interior_count();
  Eigen::VectorXd ref(ni), val = u.values.head(ni);
  for (int i = 0; i < ni; ++i) ref(i) = rs.u_at(g.position(i).norm());
  if (rs.bc == RadialBc::Classical) {
    ref.array() -= ref.mean();
    val.array() -= val.mean();
  }
  const Eigen::VectorXd e = val - ref;
  OracleComparison out;
  out.max_error = e.lpNorm<Eigen::Infinity>();
  out.l2_error = std::sqrt(std::pow(g.spacing(), g.dim()) * e.squaredNorm());
  if (lambda_grid) {
    out.has_lambda = true;
    out.lambda_error = std::abs(*lambda_grid - rs.lambda);
  }
  return out;
}

void write_csv(std::ostream& out, const RadialSolution& rs) {
  out << "r,psi,u\n";
  out.precision(17);
  for (std::size_t k = 0; k < rs.r.size(); ++k) out << rs.r[k] << ',' << rs.psi[k] << ',' << rs.u[k] << '\n';
}

}  // namespace slt
