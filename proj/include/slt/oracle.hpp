#pragma once

// Radially symmetric reference solutions on a ball. With psi = u'(r) the
// Hessian has eigenvalues psi' (once) and psi/r (n-1 times), so the equation
// becomes the scalar ODE
//   psi' = f tan(Theta - (n-1) arctan(psi / (r f))),   psi(0) = 0,
// integrated here with the classical 4th-order Runge-Kutta scheme.

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "slt/coefficient.hpp"
#include "slt/grid.hpp"

namespace slt {

enum class RadialBc { Robin, Classical };

struct RadialProblem {
  int n = 2;
  double theta = 0.0;
  double radius = 1.0;
  std::function<double(double)> f = [](double) { return 1.0; };
  RadialBc bc = RadialBc::Robin;
  double phi = 0.0;  // boundary value phi(R)
  int steps = 10000;
};

/// Profile r -> c(r e_1) of a radial coefficient; ConfigError for sampled data.
std::function<double(double)> radial_profile(const Coefficient& c);

struct RadialSolution {
  std::vector<double> r;
  std::vector<double> psi;
  std::vector<double> u;  // Robin: fixed by the boundary condition; classical: u(R) = 0
  double lambda = 0.0;    // classical mode only
  bool branch_ok = true;
  double midpoint_residual = 0.0;  // max |F - Theta| at interval midpoints
  RadialBc bc = RadialBc::Robin;
  int n = 2;
  double radius = 1.0;

  /// Cubic Hermite reconstruction between samples (psi is the slope of u).
  double u_at(double radius) const;
  double psi_at(double radius) const;
};

RadialSolution radial_solve(const RadialProblem& p);

struct OracleComparison {
  double max_error = 0.0;  // over interior nodes
  double l2_error = 0.0;   // sqrt(h^n sum e^2)
  double lambda_error = 0.0;
  bool has_lambda = false;
};

/// Compares a grid field with the radial profile at the node radii. Classical
/// solutions are compared after mean-centering both over the interior nodes.
OracleComparison compare(const RadialSolution& rs, const Field& u, std::optional<double> lambda_grid = std::nullopt);

/// Writes "r,psi,u" rows.
void write_csv(std::ostream& out, const RadialSolution& rs);

}  // namespace slt
