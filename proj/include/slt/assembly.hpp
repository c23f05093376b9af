#pragma once

// Discrete residual and Jacobian.
//
// Interior rows: sum_i arctan(lambda_i(D^2 u) / f) - Theta.
// Ghost rows, posed at the foot point b of the ghost node:
//   u_nu(b) + c u(b) - rhs(b)
// where u along the normal line is the quadratic through the ghost value and
// the interpolated probes u(b - h nu), u(b - 2h nu); a ghost on the boundary
// gives (3 u(b) - 4 u(b - h nu) + u(b - 2h nu)) / (2h). Here (c, rhs) = (1, phi) for Robin, (eps, phi) for the eps-regularised
// problem and (0, lambda + phi) for the classical one.

#include <Eigen/SparseCore>

#include <string_view>
#include <vector>

#include "slt/coefficient.hpp"
#include "slt/grid.hpp"
#include "slt/specops.hpp"

namespace slt {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

enum class BcMode { Robin, Epsilon, Classical };

std::string_view to_string(BcMode mode);

struct BoundaryClosure {
  BcMode mode = BcMode::Robin;
  double epsilon = 1.0;       // Epsilon mode
  double lambda_fixed = 0.0;  // Classical mode
  Coefficient phi = Coefficient::constant(0.0);
  // The unknown field is u - offset; the rows are rewritten accordingly. Used
  // along the eps-path, where u ~ -lambda/eps would otherwise swamp the
  // second differences in roundoff.
  double offset = 0.0;

  /// Coefficient c of u in u_nu + c u = rhs.
  double robin_coefficient() const;
};

struct DiscreteProblem {
  GridPtr grid;
  PhaseSpec phase;
  Coefficient f;
  BoundaryClosure bc;
  Eigen::VectorXd f_interior;  // f at interior nodes
  Eigen::VectorXd phi_foot;    // phi at ghost foot points
  Eigen::VectorXd rhs_foot;    // right-hand side of each ghost row
  // Ghost rows are affine in u and fixed by the geometry; cached once.
  std::vector<Stencil> ghost_rows;
};

DiscreteProblem make_problem(GridPtr grid, const PhaseSpec& phase, const Coefficient& f, const BoundaryClosure& bc);

struct ResidualJacobian {
  Eigen::VectorXd residual;
  SparseMatrix jacobian;
  double max_interior = 0.0;
  double max_bc = 0.0;
};

/// Residual only (the Jacobian is left empty).
ResidualJacobian residual(const DiscreteProblem& p, const Field& u);
/// Residual and Jacobian.
ResidualJacobian jacobian(const DiscreteProblem& p, const Field& u);

/// Pointwise F(D^2 u) at every interior node.
Eigen::VectorXd phase_values(const DiscreteProblem& p, const Field& u);

}  // namespace slt
