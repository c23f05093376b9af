#include "slt/assembly.hpp"

#include <cmath>

namespace slt {

namespace {

// Per-interior-row data computed in parallel and gathered in node order.
struct InteriorRow {
  double residual = 0.0;
  Mat grad;
};

void assemble(const DiscreteProblem& p, const Field& u, bool with_jacobian, ResidualJacobian& out) {
  if (u.grid != p.grid) fail(ErrorCode::DomainMismatch, "field and problem live on different grids");
  check_finite(u);
  const Grid& g = *p.grid;
  const int n = g.dim();
  const int ni = g.interior_count();
  const int total = g.unknown_count();
  out.residual.resize(total);

  std::vector<InteriorRow> rows(ni);
  parallel_for(0, ni, [&](std::ptrdiff_t i) {
    const auto sp = eig_sym(hessian_at(u, static_cast<int>(i)));
    const double f = p.f_interior(i);
    rows[i].residual = theta_value(sp, f) - p.phase.theta;
    if (with_jacobian) rows[i].grad = gradient_ambient(sp, f);
  });

  out.max_interior = 0.0;
  for (int i = 0; i < ni; ++i) {
    out.residual(i) = rows[i].residual;
    out.max_interior = std::max(out.max_interior, std::abs(rows[i].residual));
  }
  out.max_bc = 0.0;
  for (int k = 0; k < g.ghost_count(); ++k) {
    const double r = p.ghost_rows[k].apply(u.values) - p.rhs_foot(k);
    out.residual(ni + k) = r;
    out.max_bc = std::max(out.max_bc, std::abs(r));
  }
  if (!with_jacobian) {
    out.jacobian.resize(0, 0);
    return;
  }

  const double inv_h2 = 1.0 / (g.spacing() * g.spacing());
  std::vector<Eigen::Triplet<double, int>> trip;
  trip.reserve(static_cast<std::size_t>(ni) * (1 + g.stencil_width()) + 27 * 3 * g.ghost_count());
  for (int i = 0; i < ni; ++i) {
    const Mat& G = rows[i].grad;
    trip.emplace_back(i, i, -2.0 * G.trace() * inv_h2);
    for (int a = 0; a < n; ++a) {
      trip.emplace_back(i, g.axis_neighbor(i, a, 0), G(a, a) * inv_h2);
      trip.emplace_back(i, g.axis_neighbor(i, a, 1), G(a, a) * inv_h2);
      for (int b = a + 1; b < n; ++b) {
        // d/du of G_ab (u_ab + u_ba) with the 4-point cross.
        const double w = 2.0 * G(a, b) * inv_h2 / 4.0;
        trip.emplace_back(i, g.diagonal_neighbor(i, a, b, 1, 1), w);
        trip.emplace_back(i, g.diagonal_neighbor(i, a, b, 0, 0), w);
        trip.emplace_back(i, g.diagonal_neighbor(i, a, b, 1, 0), -w);
        trip.emplace_back(i, g.diagonal_neighbor(i, a, b, 0, 1), -w);
      }
    }
  }
  for (int k = 0; k < g.ghost_count(); ++k) {
    const Stencil& s = p.ghost_rows[k];
    for (std::size_t j = 0; j < s.nodes.size(); ++j) trip.emplace_back(ni + k, s.nodes[j], s.weights[j]);
  }
  out.jacobian.resize(total, total);
  out.jacobian.setFromTriplets(trip.begin(), trip.end());
}

}  // namespace

std::string_view to_string(BcMode mode) {
  switch (mode) {
    case BcMode::Robin: return "robin";
    case BcMode::Epsilon: return "epsilon";
    case BcMode::Classical: return "classical";
  }
  return "robin";
}

double BoundaryClosure::robin_coefficient() const {
  switch (mode) {
    case BcMode::Robin: return 1.0;
    case BcMode::Epsilon: return epsilon;
    case BcMode::Classical: return 0.0;
  }
  return 0.0;
}

DiscreteProblem make_problem(GridPtr grid, const PhaseSpec& phase, const Coefficient& f, const BoundaryClosure& bc) {
  if (phase.cls == PhaseClass::Invalid) fail(ErrorCode::PhaseViolated, "phase is outside [(n-2)pi/2, n pi/2)");
  if (phase.n != grid->dim()) fail(ErrorCode::BadDimension, "phase dimension does not match the grid");
  if (bc.mode == BcMode::Epsilon && !(bc.epsilon > 0.0)) fail(ErrorCode::ConfigError, "epsilon must be positive");
  DiscreteProblem p;
  p.grid = std::move(grid);
  p.phase = phase;
  p.f = f;
  p.bc = bc;
  const Grid& g = *p.grid;
  const int ni = g.interior_count();
  const int ng = g.ghost_count();
  p.f_interior.resize(ni);
  for (int i = 0; i < ni; ++i) {
    p.f_interior(i) = f.value(g.position(i));
    if (!(p.f_interior(i) > 0.0)) fail(ErrorCode::NonpositiveF, "f must be positive on the domain");
  }
  const double c = bc.robin_coefficient();
  const double h = g.spacing();
  p.phi_foot.resize(ng);
  p.rhs_foot.resize(ng);
  p.ghost_rows.resize(ng);
  for (int k = 0; k < ng; ++k) {
    const GhostInfo& gi = g.ghost(k);
    if (!(f.value(gi.dist.foot) > 0.0)) fail(ErrorCode::NonpositiveF, "f must be positive on the boundary");
    p.phi_foot(k) = bc.phi.value(gi.dist.foot);
    const double lambda = bc.mode == BcMode::Classical ? bc.lambda_fixed : 0.0;
    p.rhs_foot(k) = p.phi_foot(k) + lambda - c * bc.offset;

    Stencil& row = p.ghost_rows[k];
    auto add = [&](const Stencil& s, double scale) {
      for (std::size_t j = 0; j < s.nodes.size(); ++j) {
        row.nodes.push_back(s.nodes[j]);
        row.weights.push_back(scale * s.weights[j]);
      }
    };
    // Quadratic along the normal line through the ghost itself (outward
    // coordinate s = delta) and the two probes (s = -h, -2h), evaluated at the
    // foot s = 0. For delta = 0 this is the usual (3, -4, 1)/(2h) formula.
    // Interpolating u(b) instead leaves some ghost rows with almost no weight
    // on their own unknown and Newton steps then oscillate on the grid scale.
    const double delta = -gi.dist.d;
    const double q = (delta + h) * (delta + 2 * h);
    const double self = 3 * h / q + c * 2 * h * h / q;
    const double w1 = -(2 * h - delta) / ((h + delta) * h) + c * 2 * delta / (h + delta);
    const double w2 = (h - delta) / (h * (2 * h + delta)) - c * delta / (2 * h + delta);
    row.nodes.push_back(ni + k);
    row.weights.push_back(self);
    add(gi.at_probe1, w1);
    add(gi.at_probe2, w2);
  }
  return p;
}

ResidualJacobian residual(const DiscreteProblem& p, const Field& u) {
  ResidualJacobian out;
  assemble(p, u, false, out);
  return out;
}

ResidualJacobian jacobian(const DiscreteProblem& p, const Field& u) {
  ResidualJacobian out;
  assemble(p, u, true, out);
  return out;
}

Eigen::VectorXd phase_values(const DiscreteProblem& p, const Field& u) {
  const int ni = p.grid->interior_count();
  Eigen::VectorXd v(ni);
  parallel_for(0, ni, [&](std::ptrdiff_t i) {
    v(i) = theta_value(eig_sym(hessian_at(u, static_cast<int>(i))), p.f_interior(i));
  });
  return v;
}

}  // namespace slt
