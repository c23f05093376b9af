#include "slt/solver.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace slt {

namespace {

bool solver_failure(ErrorCode c) {
  switch (c) {
    case ErrorCode::LinearSolveFailed:
    case ErrorCode::LineSearchStalled:
    case ErrorCode::MaxIterExceeded:
    case ErrorCode::PhaseGuardViolated:
    case ErrorCode::NonFiniteField:
      return true;
    default:
      return false;
  }
}

bool is_unit_ball(const ConvexBody& b) { return b.is_ball() && b.radius() == 1.0; }

double max_gradient(const Field& u) {
  double m = 0.0;
  for (int i = 0; i < u.grid->interior_count(); ++i) m = std::max(m, gradient_at(u, i).norm());
  return m;
}

}  // namespace

Eigen::VectorXd LinearSolver::solve(const SparseMatrix& jac, const Eigen::VectorXd& rhs) {
  const bool direct = kind_ == LinearSolverKind::Direct ||
                      (kind_ == LinearSolverKind::Auto && jac.rows() < kIterativeThreshold);
  last_direct_ = direct;
  const bool same_pattern = jac.rows() == pattern_rows_ && jac.nonZeros() == pattern_nnz_;
  pattern_rows_ = jac.rows();
  pattern_nnz_ = jac.nonZeros();
  Eigen::VectorXd x;
  if (direct) {
    const ColMatrix a = jac;
    if (!lu_ || !same_pattern) {
      lu_ = std::make_unique<Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>>>();
      lu_->analyzePattern(a);
    }
    lu_->factorize(a);
    if (lu_->info() != Eigen::Success) fail(ErrorCode::LinearSolveFailed, "sparse LU factorization failed");
    x = lu_->solve(rhs);
    last_iterations_ = 0;
  } else {
    auto attempt = [&](bool refresh, double droptol, int fill) {
      if (!krylov_ || refresh) {
        krylov_ = std::make_unique<Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<double>>>();
        krylov_->preconditioner().setDroptol(droptol);
        krylov_->preconditioner().setFillfactor(fill);
        krylov_->compute(jac);
      }
      Eigen::Index iters = 1000;
      double tol = 1e-13;
      x = Eigen::VectorXd::Zero(rhs.size());
      const bool ok = Eigen::internal::bicgstab(jac, rhs, x, krylov_->preconditioner(), iters, tol);
      last_iterations_ = static_cast<int>(iters);
      return ok && tol <= 1e-10 && x.allFinite();
    };
    // A stale preconditioner is kept while it still converges quickly.
    bool ok = krylov_ && same_pattern && attempt(false, 1e-3, 4) && last_iterations_ <= 80;
    if (!ok) ok = attempt(true, 1e-3, 4);
    if (!ok) ok = attempt(true, 1e-5, 10);
    if (!ok) fail(ErrorCode::LinearSolveFailed, "BiCGSTAB did not reach the linear tolerance");
  }
  if (!x.allFinite()) fail(ErrorCode::LinearSolveFailed, "linear solve produced non-finite values");
  return x;
}

NewtonResult newton_solve(const DiscreteProblem& p, const Field& u0, const NewtonConfig& cfg, LinearSolver* linear) {
  LinearSolver local(cfg.linear);
  LinearSolver& ls = linear ? *linear : local;
  NewtonResult out{u0, {}};
  Field& u = out.u;
  NewtonReport& rep = out.report;
  check_finite(u);
  ResidualJacobian cur = residual(p, u);
  double r = cur.residual.lpNorm<Eigen::Infinity>();
  rep.residual_history.push_back(r);
  for (int it = 0;; ++it) {
    if (r <= cfg.tol_residual) {
      rep.converged = true;
      break;
    }
    if (it >= cfg.max_iter) fail(ErrorCode::MaxIterExceeded, "Newton did not converge in max_iter steps");
    cur = jacobian(p, u);
    const Eigen::VectorXd delta = ls.solve(cur.jacobian, -cur.residual);
    rep.linear_iterations.push_back(ls.last_iterations());
    const double merit = cur.residual.norm();
    double alpha = 1.0;
    bool accepted = false;
    bool guard_ok = false;
    while (alpha >= cfg.min_step) {
      Field trial{u.grid, u.values + alpha * delta};
      if (trial.values.allFinite()) {
        ResidualJacobian rt = residual(p, trial);
        if (rt.max_interior < cfg.phase_guard) {
          guard_ok = true;
          if (rt.residual.norm() <= (1.0 - 1e-4 * alpha) * merit ||
              rt.residual.lpNorm<Eigen::Infinity>() <= cfg.tol_residual) {
            u = std::move(trial);
            cur = std::move(rt);
            accepted = true;
            break;
          }
        }
      }
      alpha *= cfg.backtrack;
    }
    if (!accepted) {
      if (!guard_ok) fail(ErrorCode::PhaseGuardViolated, "every damped step leaves the phase guard");
      fail(ErrorCode::LineSearchStalled, "backtracking fell below the minimum step");
    }
    rep.step_history.push_back(alpha);
    rep.iterations = it + 1;
    r = cur.residual.lpNorm<Eigen::Infinity>();
    rep.residual_history.push_back(r);
  }

  const auto& h = rep.residual_history;
  // Residuals below this are roundoff in the 1/h^2 difference quotients.
  const double spacing = u.grid->spacing();
  const double floor = 10 * std::numeric_limits<double>::epsilon() * (1.0 + u.values.lpNorm<Eigen::Infinity>()) /
                       (spacing * spacing);
  bool tail = false;
  bool quadratic = true;
  for (std::size_t k = 0; k + 1 < h.size(); ++k) {
    if (h[k] > 1e-2 || h[k] == 0.0) continue;
    tail = true;
    if (h[k + 1] <= floor) continue;
    const double ratio = h[k + 1] / (h[k] * h[k]);
    rep.tail_ratio = std::max(rep.tail_ratio, ratio);
    if (ratio > 1e4) quadratic = false;
  }
  rep.quadratic_tail = tail && quadratic;
  return out;
}

Field initial_guess_ball(const GridPtr& grid, const PhaseSpec& phase, const BoundaryClosure& bc) {
  if (!is_unit_ball(grid->body())) fail(ErrorCode::NotBall, "initial guess needs the unit ball");
  if (!bc.phi.is_constant()) fail(ErrorCode::NotBall, "initial guess needs constant boundary data");
  const double c = std::tan(phase.theta / phase.n);
  const double cr = bc.robin_coefficient();
  const double lambda = bc.mode == BcMode::Classical ? bc.lambda_fixed : 0.0;
  const double rhs = bc.phi.c0() + lambda - cr * bc.offset;
  // u_nu + cr u = rhs on r = 1 with u = c r^2/2 + k.
  const double k = cr == 0.0 ? 0.0 : (rhs - c) / cr - c / 2;
  return sample_field(grid, [&](const Vec& x) { return c * x.squaredNorm() / 2 + k; });
}

Field transfer(const Field& from, const GridPtr& to) {
  if (from.grid == to) return from;
  const Grid& src = *from.grid;
  Field out{to, Eigen::VectorXd(to->unknown_count())};
  const double h = src.spacing();
  for (int i = 0; i < to->unknown_count(); ++i) {
    const Vec x = to->position(i);
    try {
      out.values(i) = interpolate(from, x);
      continue;
    } catch (const Error&) {
    }
    // Outside the old interpolation domain: second-order Taylor extension from
    // the nearest old interior node. A flat (clamped) extension puts kinks into
    // the band of new nodes and the warm start then fails the phase guard.
    std::array<int, kMaxDim> centre{};
    for (int a = 0; a < src.dim(); ++a) centre[a] = static_cast<int>(std::lround(x(a) / h));
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int radius = 1; radius <= 8 && best < 0; ++radius) {
      const int span = 2 * radius + 1;
      int cells = 1;
      for (int a = 0; a < src.dim(); ++a) cells *= span;
      for (int c = 0; c < cells; ++c) {
        std::array<int, kMaxDim> k = centre;
        int code = c;
        for (int a = 0; a < src.dim(); ++a) {
          k[a] += code % span - radius;
          code /= span;
        }
        const int j = src.unknown_at(k);
        if (j < 0 || !src.is_interior(j)) continue;
        const double dist = (src.position(j) - x).squaredNorm();
        if (dist < best_dist) {
          best_dist = dist;
          best = j;
        }
      }
    }
    if (best < 0) {
      for (int j = 0; j < src.interior_count(); ++j) {
        const double dist = (src.position(j) - x).squaredNorm();
        if (dist < best_dist) {
          best_dist = dist;
          best = j;
        }
      }
    }
    const Vec dx = x - src.position(best);
    out.values(i) = from.values(best) + gradient_at(from, best).dot(dx) + 0.5 * dx.dot(hessian_at(from, best) * dx);
  }
  return out;
}

Eigen::VectorXd smooth_perturbation(const Grid& grid, double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_real_distribution<double> freq(0.5, 3.0);
  std::uniform_real_distribution<double> shift(0.0, 2 * std::numbers::pi);
  constexpr int kModes = 6;
  const int n = grid.dim();
  std::vector<Vec> k(kModes, Vec(n));
  std::vector<double> a(kModes);
  std::vector<double> s(kModes);
  for (int m = 0; m < kModes; ++m) {
    for (int d = 0; d < n; ++d) k[m](d) = freq(rng) * (coef(rng) < 0 ? -1.0 : 1.0);
    a[m] = coef(rng);
    s[m] = shift(rng);
  }
  Eigen::VectorXd v(grid.unknown_count());
  for (int i = 0; i < grid.unknown_count(); ++i) {
    const Vec x = grid.position(i);
    double sum = 0.0;
    for (int m = 0; m < kModes; ++m) sum += a[m] * std::sin(k[m].dot(x) + s[m]);
    v(i) = sum;
  }
  const double peak = v.lpNorm<Eigen::Infinity>();
  if (peak > 0.0) v *= amplitude / peak;
  return v;
}

DiscreteProblem homotopy_problem(const ProblemSpec& spec, double t, GridPtr grid) {
  if (!grid) grid = build_grid(homotopy_domain(spec.body, t), spec.h, spec.grid_options);
  BoundaryClosure bc = spec.bc;
  bc.phi = spec.bc.phi.affine(t, 0.0);
  return make_problem(std::move(grid), spec.phase, spec.f.affine(t, 1.0 - t), bc);
}

HomotopyResult homotopy_solve(const ProblemSpec& spec, const HomotopySchedule& sched, const NewtonConfig& cfg,
                              const Perturbation& perturb) {
  if (spec.phase.cls == PhaseClass::Invalid) fail(ErrorCode::PhaseViolated, "phase is not admissible");
  const bool fixed_domain = is_unit_ball(spec.body);
  // When the data are already those of the t = 0 problem the whole path collapses to one solve.
  const bool trivial = fixed_domain && spec.f.is_constant() && spec.f.c0() == 1.0 && spec.bc.phi.is_constant() &&
                       spec.bc.phi.c0() == 0.0;
  GridPtr shared = fixed_domain ? build_grid(spec.body, spec.h, spec.grid_options) : nullptr;

  HomotopyReport rep;
  LinearSolver linear(cfg.linear);
  DiscreteProblem prob = homotopy_problem(spec, trivial ? 1.0 : 0.0, shared);
  Field start = initial_guess_ball(prob.grid, spec.phase, prob.bc);
  if (perturb.amplitude > 0.0) start.values += smooth_perturbation(*prob.grid, perturb.amplitude, perturb.seed);
  NewtonResult nr = newton_solve(prob, start, cfg, &linear);
  HomotopyStep first;
  first.t = trivial ? 1.0 : 0.0;
  first.accepted = true;
  first.newton_iterations = nr.report.iterations;
  first.final_residual = nr.report.residual_history.back();
  first.tail_ratio = nr.report.tail_ratio;
  first.quadratic_tail = nr.report.quadratic_tail;
  rep.steps.push_back(first);
  rep.total_newton += nr.report.iterations;
  rep.last_newton = nr.report;
  Field u = std::move(nr.u);

  double t_prev = trivial ? 1.0 : 0.0;
  double step = sched.initial_step;
  while (t_prev < 1.0) {
    const double t = t_prev + step >= 1.0 - 1e-12 ? 1.0 : t_prev + step;
    HomotopyStep hs;
    hs.t = t;
    hs.step = t - t_prev;
    try {
      DiscreteProblem pt = homotopy_problem(spec, t, shared);
      LinearSolver fresh(cfg.linear);
      LinearSolver& ls = fixed_domain ? linear : fresh;
      NewtonResult res = newton_solve(pt, transfer(u, pt.grid), cfg, &ls);
      hs.accepted = true;
      hs.newton_iterations = res.report.iterations;
      hs.final_residual = res.report.residual_history.back();
      hs.tail_ratio = res.report.tail_ratio;
      hs.quadratic_tail = res.report.quadratic_tail;
      rep.total_newton += res.report.iterations;
      rep.last_newton = res.report;
      u = std::move(res.u);
      prob = std::move(pt);
      t_prev = t;
      rep.steps.push_back(hs);
      step = std::min(sched.max_step, 2.0 * step);
    } catch (const Error& e) {
      if (!solver_failure(e.code())) throw;
      hs.failure = std::string(to_string(e.code()));
      rep.steps.push_back(hs);
      ++rep.halvings;
      step /= 2.0;
      if (step < sched.min_step) {
        fail(ErrorCode::StepUnderflow, "homotopy step fell below the minimum at t = " + std::to_string(t_prev) +
                                           " (last failure: " + e.what() + ")");
      }
    }
  }
  return {std::move(u), std::move(prob), std::move(rep)};
}

EpsilonPath EpsilonPath::halving(int steps) {
  EpsilonPath p;
  for (int k = 0; k <= steps; ++k) p.eps_values.push_back(std::ldexp(1.0, -k));
  return p;
}

double interior_mean(const Field& u) { return u.values.head(u.grid->interior_count()).mean(); }

double extrapolate_lambda(const std::vector<EpsilonStep>& steps) {
  const std::size_t m = steps.size();
  if (m == 0) return 0.0;
  if (m < 3) return steps.back().lambda;
  const double x0 = steps[m - 3].eps, x1 = steps[m - 2].eps, x2 = steps[m - 1].eps;
  const double y0 = steps[m - 3].lambda, y1 = steps[m - 2].lambda, y2 = steps[m - 1].lambda;
  // Lagrange basis evaluated at eps = 0.
  const double l0 = (x1 * x2) / ((x0 - x1) * (x0 - x2));
  const double l1 = (x0 * x2) / ((x1 - x0) * (x1 - x2));
  const double l2 = (x0 * x1) / ((x2 - x0) * (x2 - x1));
  return l0 * y0 + l1 * y1 + l2 * y2;
}

ClassicalResult classical_solve(const ProblemSpec& spec, const EpsilonPath& path, const HomotopySchedule& sched,
                                const NewtonConfig& cfg, const Perturbation& perturb, bool keep_fields) {
  if (path.eps_values.empty()) fail(ErrorCode::ConfigError, "eps path is empty");
  for (std::size_t k = 0; k < path.eps_values.size(); ++k) {
    if (!(path.eps_values[k] > 0.0) || (k > 0 && !(path.eps_values[k] < path.eps_values[k - 1]))) {
      fail(ErrorCode::ConfigError, "eps path must be positive and strictly decreasing");
    }
  }
  ProblemSpec start = spec;
  start.bc.mode = BcMode::Epsilon;
  start.bc.epsilon = path.eps_values.front();
  start.bc.offset = 0.0;
  start.bc.lambda_fixed = 0.0;

  ClassicalResult out;
  HomotopyResult hom = homotopy_solve(start, sched, cfg, perturb);
  out.report.homotopy = hom.report;

  // The iterate is w = u - offset with offset tracking the predicted level of u.
  Field w = std::move(hom.u);
  double offset = 0.0;
  DiscreteProblem prob = std::move(hom.problem);
  LinearSolver linear(cfg.linear);

  auto record = [&](double eps, const NewtonReport* nr) {
    EpsilonStep st;
    st.eps = eps;
    const double mw = interior_mean(w);
    st.lambda = -eps * (mw + offset);
    st.spread = eps * (w.values.head(w.grid->interior_count()).array() - mw).abs().maxCoeff();
    st.max_grad = max_gradient(w);
    if (nr) {
      st.newton_iterations = nr->iterations;
      st.final_residual = nr->residual_history.back();
    } else {
      st.newton_iterations = hom.report.last_newton.iterations;
      st.final_residual = hom.report.last_newton.residual_history.back();
    }
    out.report.steps.push_back(st);
    if (keep_fields) {
      Field c = w;
      c.values.array() -= mw;
      out.path_fields.push_back(std::move(c));
    }
  };
  record(path.eps_values.front(), nullptr);

  int increases = 0;
  for (std::size_t k = 1; k < path.eps_values.size(); ++k) {
    const double eps_prev = path.eps_values[k - 1];
    const double eps = path.eps_values[k];
    const double level = interior_mean(w) + offset;
    const double next_offset = level * eps_prev / eps;
    Field w0 = w;
    w0.values.array() -= interior_mean(w);
    if (perturb.amplitude > 0.0) w0.values += smooth_perturbation(*w.grid, perturb.amplitude, perturb.seed + k);

    BoundaryClosure bc = prob.bc;
    bc.mode = BcMode::Epsilon;
    bc.epsilon = eps;
    bc.offset = next_offset;
    prob = make_problem(w.grid, prob.phase, prob.f, bc);
    NewtonResult nr = newton_solve(prob, w0, cfg, &linear);
    w = std::move(nr.u);
    offset = next_offset;
    record(eps, &nr.report);

    const auto& s = out.report.steps;
    if (s.size() >= 3) {
      const double d_new = std::abs(s[s.size() - 1].lambda - s[s.size() - 2].lambda);
      const double d_old = std::abs(s[s.size() - 2].lambda - s[s.size() - 3].lambda);
      increases = d_new > d_old ? increases + 1 : 0;
      if (increases >= 3) fail(ErrorCode::PathDiverged, "lambda_eps differences grew over three consecutive steps");
    }
  }

  out.lambda = extrapolate_lambda(out.report.steps);
  out.report.lambda = out.lambda;
  const double mw = interior_mean(w);
  out.u = w;
  out.u.values.array() -= mw;
  BoundaryClosure bc = prob.bc;
  bc.offset = offset + mw;
  out.problem = make_problem(w.grid, prob.phase, prob.f, bc);
  return out;
}

}  // namespace slt
