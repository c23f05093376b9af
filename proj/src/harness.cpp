#include "slt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <tuple>

namespace slt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double collar_width(const DiscreteProblem& p, const DiagnosticSpec& spec) {
  const double mu = spec.mu > 0.0 ? spec.mu : default_collar_width(p.grid->body());
  if (mu < 3 * p.grid->spacing()) fail(ErrorCode::CollarTooThin, "collar holds fewer than three grid layers");
  return mu;
}

// phi(x, u) = rhs(x) - c u for the stored field; rhs folds in lambda and the offset.
double bc_rhs(const DiscreteProblem& p, const Vec& x) {
  const double lambda = p.bc.mode == BcMode::Classical ? p.bc.lambda_fixed : 0.0;
  return p.bc.phi.value(x) + lambda - p.bc.robin_coefficient() * p.bc.offset;
}

Extremum make_extremum(const Grid& g, int node, double value) {
  Extremum e;
  e.value = value;
  e.node = node;
  e.position = g.position(node);
  e.depth = g.distance(node).d;
  e.on_band = e.depth <= 1.5 * g.spacing();
  return e;
}

std::vector<int> collar_nodes(const Grid& g, double mu) {
  std::vector<int> out;
  for (int i = 0; i < g.interior_count(); ++i) {
    const auto& dd = g.distance(i);
    if (dd.d <= mu && dd.smooth) out.push_back(i);
  }
  return out;
}

std::vector<Vec> default_directions(int n) {
  std::vector<Vec> dirs;
  // V is even in xi, so half the sphere suffices.
  if (n == 2) {
    constexpr int kCount = 64;
    for (int k = 0; k < kCount; ++k) {
      const double a = std::numbers::pi * k / kCount;
      Vec v(2);
      v << std::cos(a), std::sin(a);
      dirs.push_back(v);
    }
  } else {
    constexpr int kCount = 128;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < kCount; ++k) {
      const double z = (k + 0.5) / kCount;
      const double r = std::sqrt(1.0 - z * z);
      Vec v(3);
      v << r * std::cos(golden * k), r * std::sin(golden * k), z;
      dirs.push_back(v);
    }
  }
  return dirs;
}

double interp(const Field& u, const Vec& x) {
  return u.grid->interpolation_stencil(x, u.grid->options().probe_order).apply(u.values);
}

// u_nu - phi(x, u) with u_nu = <Du, Dh>, and the barrier h itself.
std::pair<double, double> barrier_gap(const DiscreteProblem& p, const Field& u, int node, double mu) {
  const Grid& g = *p.grid;
  const Vec x = g.position(node);
  const BarrierH bh = barrier_h(g.body(), x, mu);
  const double u_nu = gradient_at(u, node).dot(bh.grad_h);
  return {u_nu - (bc_rhs(p, x) - p.bc.robin_coefficient() * u.values(node)), bh.h};
}

}  // namespace

std::pair<double, double> barrier_values(const DiscreteProblem& p, const Field& u, int node, double B0, double mu) {
  if (!p.grid->is_interior(node)) fail(ErrorCode::OutsideCollar, "barrier functionals live on interior nodes");
  const auto [gap, h] = barrier_gap(p, u, node, mu);
  return {gap - 0.5 * gap * gap - B0 * h, gap + 0.5 * gap * gap + B0 * h};
}

double double_normal(const Field& u, int ghost) {
  const Grid& g = *u.grid;
  const GhostInfo& gi = g.ghost(ghost);
  const double h = g.spacing();
  const Vec& b = gi.dist.foot;
  const Vec& nu = gi.dist.nu;
  const double u0 = gi.at_foot.apply(u.values);
  const double u1 = gi.at_probe1.apply(u.values);
  const double u2 = gi.at_probe2.apply(u.values);
  const double u3 = interp(u, b - 3 * h * nu);
  return (2 * u0 - 5 * u1 + 4 * u2 - u3) / (h * h);
}

EstimateReport estimate_report(const DiscreteProblem& p, const Field& u, double solver_tol) {
  const Grid& g = *p.grid;
  const ResidualJacobian r = residual(p, u);
  EstimateReport e;
  e.phase_residual = r.max_interior;
  if (e.phase_residual > 100 * solver_tol) fail(ErrorCode::NotASolution, "field does not solve the problem");

  const double mu = default_collar_width(g.body());
  e.min_laplacian = kInf;
  for (int i = 0; i < g.interior_count(); ++i) {
    e.c0 = std::max(e.c0, std::abs(u.values(i)));
    const double grad = gradient_at(u, i).norm();
    e.c1 = std::max(e.c1, grad);
    if (g.distance(i).d <= mu) e.c1_boundary = std::max(e.c1_boundary, grad);
    const auto sp = eig_sym(hessian_at(u, i));
    e.d2 = std::max(e.d2, sp.lambda.cwiseAbs().maxCoeff());
    e.min_laplacian = std::min(e.min_laplacian, sp.lambda.sum());
  }
  for (int k = 0; k < g.ghost_count(); ++k) {
    e.c0 = std::max(e.c0, std::abs(g.ghost(k).at_foot.apply(u.values)));
    e.dnn = std::max(e.dnn, std::abs(double_normal(u, k)));
  }
  return e;
}

BarrierReport barrier_diag(const DiscreteProblem& p, const Field& u, const DiagnosticSpec& spec) {
  if (u.grid != p.grid) fail(ErrorCode::DomainMismatch, "field and problem live on different grids");
  const Grid& g = *p.grid;
  const double mu = collar_width(p, spec);
  const std::vector<int> nodes = collar_nodes(g, mu);
  if (nodes.empty()) fail(ErrorCode::CollarTooThin, "no grid nodes in the collar");

  std::vector<double> gap(nodes.size()), hb(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    std::tie(gap[k], hb[k]) = barrier_gap(p, u, nodes[k], mu);
  }

  auto evaluate = [&](double B0, Extremum& lo, Extremum& hi) {
    double best_lo = kInf, best_hi = -kInf;
    int arg_lo = -1, arg_hi = -1;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const double upper = gap[k] - 0.5 * gap[k] * gap[k] - B0 * hb[k];
      const double lower = gap[k] + 0.5 * gap[k] * gap[k] + B0 * hb[k];
      if (upper < best_lo) best_lo = upper, arg_lo = nodes[k];
      if (lower > best_hi) best_hi = lower, arg_hi = nodes[k];
    }
    lo = make_extremum(g, arg_lo, best_lo);
    hi = make_extremum(g, arg_hi, best_hi);
    return lo.on_band && hi.on_band;
  };

  BarrierReport rep;
  rep.B0 = spec.B0;
  rep.collar_nodes = static_cast<int>(nodes.size());
  rep.on_band = evaluate(spec.B0, rep.upper_min, rep.lower_max);
  for (double B0 : spec.sweep) {
    Extremum lo, hi;
    const bool ok = evaluate(B0, lo, hi);
    rep.sweep.push_back({B0, ok});
    if (ok && !rep.smallest_B0) rep.smallest_B0 = B0;
  }
  return rep;
}

LtuReport ltu_diag(const DiscreteProblem& p, const Field& u, const DiagnosticSpec& spec) {
  if (u.grid != p.grid) fail(ErrorCode::DomainMismatch, "field and problem live on different grids");
  const Grid& g = *p.grid;
  const int n = g.dim();
  const double mu = collar_width(p, spec);
  const double c = p.bc.robin_coefficient();
  const std::vector<Vec> dirs = spec.directions.empty() ? default_directions(n) : spec.directions;
  const int ni = g.interior_count();
  const int nd = static_cast<int>(dirs.size());

  // Per node and direction: V without the B term, for both Dphi variants.
  std::vector<double> base(static_cast<std::size_t>(ni) * nd), base_partial(base.size());
  std::vector<double> r2(ni);
  parallel_for(0, ni, [&](std::ptrdiff_t ii) {
    const int i = static_cast<int>(ii);
    const Vec x = g.position(i);
    const Vec du = gradient_at(u, i);
    const Mat d2u = hessian_at(u, i);
    const DistanceData& dd = g.distance(i);
    const bool in_collar = dd.d <= mu && dd.smooth;
    Vec total = Vec::Zero(n), partial = Vec::Zero(n), nu = Vec::Zero(n);
    if (in_collar) {
      // nu = Dh/|Dh| = -Dd in the collar, so D nu = -D^2 d.
      nu = -dd.grad_d;
      const Mat dnu = -dd.hess_d;
      const Vec dphi_x = p.bc.phi.gradient(x);
      const Vec common = -du - dnu * du;
      partial = dphi_x + common;
      total = dphi_x - c * du + common;
    }
    r2[i] = x.squaredNorm();
    for (int k = 0; k < nd; ++k) {
      const Vec& xi = dirs[k];
      const double u_xx = xi.dot(d2u * xi);
      double v_total = 0.0, v_partial = 0.0;
      if (in_collar) {
        const double xn = xi.dot(nu);
        const Vec xt = xi - xn * nu;
        v_total = 2 * xn * xt.dot(total);
        v_partial = 2 * xn * xt.dot(partial);
      }
      const double rest = u_xx + 0.5 * du.squaredNorm();
      base[static_cast<std::size_t>(i) * nd + k] = rest - v_total;
      base_partial[static_cast<std::size_t>(i) * nd + k] = rest - v_partial;
    }
  });

  struct Outcome {
    Extremum max;
    bool all_on_band = true;
  };
  auto evaluate = [&](const std::vector<double>& values, double B) {
    Outcome out;
    double best = -kInf;
    int arg = -1;
    for (int k = 0; k < nd; ++k) {
      double dir_best = -kInf;
      int dir_arg = -1;
      for (int i = 0; i < ni; ++i) {
        const double v = values[static_cast<std::size_t>(i) * nd + k] + 0.5 * B * r2[i];
        if (v > dir_best) dir_best = v, dir_arg = i;
      }
      if (g.distance(dir_arg).d > 1.5 * g.spacing()) out.all_on_band = false;
      if (dir_best > best) best = dir_best, arg = dir_arg;
    }
    out.max = make_extremum(g, arg, best);
    return out;
  };

  LtuReport rep;
  rep.B = spec.B;
  rep.directions = nd;
  const Outcome main = evaluate(base, spec.B);
  rep.max = main.max;
  rep.all_directions_on_band = main.all_on_band;
  rep.max_partial = evaluate(base_partial, spec.B).max;
  for (double B : spec.sweep) {
    const bool ok = evaluate(base, B).all_on_band;
    rep.sweep.push_back({B, ok});
    if (ok && !rep.smallest_B) rep.smallest_B = B;
  }
  return rep;
}

AuxReport gradient_aux_diag(const DiscreteProblem& p, const Field& u, const DiagnosticSpec& spec,
                            AuxFunctional which) {
  if (u.grid != p.grid) fail(ErrorCode::DomainMismatch, "field and problem live on different grids");
  const Grid& g = *p.grid;
  const double c = p.bc.robin_coefficient();
  AuxReport rep;
  rep.functional = which;
  double best = -kInf;
  int arg = -1;

  if (which == AuxFunctional::Collar) {
    const double mu = collar_width(p, spec);
    double umax = 0.0;
    for (int i = 0; i < g.interior_count(); ++i) umax = std::max(umax, std::abs(u.values(i)));
    rep.M0 = spec.M0 ? *spec.M0 : umax + 1.0;
    for (int i : collar_nodes(g, mu)) {
      const Vec x = g.position(i);
      const DistanceData& dd = g.distance(i);
      const Vec du = gradient_at(u, i);
      // w = u + phi d with phi = phi(x, u(x)) differentiated along the solution.
      const double phi = bc_rhs(p, x) - c * u.values(i);
      const Vec dphi = p.bc.phi.gradient(x) - c * du;
      const Vec dw = du + dd.d * dphi + phi * dd.grad_d;
      const double gap = rep.M0 - u.values(i);
      const double dw2 = dw.squaredNorm();
      if (!(gap > 0.0) || !(dw2 > 0.0)) {
        fail(ErrorCode::NonPositiveLogArgument, "log argument is not positive at a collar node");
      }
      const double value = std::log(dw2) - std::log(gap) + spec.a0 * dd.d;
      if (value > best) best = value, arg = i;
    }
  } else {
    if (p.bc.mode != BcMode::Epsilon) fail(ErrorCode::WrongBCMode, "the path functional needs the eps closure");
    const double eps = p.bc.epsilon;
    for (int i = 0; i < g.interior_count(); ++i) {
      const Vec x = g.position(i);
      const DistanceData& dd = g.distance(i);
      // Global defining function h = -d + d^2/2; on the unit ball it is (|x|^2 - 1)/2.
      const double h = -dd.d + 0.5 * dd.d * dd.d;
      const Vec dh = (dd.d - 1.0) * dd.grad_d;
      const double uu = u.values(i) + p.bc.offset;
      const Vec du = gradient_at(u, i);
      const double phi = p.bc.phi.value(x);
      const Vec dw = (1 + eps * h) * du + eps * uu * dh - phi * dh - h * p.bc.phi.gradient(x);
      const double dw2 = dw.squaredNorm();
      if (!(dw2 > 0.0)) continue;  // critical point of w: P = -inf there, never the max
      const double value = std::log(dw2) + 0.5 * spec.b * x.squaredNorm();
      if (value > best) best = value, arg = i;
    }
  }
  if (arg < 0) fail(ErrorCode::NonPositiveLogArgument, "no node with a finite functional value");
  rep.max = make_extremum(g, arg, best);
  return rep;
}

double identity_residual(const DiscreteProblem& p, const Field& u) {
  const Grid& g = *p.grid;
  const int n = g.dim();
  const double h = g.spacing();
  double worst = 0.0;
  for (int i = 0; i < g.interior_count(); ++i) {
    bool ok = true;
    for (int a = 0; a < n && ok; ++a) {
      for (int s = 0; s < 2 && ok; ++s) ok = g.is_interior(g.axis_neighbor(i, a, s));
    }
    if (!ok) continue;
    const auto sp = eig_sym(hessian_at(u, i));
    const double f = p.f_interior(i);
    const Mat G = gradient_ambient(sp, f);
    double f_weight = 0.0;
    for (int k = 0; k < n; ++k) f_weight += sp.lambda(k) / (f * f + sp.lambda(k) * sp.lambda(k));
    const Vec df = p.f.gradient(g.position(i));
    for (int a = 0; a < n; ++a) {
      const Mat d3 = (hessian_at(u, g.axis_neighbor(i, a, 1)) - hessian_at(u, g.axis_neighbor(i, a, 0))) / (2 * h);
      const double r = (G.array() * d3.array()).sum() - df(a) * f_weight;
      worst = std::max(worst, std::abs(r));
    }
  }
  return worst;
}

std::vector<Spectrum<double>> sample_level_set(int n, double theta, double f, int count, std::uint64_t seed) {
  if (n < 2 || n > kMaxDim) fail(ErrorCode::BadDimension, "level-set sampler expects n in {2,3}");
  if (!(f > 0.0)) fail(ErrorCode::NonpositiveF, "f must be positive");
  std::vector<Spectrum<double>> out;
  if (count <= 0) return out;
  out.reserve(count);
  std::mt19937_64 rng(seed);
  const double half = std::numbers::pi / 2;
  std::uniform_real_distribution<double> angle(-half, half);
  // Acceptance below 1e-4 means the phase is (nearly) unreachable.
  const std::int64_t budget = std::max<std::int64_t>(10000, std::int64_t{10000} * count);
  std::int64_t attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > budget) fail(ErrorCode::AdmissibilityExhausted, "level-set sampler rejects almost every draw");
    double rest = theta;
    SmallVec<double> lambda(n);
    for (int i = 0; i + 1 < n; ++i) {
      double a = angle(rng);
      while (a == -half) a = angle(rng);
      rest -= a;
      lambda(i) = f * std::tan(a);
    }
    if (!(std::abs(rest) < half)) continue;
    lambda(n - 1) = f * std::tan(rest);
    std::sort(lambda.data(), lambda.data() + n, std::greater<>());
    Spectrum<double> sp;
    sp.lambda = lambda;
    sp.frame = SmallMat<double>::Identity(n, n);
    out.push_back(std::move(sp));
  }
  return out;
}

bool LemmaSuiteReport::passed() const {
  return upper_pass == count && inverse_pass == count && lower_pass == count && mean_zero_pass == count &&
         (!wy_checked || wy_pass == count);
}

LemmaSuiteReport run_lemma_suites(int n, double theta, double f, int count, std::uint64_t seed) {
  LemmaSuiteReport rep;
  const auto samples = sample_level_set(n, theta, f, count, seed);
  rep.count = static_cast<int>(samples.size());
  if (rep.count == 0) return rep;
  const PhaseSpec ph = phase_classify(theta, n);
  rep.wy_checked = ph.cls == PhaseClass::Critical;
  rep.worst_upper = rep.worst_inverse = rep.worst_lower = rep.worst_mean_zero = rep.worst_wy = kInf;
  rep.min_trace_gap = kInf;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal;
  constexpr double kTol = -1e-12;
  for (const auto& sp : samples) {
    const SpectrumProps props = lemma_spectrum_props(sp, f, ph);
    rep.upper_pass += props.positive_upper;
    rep.inverse_pass += props.inverse_sum;
    rep.lower_pass += props.lower_bound;
    rep.worst_upper = std::min(rep.worst_upper, props.margin_upper);
    rep.worst_inverse = std::min(rep.worst_inverse, props.margin_inverse);
    rep.worst_lower = std::min(rep.worst_lower, props.margin_lower);

    // The last entry closes the sum; subtracting the mean instead leaves a
    // roundoff sum that is large relative to |x| when the draws nearly agree.
    SmallVec<double> x(n);
    x(n - 1) = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
      x(i) = normal(rng);
      x(n - 1) -= x(i);
    }
    const double q = mean_zero_quadratic(sp, x);
    const double scale = (sp.lambda.array().abs() * x.array().square()).sum();
    const double rel = scale > 0.0 ? q / scale : 0.0;
    rep.worst_mean_zero = std::min(rep.worst_mean_zero, rel);
    rep.mean_zero_pass += rel >= kTol;

    const double wy = wy_value(sp, f);
    double trace = 0.0;
    for (int i = 0; i < n; ++i) trace += f / (f * f + sp.lambda(i) * sp.lambda(i));
    rep.min_trace_gap = std::min(rep.min_trace_gap, trace - wy);
    if (rep.wy_checked) {
      rep.worst_wy = std::min(rep.worst_wy, wy);
      rep.wy_pass += wy >= kTol;
    }
  }
  return rep;
}

}  // namespace slt
