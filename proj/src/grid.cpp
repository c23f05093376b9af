#include "slt/grid.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <set>
#include <string>

namespace slt {

namespace {

using Index = std::array<int, kMaxDim>;

int pair_slot(int n, int a, int b) { return a * (2 * n - a - 1) / 2 + (b - a - 1); }

std::array<double, 3> quadratic_weights(double xi) {
  return {0.5 * xi * (xi - 1.0), 1.0 - xi * xi, 0.5 * xi * (xi + 1.0)};
}

}  // namespace

std::string_view to_string(NodeTag tag) {
  switch (tag) {
    case NodeTag::Exterior: return "exterior";
    case NodeTag::Interior: return "interior";
    case NodeTag::Ghost: return "ghost";
  }
  return "exterior";
}

std::int64_t Grid::linear(const Index& k) const {
  std::int64_t idx = 0;
  for (int a = 0; a < dim_; ++a) idx = idx * count_[a] + (k[a] - lo_[a]);
  return idx;
}

bool Grid::in_box(const Index& k) const {
  for (int a = 0; a < dim_; ++a) {
    if (k[a] < lo_[a] || k[a] >= lo_[a] + count_[a]) return false;
  }
  return true;
}

std::array<int, kMaxDim> Grid::lattice_index(int unknown) const {
  std::int64_t idx = lattice_of_[unknown];
  Index k{};
  for (int a = dim_ - 1; a >= 0; --a) {
    k[a] = static_cast<int>(idx % count_[a]) + lo_[a];
    idx /= count_[a];
  }
  return k;
}

Vec Grid::position(int unknown) const {
  const Index k = lattice_index(unknown);
  Vec x(dim_);
  for (int a = 0; a < dim_; ++a) x(a) = h_ * k[a];
  return x;
}

int Grid::unknown_at(const Index& k) const {
  if (!in_box(k)) return -1;
  return unknown_of_[linear(k)];
}

NodeTag Grid::tag_at(const Index& k) const {
  if (!in_box(k)) return NodeTag::Exterior;
  return tags_[linear(k)];
}

int Grid::diagonal_neighbor(int interior, int a, int b, int plus_a, int plus_b) const {
  const int slot = 2 * dim_ + 4 * pair_slot(dim_, a, b) + 2 * plus_a + plus_b;
  return stencil_[interior * stencil_width_ + slot];
}

Stencil Grid::interpolation_stencil(const Vec& x, int order) const {
  Stencil st;
  if (order == 1) {
    Index base{};
    std::array<double, kMaxDim> frac{};
    for (int a = 0; a < dim_; ++a) {
      const double s = x(a) / h_;
      base[a] = static_cast<int>(std::floor(s));
      frac[a] = s - base[a];
    }
    const int corners = 1 << dim_;
    for (int c = 0; c < corners; ++c) {
      Index k = base;
      double w = 1.0;
      for (int a = 0; a < dim_; ++a) {
        const int bit = (c >> a) & 1;
        k[a] += bit;
        w *= bit ? frac[a] : 1.0 - frac[a];
      }
      if (w == 0.0) continue;
      const int u = unknown_at(k);
      if (u < 0) fail(ErrorCode::OutsideInterpolationDomain, "cell corner outside the unknown set");
      st.nodes.push_back(u);
      st.weights.push_back(w);
    }
    return st;
  }

  Index centre{};
  for (int a = 0; a < dim_; ++a) centre[a] = static_cast<int>(std::lround(x(a) / h_));
  const int shifts = dim_ == 2 ? 9 : 27;
  double best_reach = std::numeric_limits<double>::infinity();
  Index best{};
  for (int s = 0; s < shifts; ++s) {
    Index c = centre;
    int code = s;
    double reach = 0.0;
    for (int a = 0; a < dim_; ++a) {
      c[a] += code % 3 - 1;
      code /= 3;
      reach = std::max(reach, std::abs(x(a) / h_ - c[a]));
    }
    if (reach >= best_reach - 1e-12) continue;
    bool ok = true;
    const int block = shifts;
    for (int j = 0; j < block && ok; ++j) {
      Index k = c;
      int jc = j;
      for (int a = 0; a < dim_; ++a) {
        k[a] += jc % 3 - 1;
        jc /= 3;
      }
      ok = unknown_at(k) >= 0;
    }
    if (!ok) continue;
    best_reach = reach;
    best = c;
  }
  if (best_reach > 2.0) fail(ErrorCode::OutsideInterpolationDomain, "no quadratic block of unknowns near point");
  std::array<std::array<double, 3>, kMaxDim> w{};
  for (int a = 0; a < dim_; ++a) w[a] = quadratic_weights(x(a) / h_ - best[a]);
  for (int j = 0; j < shifts; ++j) {
    Index k = best;
    int jc = j;
    double weight = 1.0;
    for (int a = 0; a < dim_; ++a) {
      const int off = jc % 3;
      k[a] += off - 1;
      weight *= w[a][off];
      jc /= 3;
    }
    if (weight == 0.0) continue;
    st.nodes.push_back(unknown_at(k));
    st.weights.push_back(weight);
  }
  return st;
}

GridPtr build_grid(const ConvexBody& body, double h, const GridOptions& options) {
  const int n = body.dim();
  if (!(h > 0.0) || h > body.inradius() / 8.0) {
    fail(ErrorCode::TooCoarse, "grid spacing must not exceed inradius/8");
  }
  if (options.probe_order != 1 && options.probe_order != 2) {
    fail(ErrorCode::ConfigError, "probe interpolation order must be 1 or 2");
  }
  auto grid = std::make_shared<Grid>();
  grid->body_ = body;
  grid->options_ = options;
  grid->dim_ = n;
  grid->h_ = h;
  const auto [lo, hi] = body.bounding_box();
  std::int64_t total = 1;
  for (int a = 0; a < n; ++a) {
    grid->lo_[a] = static_cast<int>(std::floor(lo(a) / h)) - 2;
    const int top = static_cast<int>(std::ceil(hi(a) / h)) + 2;
    grid->count_[a] = top - grid->lo_[a] + 1;
    total *= grid->count_[a];
  }
  auto index_of = [&](std::int64_t idx) {
    Index k{};
    for (int a = n - 1; a >= 0; --a) {
      k[a] = static_cast<int>(idx % grid->count_[a]) + grid->lo_[a];
      idx /= grid->count_[a];
    }
    return k;
  };
  auto point_of = [&](const Index& k) {
    Vec x(n);
    for (int a = 0; a < n; ++a) x(a) = h * k[a];
    return x;
  };

  // Classify: interior where d > 0. Ellipsoid/support queries dominate, so run them in parallel.
  std::vector<double> dist(total);
  parallel_for(0, total, [&](std::ptrdiff_t i) { dist[i] = signed_distance(body, point_of(index_of(i))).d; });
  grid->tags_.assign(total, NodeTag::Exterior);
  for (std::int64_t i = 0; i < total; ++i) {
    if (dist[i] > 0.0) grid->tags_[i] = NodeTag::Interior;
  }

  // Stencil offsets: +-e_a, then +-e_a +-e_b for a < b.
  std::vector<Index> offsets;
  for (int a = 0; a < n; ++a) {
    for (int s : {-1, 1}) {
      Index o{};
      o[a] = s;
      offsets.push_back(o);
    }
  }
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      for (int sa : {-1, 1}) {
        for (int sb : {-1, 1}) {
          Index o{};
          o[a] = sa;
          o[b] = sb;
          offsets.push_back(o);
        }
      }
    }
  }
  grid->stencil_width_ = static_cast<int>(offsets.size());

  std::vector<std::int64_t> interior;
  for (std::int64_t i = 0; i < total; ++i) {
    if (grid->tags_[i] != NodeTag::Interior) continue;
    interior.push_back(i);
    const Index k = index_of(i);
    for (const auto& o : offsets) {
      Index q = k;
      for (int a = 0; a < n; ++a) q[a] += o[a];
      if (!grid->in_box(q)) fail(ErrorCode::TooCoarse, "stencil leaves the lattice box");
      const std::int64_t j = grid->linear(q);
      if (grid->tags_[j] == NodeTag::Exterior) grid->tags_[j] = NodeTag::Ghost;
    }
  }
  grid->n_interior_ = static_cast<int>(interior.size());
  grid->unknown_of_.assign(total, -1);
  grid->lattice_of_ = interior;
  for (std::int64_t i = 0; i < total; ++i) {
    if (grid->tags_[i] == NodeTag::Ghost) grid->lattice_of_.push_back(i);
  }
  for (std::size_t u = 0; u < grid->lattice_of_.size(); ++u) {
    grid->unknown_of_[grid->lattice_of_[u]] = static_cast<int>(u);
  }

  // Enough resolution along every axis.
  for (int a = 0; a < n; ++a) {
    std::set<int> distinct;
    for (std::int64_t i : interior) distinct.insert(index_of(i)[a]);
    if (distinct.size() < 8) fail(ErrorCode::TooCoarse, "fewer than 8 interior nodes along an axis");
  }

  grid->stencil_.resize(static_cast<std::size_t>(grid->n_interior_) * grid->stencil_width_);
  for (int u = 0; u < grid->n_interior_; ++u) {
    const Index k = index_of(interior[u]);
    for (int s = 0; s < grid->stencil_width_; ++s) {
      Index q = k;
      for (int a = 0; a < n; ++a) q[a] += offsets[s][a];
      grid->stencil_[u * grid->stencil_width_ + s] = grid->unknown_at(q);
    }
  }

  const int unknowns = static_cast<int>(grid->lattice_of_.size());
  grid->distance_.resize(unknowns);
  parallel_for(0, unknowns, [&](std::ptrdiff_t u) {
    grid->distance_[u] = signed_distance(body, point_of(index_of(grid->lattice_of_[u])));
  });

  const int n_ghost = unknowns - grid->n_interior_;
  grid->ghosts_.resize(n_ghost);
  for (int g = 0; g < n_ghost; ++g) {
    GhostInfo& gi = grid->ghosts_[g];
    gi.dist = grid->distance_[grid->n_interior_ + g];
    const Vec& b = gi.dist.foot;
    gi.probe1 = b - h * gi.dist.nu;
    gi.probe2 = b - 2.0 * h * gi.dist.nu;
    if (!(signed_distance(body, gi.probe1).d > 0.0) || !(signed_distance(body, gi.probe2).d > 0.0)) {
      fail(ErrorCode::TooCoarse, "boundary probe points leave the domain");
    }
    try {
      gi.at_foot = grid->interpolation_stencil(b, options.probe_order);
      gi.at_probe1 = grid->interpolation_stencil(gi.probe1, options.probe_order);
      gi.at_probe2 = grid->interpolation_stencil(gi.probe2, options.probe_order);
    } catch (const Error&) {
      fail(ErrorCode::TooCoarse, "boundary probes cannot be interpolated from grid unknowns");
    }
  }
  return grid;
}

Field sample_field(const GridPtr& grid, const std::function<double(const Vec&)>& fn) {
  Field u{grid, Eigen::VectorXd(grid->unknown_count())};
  for (int i = 0; i < grid->unknown_count(); ++i) u.values(i) = fn(grid->position(i));
  return u;
}

Mat hessian_at(const Field& u, int node) {
  const Grid& g = *u.grid;
  const int n = g.dim();
  const double h2 = g.spacing() * g.spacing();
  const Eigen::VectorXd& v = u.values;
  const double c = v(node);
  Mat m(n, n);
  for (int a = 0; a < n; ++a) {
    m(a, a) = (v(g.axis_neighbor(node, a, 1)) - 2.0 * c + v(g.axis_neighbor(node, a, 0))) / h2;
    for (int b = a + 1; b < n; ++b) {
      const double cross = v(g.diagonal_neighbor(node, a, b, 1, 1)) - v(g.diagonal_neighbor(node, a, b, 1, 0)) -
                           v(g.diagonal_neighbor(node, a, b, 0, 1)) + v(g.diagonal_neighbor(node, a, b, 0, 0));
      m(a, b) = m(b, a) = cross / (4.0 * h2);
    }
  }
  return m;
}

Vec gradient_at(const Field& u, int node) {
  const Grid& g = *u.grid;
  Vec d(g.dim());
  for (int a = 0; a < g.dim(); ++a) {
    d(a) = (u.values(g.axis_neighbor(node, a, 1)) - u.values(g.axis_neighbor(node, a, 0))) / (2.0 * g.spacing());
  }
  return d;
}

double interpolate(const Field& u, const Vec& x) { return u.grid->interpolation_stencil(x, 1).apply(u.values); }

double interpolate_quadratic(const Field& u, const Vec& x) {
  return u.grid->interpolation_stencil(x, 2).apply(u.values);
}

void check_finite(const Field& u) {
  if (!u.values.allFinite()) fail(ErrorCode::NonFiniteField, "field contains NaN or Inf");
}

void write_csv(std::ostream& out, const Field& u) {
  const Grid& g = *u.grid;
  static constexpr std::array<const char*, 3> names{"x", "y", "z"};
  for (int a = 0; a < g.dim(); ++a) out << names[a] << ',';
  out << "tag,u\n";
  out.precision(17);
  for (int i = 0; i < g.unknown_count(); ++i) {
    const Vec x = g.position(i);
    for (int a = 0; a < g.dim(); ++a) out << x(a) << ',';
    out << (g.is_interior(i) ? "interior" : "ghost") << ',' << u.values(i) << '\n';
  }
}

}  // namespace slt
