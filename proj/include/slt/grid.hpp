#pragma once

// Uniform Cartesian lattice clipped to a convex body.
//
// Nodes sit at h*k for integer k, so grids of the same spacing built for
// different bodies of a homotopy share their nodes. Unknowns are the interior
// nodes (d > 0) in lexicographic order followed by the ghost nodes: lattice
// nodes outside the open domain that some interior stencil touches. Every
// ghost carries one boundary row, posed at its foot point.

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "slt/common.hpp"
#include "slt/geometry.hpp"

namespace slt {

enum class NodeTag : std::uint8_t { Exterior, Interior, Ghost };

std::string_view to_string(NodeTag tag);

// Linear combination of unknown values.
struct Stencil {
  std::vector<int> nodes;
  std::vector<double> weights;

  template <typename Values>
  double apply(const Values& u) const {
    double s = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) s += weights[k] * u[nodes[k]];
    return s;
  }
};

struct GhostInfo {
  DistanceData dist;  // of the ghost node itself; dist.foot is the boundary point b
  Vec probe1;         // b - h nu
  Vec probe2;         // b - 2h nu
  // Interpolation stencils for u(b), u(p1), u(p2).
  Stencil at_foot;
  Stencil at_probe1;
  Stencil at_probe2;
};

struct GridOptions {
  // Polynomial order of the probe interpolation: 1 (multilinear) or 2 (tensor quadratic).
  int probe_order = 2;
};

class Grid {
 public:
  int dim() const { return dim_; }
  double spacing() const { return h_; }
  const ConvexBody& body() const { return body_; }
  const GridOptions& options() const { return options_; }

  int interior_count() const { return n_interior_; }
  int ghost_count() const { return static_cast<int>(ghosts_.size()); }
  int unknown_count() const { return n_interior_ + ghost_count(); }
  bool is_interior(int unknown) const { return unknown < n_interior_; }

  Vec position(int unknown) const;
  std::array<int, kMaxDim> lattice_index(int unknown) const;
  /// Unknown index at lattice index k, or -1 when k is exterior or off the box.
  int unknown_at(const std::array<int, kMaxDim>& k) const;
  NodeTag tag_at(const std::array<int, kMaxDim>& k) const;

  const GhostInfo& ghost(int g) const { return ghosts_[g]; }
  /// Signed distance data of any unknown (computed once at build time).
  const DistanceData& distance(int unknown) const { return distance_[unknown]; }

  // Stencil neighbours of an interior node: axis a at offset +-1 is
  // axis_neighbor(i, a, s) with s in {0 (minus), 1 (plus)}; the in-plane
  // diagonal (a, b), a < b, with signs (sa, sb) is diagonal_neighbor.
  int axis_neighbor(int interior, int axis, int plus) const {
    return stencil_[interior * stencil_width_ + 2 * axis + plus];
  }
  int diagonal_neighbor(int interior, int a, int b, int plus_a, int plus_b) const;
  int stencil_width() const { return stencil_width_; }

  /// Interpolation stencil at x. Order 1: multilinear on the enclosing cell.
  /// Order 2: 3^n tensor block, shifted inward if needed (extrapolation up to two cells).
  Stencil interpolation_stencil(const Vec& x, int order) const;

 private:
  friend std::shared_ptr<const Grid> build_grid(const ConvexBody&, double, const GridOptions&);

  std::int64_t linear(const std::array<int, kMaxDim>& k) const;
  bool in_box(const std::array<int, kMaxDim>& k) const;

  ConvexBody body_;
  GridOptions options_;
  int dim_ = 2;
  double h_ = 0.0;
  std::array<int, kMaxDim> lo_{};
  std::array<int, kMaxDim> count_{1, 1, 1};
  std::vector<NodeTag> tags_;
  std::vector<int> unknown_of_;
  std::vector<std::int64_t> lattice_of_;
  int n_interior_ = 0;
  std::vector<GhostInfo> ghosts_;
  std::vector<DistanceData> distance_;
  int stencil_width_ = 0;
  std::vector<int> stencil_;
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr build_grid(const ConvexBody& body, double h, const GridOptions& options = {});

struct Field {
  GridPtr grid;
  Eigen::VectorXd values;
};

Field sample_field(const GridPtr& grid, const std::function<double(const Vec&)>& fn);

/// Central second differences at an interior node; exact on quadratics.
Mat hessian_at(const Field& u, int node);
Vec gradient_at(const Field& u, int node);

/// Multilinear interpolation on the cell containing x.
double interpolate(const Field& u, const Vec& x);
double interpolate_quadratic(const Field& u, const Vec& x);

void check_finite(const Field& u);

/// CSV with columns x, y[, z], tag, u.
void write_csv(std::ostream& out, const Field& u);

}  // namespace slt
