#pragma once

// Damped Newton on the discrete system, the continuity path from the unit
// ball, and the eps -> 0 path for the classical Neumann problem.

#include <Eigen/SparseLU>
#include <Eigen/IterativeLinearSolvers>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "slt/assembly.hpp"

namespace slt {

enum class LinearSolverKind { Auto, Direct, Iterative };

// Sparse solve J x = b. The direct path reuses the symbolic analysis while the
// sparsity pattern stays fixed; the iterative path (BiCGSTAB with incomplete
// LU) reuses its preconditioner across Newton steps and refreshes it when the
// iteration count climbs.
class LinearSolver {
 public:
  explicit LinearSolver(LinearSolverKind kind = LinearSolverKind::Auto) : kind_(kind) {}

  Eigen::VectorXd solve(const SparseMatrix& jac, const Eigen::VectorXd& rhs);
  int last_iterations() const { return last_iterations_; }
  bool last_direct() const { return last_direct_; }

  // Systems at least this large use the iterative path in Auto mode.
  static constexpr int kIterativeThreshold = 40000;

 private:
  using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
  LinearSolverKind kind_;
  std::unique_ptr<Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>>> lu_;
  std::unique_ptr<Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<double>>> krylov_;
  Eigen::Index pattern_rows_ = -1;
  Eigen::Index pattern_nnz_ = -1;
  int last_iterations_ = 0;
  bool last_direct_ = true;
};

struct NewtonConfig {
  double tol_residual = 1e-10;  // max-norm
  int max_iter = 50;
  double backtrack = 0.5;
  double min_step = 1.0 / 1024;
  double phase_guard = 1.5707963267948966;  // per-node |F - Theta| bound
  LinearSolverKind linear = LinearSolverKind::Auto;
};

struct NewtonReport {
  int iterations = 0;
  std::vector<double> residual_history;  // max-norm, one entry per iterate
  std::vector<double> step_history;      // accepted damping factors
  std::vector<int> linear_iterations;
  bool converged = false;
  /// max r_{k+1} / r_k^2 over the steps with r_k <= 1e-2 and r_{k+1} above the
  /// roundoff floor 10 eps_mach (1 + max|u|) / h^2; 0 when no such step.
  double tail_ratio = 0.0;
  /// True when such a tail exists and tail_ratio <= 1e4.
  bool quadratic_tail = false;
};

struct NewtonResult {
  Field u;
  NewtonReport report;
};

NewtonResult newton_solve(const DiscreteProblem& p, const Field& u0, const NewtonConfig& cfg,
                          LinearSolver* linear = nullptr);

/// Radial solution u = c|x|^2/2 + k, c = tan(Theta/n), of the problem on the
/// unit ball with f = 1 and constant boundary data.
Field initial_guess_ball(const GridPtr& grid, const PhaseSpec& phase, const BoundaryClosure& bc);

/// Interpolates a field onto another grid; nodes outside the old
/// interpolation domain use a second-order Taylor extension from the nearest old interior node.
Field transfer(const Field& from, const GridPtr& to);

/// Smooth pseudo-random perturbation: a few low Fourier modes with amplitude
/// scaled so that max |p| <= amplitude.
Eigen::VectorXd smooth_perturbation(const Grid& grid, double amplitude, std::uint64_t seed);

// Everything needed to pose the target problem on any member of the
// continuity family.
struct ProblemSpec {
  ConvexBody body;
  PhaseSpec phase;
  Coefficient f = Coefficient::constant(1.0);
  BoundaryClosure bc;
  double h = 1.0 / 32;
  GridOptions grid_options;
};

struct HomotopySchedule {
  double initial_step = 0.1;
  double min_step = 1.0 / 256;
  double max_step = 0.1;
};

struct HomotopyStep {
  double t = 0.0;
  double step = 0.0;
  bool accepted = false;
  int newton_iterations = 0;
  double final_residual = 0.0;
  double tail_ratio = 0.0;  // as in NewtonReport
  bool quadratic_tail = false;
  std::string failure;  // empty when accepted
};

struct HomotopyReport {
  std::vector<HomotopyStep> steps;
  int halvings = 0;
  int total_newton = 0;
  NewtonReport last_newton;
};

struct HomotopyResult {
  Field u;
  DiscreteProblem problem;
  HomotopyReport report;
};

/// Problem at parameter t: domain t*Omega + (1-t)*B_1, f_t = t f + 1 - t, phi_t = t phi.
DiscreteProblem homotopy_problem(const ProblemSpec& spec, double t, GridPtr grid = nullptr);

struct Perturbation {
  double amplitude = 0.0;
  std::uint64_t seed = 0;
};

HomotopyResult homotopy_solve(const ProblemSpec& spec, const HomotopySchedule& sched, const NewtonConfig& cfg,
                              const Perturbation& perturb = {});

struct EpsilonPath {
  std::vector<double> eps_values;  // decreasing, first entry is the Robin start
  static EpsilonPath halving(int steps);  // 1, 1/2, ..., 2^-steps
};

struct EpsilonStep {
  double eps = 0.0;
  double lambda = 0.0;  // -eps * mean(u^eps) over interior nodes
  double spread = 0.0;  // max |-eps u^eps - lambda|
  double max_grad = 0.0;
  int newton_iterations = 0;
  double final_residual = 0.0;
};

struct EpsilonPathReport {
  std::vector<EpsilonStep> steps;
  double lambda = 0.0;  // extrapolated to eps = 0
  HomotopyReport homotopy;
};

struct ClassicalResult {
  Field u;                  // mean zero over interior nodes
  double lambda = 0.0;
  DiscreteProblem problem;  // last eps problem, posed for the mean-zero field
  EpsilonPathReport report;
  std::vector<Field> path_fields;  // mean-zero fields per eps, kept when requested
};

/// spec.bc supplies phi; its mode is ignored (the path runs in Epsilon mode).
ClassicalResult classical_solve(const ProblemSpec& spec, const EpsilonPath& path, const HomotopySchedule& sched,
                                const NewtonConfig& cfg, const Perturbation& perturb = {}, bool keep_fields = false);

/// Quadratic extrapolation to eps = 0 through the last three (eps, lambda) pairs.
double extrapolate_lambda(const std::vector<EpsilonStep>& steps);

double interior_mean(const Field& u);

}  // namespace slt
