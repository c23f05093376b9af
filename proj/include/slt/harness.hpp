#pragma once

// Measurements on discrete solutions: a priori norms, the boundary barrier
// functionals, the Lions-Trudinger-Urbas type functional V, the gradient
// auxiliary functionals, and randomized property suites on the level set
// sum arctan(lambda_i / f) = Theta.

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "slt/assembly.hpp"

namespace slt {

struct EstimateReport {
  double c0 = 0.0;             // max |u| over interior nodes and foot points
  double c1 = 0.0;             // max |Du| over interior nodes
  double c1_boundary = 0.0;    // max |Du| over collar nodes
  double dnn = 0.0;            // max |u_nu nu| over foot points
  double d2 = 0.0;             // max spectral radius of D^2 u
  double min_laplacian = 0.0;  // min trace D^2 u
  double phase_residual = 0.0; // max |F - Theta|
};

/// NotASolution when the phase residual exceeds 100 * solver_tol.
EstimateReport estimate_report(const DiscreteProblem& p, const Field& u, double solver_tol = 1e-10);

/// (2u(b) - 5u(b - h nu) + 4u(b - 2h nu) - u(b - 3h nu)) / h^2 at the foot of ghost g.
double double_normal(const Field& u, int ghost);

struct DiagnosticSpec {
  double B0 = 10.0;
  double B = 10.0;
  double a0 = 10.0;
  double b = 0.1;
  double mu = 0.0;                    // collar width; 0 picks the geometry default
  std::optional<double> M0;           // default max|u| + 1
  std::vector<Vec> directions;        // default 64 (2-D) or 128 (3-D) unit vectors
  std::vector<double> sweep{1.0, 10.0, 100.0, 1000.0, 10000.0};
};

struct Extremum {
  double value = 0.0;
  int node = -1;
  Vec position;
  double depth = 0.0;  // distance to the boundary
  bool on_band = false;  // depth <= 1.5 h
};

struct SweepEntry {
  double constant = 0.0;
  bool on_band = false;
};

struct BarrierReport {
  double B0 = 0.0;
  Extremum upper_min;  // min of u_nu - phi - (u_nu - phi)^2/2 - B0 h
  Extremum lower_max;  // max of u_nu - phi + (u_nu - phi)^2/2 + B0 h
  bool on_band = false;
  std::vector<SweepEntry> sweep;
  std::optional<double> smallest_B0;
  int collar_nodes = 0;
};

/// Evaluated on collar nodes with u_nu = <Du, Dh>, h = -d + d^2, and
/// phi(x, u) = rhs(x) - c u from the boundary closure. CollarTooThin when
/// the collar is thinner than three grid layers.
BarrierReport barrier_diag(const DiscreteProblem& p, const Field& u, const DiagnosticSpec& spec = {});

/// Both barrier functionals at one collar node: {upper, lower}.
std::pair<double, double> barrier_values(const DiscreteProblem& p, const Field& u, int node, double B0, double mu);

struct LtuReport {
  double B = 0.0;
  Extremum max;              // over nodes and directions, total derivative of phi(x, u)
  Extremum max_partial;      // same with the partial x-derivative of phi
  bool all_directions_on_band = false;
  int directions = 0;
  std::vector<SweepEntry> sweep;  // on_band means every direction's max lies on the band
  std::optional<double> smallest_B;
};

/// V(x, xi) = u_xixi - v(x, xi) + |Du|^2/2 + B|x|^2/2 with
/// v = 2<xi, nu><xi', Dphi - Du - u_k D nu^k> in the collar and v = 0 outside.
LtuReport ltu_diag(const DiscreteProblem& p, const Field& u, const DiagnosticSpec& spec = {});

enum class AuxFunctional {
  Collar,  // G = log|Dw|^2 - log(M0 - u) + a0 d, w = u + phi d, on collar nodes
  Path,    // P = log|Dw|^2 + b|x|^2/2, w = (1 + eps h)u - phi h, on all nodes (eps closure only)
};

struct AuxReport {
  AuxFunctional functional = AuxFunctional::Collar;
  Extremum max;
  double M0 = 0.0;
};

AuxReport gradient_aux_diag(const DiscreteProblem& p, const Field& u, const DiagnosticSpec& spec,
                            AuxFunctional which);

/// Max over interior nodes (with interior axis neighbours) of
/// |<F^{ij}, d_p D^2 u> - f_p sum lambda_i / (f^2 + lambda_i^2)|, the x_p derivative of the equation.
double identity_residual(const DiscreteProblem& p, const Field& u);

/// Spectra on the level set: angles theta_1..theta_{n-1} uniform in
/// (-pi/2, pi/2), theta_n = Theta - sum, rejected unless |theta_n| < pi/2.
std::vector<Spectrum<double>> sample_level_set(int n, double theta, double f, int count, std::uint64_t seed);

struct LemmaSuiteReport {
  int count = 0;
  int upper_pass = 0;
  int inverse_pass = 0;
  int lower_pass = 0;
  int mean_zero_pass = 0;
  int wy_pass = 0;
  bool wy_checked = false;  // only at the critical phase
  double worst_upper = 0.0;
  double worst_inverse = 0.0;
  double worst_lower = 0.0;
  double worst_mean_zero = 0.0;  // relative: sum lambda x^2 / sum |lambda| x^2
  double worst_wy = 0.0;
  double min_trace_gap = 0.0;    // min of sum F^ii - sum F^ii lambda_i (measured only)
  bool passed() const;
};

LemmaSuiteReport run_lemma_suites(int n, double theta, double f, int count, std::uint64_t seed);

}  // namespace slt
