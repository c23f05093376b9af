#pragma once

// Pointwise spectral calculus for F(M) = sum_i arctan(lambda_i(M) / f).
//
// Everything here is a pure function of a small symmetric matrix (n = 2 or 3)
// and is templated on the scalar so the same code can be run in long double
// when checking the double-precision path.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "slt/common.hpp"

namespace slt {

template <typename Scalar>
struct Spectrum {
  SmallVec<Scalar> lambda;  // descending
  SmallMat<Scalar> frame;   // column k pairs with lambda(k)

  int dim() const { return static_cast<int>(lambda.size()); }
};

enum class PhaseClass { Critical, Supercritical, Invalid };

struct PhaseSpec {
  double theta = 0.0;
  int n = 2;
  double delta = 0.0;  // theta - (n-2)pi/2
  PhaseClass cls = PhaseClass::Invalid;
};

template <typename Scalar>
struct PairTensor {
  // coeff(i,i): d^2F/dM_ii^2 in the eigenframe; coeff(i,j), i != j: the
  // coefficient of the (ij)(ji) pair. All other entries of F^{ij,kl} vanish.
  SmallMat<Scalar> coeff;
};

template <typename Scalar>
struct OperatorEval {
  Scalar value{};
  SmallVec<Scalar> grad_eig;
  SmallMat<Scalar> grad_ambient;
  Scalar trace_F{};
  PairTensor<Scalar> hess_pairs;
};

template <typename Scalar>
struct GradientEig {
  SmallVec<Scalar> grad;
  Scalar trace{};
};

struct SpectrumProps {
  bool positive_upper = false;    // lambda_{n-1} > 0 and |lambda_n| <= lambda_{n-1}
  bool inverse_sum = false;       // lambda_n < 0 implies sum 1/lambda_i <= 0
  bool lower_bound = false;       // delta > 0 implies lambda_n >= -f cot(delta)
  double margin_upper = 0.0;      // lambda_{n-1} - |lambda_n|
  double margin_inverse = 0.0;    // -sum 1/lambda_i, or +inf when vacuous
  double margin_lower = 0.0;      // lambda_n + f cot(delta), or +inf when vacuous
  bool all() const { return positive_upper && inverse_sum && lower_bound; }
};

namespace detail {

template <typename Scalar>
void check_f(Scalar f) {
  if (!(f > Scalar(0))) fail(ErrorCode::NonpositiveF, "f must be positive");
}

template <typename Scalar>
void fix_column_signs(SmallMat<Scalar>& q) {
  for (int c = 0; c < q.cols(); ++c) {
    for (int r = 0; r < q.rows(); ++r) {
      if (std::abs(q(r, c)) > Scalar(1e-12)) {
        if (q(r, c) < Scalar(0)) q.col(c) = -q.col(c);
        break;
      }
    }
  }
}

template <typename Scalar>
void eig2(const SmallMat<Scalar>& a, SmallVec<Scalar>& lambda, SmallMat<Scalar>& q) {
  using std::atan2;
  using std::cos;
  using std::hypot;
  using std::sin;
  const Scalar mean = (a(0, 0) + a(1, 1)) / 2;
  const Scalar half_gap = (a(0, 0) - a(1, 1)) / 2;
  const Scalar rad = hypot(half_gap, a(0, 1));
  lambda.resize(2);
  lambda << mean + rad, mean - rad;
  const Scalar phi = atan2(2 * a(0, 1), a(0, 0) - a(1, 1)) / 2;
  q.resize(2, 2);
  q << cos(phi), -sin(phi), sin(phi), cos(phi);
}

// Cyclic Jacobi with fixed sweep order (0,1), (0,2), (1,2).
template <typename Scalar>
void eig3(SmallMat<Scalar> a, SmallVec<Scalar>& lambda, SmallMat<Scalar>& q) {
  constexpr Scalar eps = std::numeric_limits<Scalar>::epsilon();
  q = SmallMat<Scalar>::Identity(3, 3);
  constexpr std::array<std::array<int, 2>, 3> pairs{{{0, 1}, {0, 2}, {1, 2}}};
  for (int sweep = 0; sweep < 64; ++sweep) {
    const Scalar off = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
    const Scalar diag = a(0, 0) * a(0, 0) + a(1, 1) * a(1, 1) + a(2, 2) * a(2, 2);
    if (off <= eps * eps * diag * Scalar(1e-4) || off == Scalar(0)) break;
    for (const auto& [p, r] : pairs) {
      const Scalar apq = a(p, r);
      if (apq == Scalar(0)) continue;
      const Scalar theta = (a(r, r) - a(p, p)) / (2 * apq);
      Scalar t;
      if (std::abs(theta) > Scalar(1e100)) {
        t = Scalar(1) / (2 * theta);
      } else {
        t = (theta >= 0 ? Scalar(1) : Scalar(-1)) / (std::abs(theta) + std::sqrt(theta * theta + 1));
      }
      const Scalar c = Scalar(1) / std::sqrt(t * t + 1);
      const Scalar s = t * c;
      SmallMat<Scalar> rot = SmallMat<Scalar>::Identity(3, 3);
      rot(p, p) = c;
      rot(r, r) = c;
      rot(p, r) = s;
      rot(r, p) = -s;
      a = (rot.transpose() * a * rot).eval();
      a(p, r) = a(r, p) = Scalar(0);
      q = (q * rot).eval();
    }
  }
  lambda = a.diagonal();
}

}  // namespace detail

/// Sorted spectrum of a symmetric 2x2 or 3x3 matrix. Inputs asymmetric beyond
/// 1e-12 (relative to max(1, |M|_max)) are rejected; smaller asymmetry is
/// averaged away.
template <typename Derived>
Spectrum<typename Derived::Scalar> eig_sym(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  const int n = static_cast<int>(m.rows());
  if (m.rows() != m.cols() || n < 2 || n > kMaxDim) {
    fail(ErrorCode::BadDimension, "eig_sym expects a 2x2 or 3x3 matrix");
  }
  const SmallMat<Scalar> full = m;
  const Scalar scale = std::max(Scalar(1), full.cwiseAbs().maxCoeff());
  const Scalar asym = (full - full.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= Scalar(1e-12) * scale)) fail(ErrorCode::NotSymmetric, "matrix is not symmetric");
  const SmallMat<Scalar> a = (full + full.transpose()) / 2;

  SmallVec<Scalar> raw;
  SmallMat<Scalar> vecs;
  if (n == 2) {
    detail::eig2(a, raw, vecs);
  } else {
    detail::eig3(a, raw, vecs);
  }

  std::array<int, kMaxDim> order{};
  std::iota(order.begin(), order.begin() + n, 0);
  std::stable_sort(order.begin(), order.begin() + n, [&](int i, int j) { return raw(i) > raw(j); });

  Spectrum<Scalar> sp;
  sp.lambda.resize(n);
  sp.frame.resize(n, n);
  for (int k = 0; k < n; ++k) {
    sp.lambda(k) = raw(order[k]);
    sp.frame.col(k) = vecs.col(order[k]);
  }
  detail::fix_column_signs(sp.frame);
  return sp;
}

template <typename Scalar>
SmallMat<Scalar> reconstruct(const Spectrum<Scalar>& sp) {
  return sp.frame * sp.lambda.asDiagonal() * sp.frame.transpose();
}

/// sum_i arctan(lambda_i / f)
template <typename Scalar>
Scalar theta_value(const Spectrum<Scalar>& sp, Scalar f) {
  detail::check_f(f);
  Scalar sum(0);
  for (int i = 0; i < sp.dim(); ++i) sum += std::atan2(sp.lambda(i), f);
  return sum;
}

template <typename Scalar>
GradientEig<Scalar> gradient_eig(const Spectrum<Scalar>& sp, Scalar f) {
  detail::check_f(f);
  GradientEig<Scalar> g;
  g.grad.resize(sp.dim());
  for (int i = 0; i < sp.dim(); ++i) g.grad(i) = f / (f * f + sp.lambda(i) * sp.lambda(i));
  g.trace = g.grad.sum();
  return g;
}

/// dF/dM in ambient coordinates; a function of the eigenvalues only, so it is
/// well defined for repeated eigenvalues.
template <typename Scalar>
SmallMat<Scalar> gradient_ambient(const Spectrum<Scalar>& sp, Scalar f) {
  const auto g = gradient_eig(sp, f);
  return sp.frame * g.grad.asDiagonal() * sp.frame.transpose();
}

template <typename Scalar>
PairTensor<Scalar> hessian_pairs(const Spectrum<Scalar>& sp, Scalar f) {
  detail::check_f(f);
  const int n = sp.dim();
  const Scalar f2 = f * f;
  PairTensor<Scalar> t;
  t.coeff.resize(n, n);
  for (int i = 0; i < n; ++i) {
    const Scalar li = sp.lambda(i);
    const Scalar di = f2 + li * li;
    const Scalar diag = -2 * f * li / (di * di);
    for (int j = 0; j < n; ++j) {
      if (i == j) {
        t.coeff(i, i) = diag;
        continue;
      }
      const Scalar lj = sp.lambda(j);
      // Divided difference of g(t) = f/(f^2+t^2); at coincidence use g'.
      if (std::abs(li - lj) < Scalar(1e-7) * (1 + std::abs(li) + std::abs(lj))) {
        t.coeff(i, j) = diag;
      } else {
        t.coeff(i, j) = -f * (li + lj) / (di * (f2 + lj * lj));
      }
    }
  }
  return t;
}

/// Second directional derivative d^2/dt^2 F(M + tS) at t = 0.
template <typename Scalar, typename Derived>
Scalar contract_pairs(const PairTensor<Scalar>& pairs, const Spectrum<Scalar>& sp,
                      const Eigen::MatrixBase<Derived>& s) {
  const SmallMat<Scalar> rotated = sp.frame.transpose() * s * sp.frame;
  return (pairs.coeff.array() * rotated.array().square()).sum();
}

template <typename Scalar>
OperatorEval<Scalar> evaluate(const Spectrum<Scalar>& sp, Scalar f) {
  OperatorEval<Scalar> e;
  e.value = theta_value(sp, f);
  const auto g = gradient_eig(sp, f);
  e.grad_eig = g.grad;
  e.trace_F = g.trace;
  e.grad_ambient = sp.frame * g.grad.asDiagonal() * sp.frame.transpose();
  e.hess_pairs = hessian_pairs(sp, f);
  return e;
}

inline PhaseSpec phase_classify(double theta, int n) {
  using std::numbers::pi;
  if (n < 2 || n > kMaxDim) fail(ErrorCode::BadDimension, "phase_classify expects n in {2,3}");
  PhaseSpec ph;
  ph.theta = theta;
  ph.n = n;
  ph.delta = theta - (n - 2) * pi / 2;
  if (std::abs(ph.delta) <= 1e-12) ph.delta = 0.0;
  if (!std::isfinite(theta) || ph.delta < 0.0 || theta >= n * pi / 2) {
    ph.cls = PhaseClass::Invalid;
  } else if (ph.delta == 0.0) {
    ph.cls = PhaseClass::Critical;
  } else {
    ph.cls = PhaseClass::Supercritical;
  }
  return ph;
}

inline std::string_view to_string(PhaseClass c) {
  switch (c) {
    case PhaseClass::Critical: return "critical";
    case PhaseClass::Supercritical: return "supercritical";
    case PhaseClass::Invalid: return "invalid";
  }
  return "invalid";
}

/// Structural properties of a spectrum on or above the critical level set:
/// positivity of the upper n-1 eigenvalues, the reciprocal-sum sign, and the
/// explicit lower bound lambda_n >= -f cot(delta).
template <typename Scalar>
SpectrumProps lemma_spectrum_props(const Spectrum<Scalar>& sp, Scalar f, const PhaseSpec& ph) {
  using std::numbers::pi;
  const int n = sp.dim();
  if (ph.n != n) fail(ErrorCode::BadDimension, "phase dimension does not match spectrum");
  const double level = static_cast<double>(theta_value(sp, f));
  if (level < (n - 2) * pi / 2 - 1e-12) {
    fail(ErrorCode::PhaseViolated, "spectrum lies below the critical level set");
  }
  const double inf = std::numeric_limits<double>::infinity();
  const double upper = static_cast<double>(sp.lambda(n - 2));
  const double last = static_cast<double>(sp.lambda(n - 1));

  SpectrumProps r;
  r.margin_upper = upper - std::abs(last);
  r.positive_upper = upper > 0.0 && r.margin_upper >= -1e-12;

  r.margin_inverse = inf;
  r.inverse_sum = true;
  if (last < 0.0) {
    double inv = 0.0;
    for (int i = 0; i < n; ++i) inv += 1.0 / static_cast<double>(sp.lambda(i));
    r.margin_inverse = -inv;
    r.inverse_sum = inv <= 1e-12;
  }

  r.margin_lower = inf;
  r.lower_bound = true;
  if (ph.delta > 0.0) {
    const double bound = -static_cast<double>(f) / std::tan(ph.delta);
    r.margin_lower = last - bound;
    r.lower_bound = r.margin_lower >= -1e-12;
  }
  return r;
}

/// sum_i F^{ii} lambda_i
template <typename Scalar>
Scalar wy_value(const Spectrum<Scalar>& sp, Scalar f) {
  detail::check_f(f);
  Scalar sum(0);
  for (int i = 0; i < sp.dim(); ++i) {
    const Scalar l = sp.lambda(i);
    sum += f * l / (f * f + l * l);
  }
  return sum;
}

/// sum_i lambda_i x_i^2 for a mean-zero x. The spectrum must have the sign
/// structure of the critical level set (upper n-1 eigenvalues positive, and
/// sum 1/lambda_i <= 0 when lambda_n < 0).
template <typename Scalar, typename Derived>
Scalar mean_zero_quadratic(const Spectrum<Scalar>& sp, const Eigen::MatrixBase<Derived>& x) {
  const int n = sp.dim();
  if (x.size() != n) fail(ErrorCode::BadDimension, "vector length does not match spectrum");
  if (std::abs(x.sum()) > Scalar(1e-12) * x.norm()) fail(ErrorCode::NotMeanZero, "entries must sum to zero");
  if (sp.lambda(n - 1) < Scalar(0)) {
    Scalar inv(0);
    for (int i = 0; i < n; ++i) inv += Scalar(1) / sp.lambda(i);
    if (!(sp.lambda(n - 2) > Scalar(0)) || inv > Scalar(1e-12)) {
      fail(ErrorCode::PhaseViolated, "spectrum lacks the critical-phase sign structure");
    }
  }
  return (sp.lambda.array() * x.array().square()).sum();
}

}  // namespace slt
