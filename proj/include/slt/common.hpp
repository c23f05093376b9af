#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <exception>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace slt {

// Dimension is a runtime value in {2,3}; small dense objects never allocate.
constexpr int kMaxDim = 3;

template <typename Scalar>
using SmallVec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
template <typename Scalar>
using SmallMat =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

using Vec = SmallVec<double>;
using Mat = SmallMat<double>;

enum class ErrorCode {
  NonConvex,
  BadDimension,
  ProjectionDiverged,
  OutsideCollar,
  NotSymmetric,
  NonpositiveF,
  PhaseViolated,
  NotMeanZero,
  TooCoarse,
  OutsideInterpolationDomain,
  NonFiniteField,
  NotBall,
  LinearSolveFailed,
  LineSearchStalled,
  MaxIterExceeded,
  PhaseGuardViolated,
  StepUnderflow,
  PathDiverged,
  BranchExit,
  DomainMismatch,
  NotASolution,
  CollarTooThin,
  WrongBCMode,
  NonPositiveLogArgument,
  AdmissibilityExhausted,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

// Every module reports failures through this one exception type; the code is
// what callers (and the CLI summary) dispatch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

// Process-wide worker count used by per-node loops. Results never depend on it.
int thread_count();
void set_thread_count(int threads);

// Runs fn(i) for i in [begin, end) split into contiguous chunks.
template <typename Fn>
void parallel_for(std::ptrdiff_t begin, std::ptrdiff_t end, Fn&& fn) {
  const std::ptrdiff_t count = end - begin;
  const int workers = static_cast<int>(std::min<std::ptrdiff_t>(thread_count(), count / 256 + 1));
  if (workers <= 1) {
    for (std::ptrdiff_t i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::ptrdiff_t chunk = (count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const std::ptrdiff_t lo = begin + w * chunk;
      const std::ptrdiff_t hi = std::min(end, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([lo, hi, w, &fn, &errors] {
        try {
          for (std::ptrdiff_t i = lo; i < hi; ++i) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  // Rethrow the error of the lowest chunk so the reported failure does not depend on timing.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace slt
