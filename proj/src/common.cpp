#include "slt/common.hpp"

#include <atomic>

namespace slt {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonConvex: return "NonConvex";
    case ErrorCode::BadDimension: return "BadDimension";
    case ErrorCode::ProjectionDiverged: return "ProjectionDiverged";
    case ErrorCode::OutsideCollar: return "OutsideCollar";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NonpositiveF: return "NonpositiveF";
    case ErrorCode::PhaseViolated: return "PhaseViolated";
    case ErrorCode::NotMeanZero: return "NotMeanZero";
    case ErrorCode::TooCoarse: return "TooCoarse";
    case ErrorCode::OutsideInterpolationDomain: return "OutsideInterpolationDomain";
    case ErrorCode::NonFiniteField: return "NonFiniteField";
    case ErrorCode::NotBall: return "NotBall";
    case ErrorCode::LinearSolveFailed: return "LinearSolveFailed";
    case ErrorCode::LineSearchStalled: return "LineSearchStalled";
    case ErrorCode::MaxIterExceeded: return "MaxIterExceeded";
    case ErrorCode::PhaseGuardViolated: return "PhaseGuardViolated";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::PathDiverged: return "PathDiverged";
    case ErrorCode::BranchExit: return "BranchExit";
    case ErrorCode::DomainMismatch: return "DomainMismatch";
    case ErrorCode::NotASolution: return "NotASolution";
    case ErrorCode::CollarTooThin: return "CollarTooThin";
    case ErrorCode::WrongBCMode: return "WrongBCMode";
    case ErrorCode::NonPositiveLogArgument: return "NonPositiveLogArgument";
    case ErrorCode::AdmissibilityExhausted: return "AdmissibilityExhausted";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

namespace {
std::atomic<int> g_threads{1};
}

int thread_count() { return g_threads.load(std::memory_order_relaxed); }

void set_thread_count(int threads) { g_threads.store(std::max(1, threads), std::memory_order_relaxed); }

}  // namespace slt
