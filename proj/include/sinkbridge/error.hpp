#pragma once

#include <stdexcept>
#include <string>

namespace sinkbridge {

enum class ErrorCode {
  DimensionMismatch,
  NonPositiveMargin,
  MaxIterations,
  TooLargeForExact,
  ZeroPatternMismatch,
  NonPositiveTotal,
  GridMismatch,
  ZeroEntry,
  ZeroAlignment,
  UnboundedCost,
  BernoulliMeanOutOfRange,
  InfeasibleSpec,
  FlatnessViolated,
  NoConvergence,
  LeftHalfPlane,
  EigensolverFailure,
  RankDeficiencyUnexpected,
  InvalidArgument,
  Io,
};

// Base for every error raised by the library. Numeric failures
// (NoConvergence, EigensolverFailure, MaxIterations) are distinguished from
// validation errors through is_numeric().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  bool is_numeric() const noexcept {
    return code_ == ErrorCode::MaxIterations ||
           code_ == ErrorCode::NoConvergence ||
           code_ == ErrorCode::LeftHalfPlane ||
           code_ == ErrorCode::EigensolverFailure ||
           code_ == ErrorCode::RankDeficiencyUnexpected;
  }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonPositiveMargin: return "NonPositiveMargin";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::TooLargeForExact: return "TooLargeForExact";
    case ErrorCode::ZeroPatternMismatch: return "ZeroPatternMismatch";
    case ErrorCode::NonPositiveTotal: return "NonPositiveTotal";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::ZeroEntry: return "ZeroEntry";
    case ErrorCode::ZeroAlignment: return "ZeroAlignment";
    case ErrorCode::UnboundedCost: return "UnboundedCost";
    case ErrorCode::BernoulliMeanOutOfRange: return "BernoulliMeanOutOfRange";
    case ErrorCode::InfeasibleSpec: return "InfeasibleSpec";
    case ErrorCode::FlatnessViolated: return "FlatnessViolated";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::LeftHalfPlane: return "LeftHalfPlane";
    case ErrorCode::EigensolverFailure: return "EigensolverFailure";
    case ErrorCode::RankDeficiencyUnexpected: return "RankDeficiencyUnexpected";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace sinkbridge
