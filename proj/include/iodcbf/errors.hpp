#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace iodcbf {

enum class ErrorCode {
  ShapeMismatch,
  InvalidArgument,
  DepthTooLarge,
  InsufficientData,
  ResidualTooLarge,
  InconsistentData,
  BadBounds,
  ZeroRow,
  EmptyResult,
  NotConverged,
  SolverFailure,
  HistoryMismatch,
  ConfigError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DepthTooLarge: return "DepthTooLarge";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::ResidualTooLarge: return "ResidualTooLarge";
    case ErrorCode::InconsistentData: return "InconsistentData";
    case ErrorCode::BadBounds: return "BadBounds";
    case ErrorCode::ZeroRow: return "ZeroRow";
    case ErrorCode::EmptyResult: return "EmptyResult";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::HistoryMismatch: return "HistoryMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` tells callers which
/// contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace iodcbf
