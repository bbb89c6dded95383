#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace factorial {

enum class ErrorCode {
  EmptyCell,
  SingletonCell,
  ParseError,
  InvalidMass,
  DimensionMismatch,
  InvalidArgument,
  RankDeficient,
  IdentityViolation,
  TooManyAssignments,
  EstimatorFailure,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyCell: return "EmptyCell";
    case ErrorCode::SingletonCell: return "SingletonCell";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidMass: return "InvalidMass";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::IdentityViolation: return "IdentityViolation";
    case ErrorCode::TooManyAssignments: return "TooManyAssignments";
    case ErrorCode::EstimatorFailure: return "EstimatorFailure";
  }
  return "Unknown";
}

}  // namespace factorial
