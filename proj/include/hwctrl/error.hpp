#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hwctrl {

/// Error families. The numeric value is the CLI exit code.
enum class ErrorCode : int {
  InvalidInput = 2,
  Io = 3,
  NotATree = 10,
  NonPositiveRate = 11,
  ShapeMismatch = 12,
  PoolingViolated = 20,
  NotCriticallyLoaded = 21,
  Singular = 22,
  NotInDomainDG = 30,
  InconsistentAffineForm = 31,
  NoAbandonment = 40,
  NotTriangular = 41,
  NonPositiveDiagonal = 42,
  DriftViolated = 43,
  ConeTooNarrow = 44,
  NumericalBlowup = 50,
  NoConvergence = 60,
  SingularEvaluation = 61,
  Infeasible = 62,
  DimensionTooLarge = 63,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::Io: return "Io";
    case ErrorCode::NotATree: return "NotATree";
    case ErrorCode::NonPositiveRate: return "NonPositiveRate";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::PoolingViolated: return "PoolingViolated";
    case ErrorCode::NotCriticallyLoaded: return "NotCriticallyLoaded";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::NotInDomainDG: return "NotInDomainDG";
    case ErrorCode::InconsistentAffineForm: return "InconsistentAffineForm";
    case ErrorCode::NoAbandonment: return "NoAbandonment";
    case ErrorCode::NotTriangular: return "NotTriangular";
    case ErrorCode::NonPositiveDiagonal: return "NonPositiveDiagonal";
    case ErrorCode::DriftViolated: return "DriftViolated";
    case ErrorCode::ConeTooNarrow: return "ConeTooNarrow";
    case ErrorCode::NumericalBlowup: return "NumericalBlowup";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::SingularEvaluation: return "SingularEvaluation";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::DimensionTooLarge: return "DimensionTooLarge";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hwctrl
