#include "renewlab/error.hpp"

namespace renewlab {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroLeadingCoefficient: return "ZeroLeadingCoefficient";
    case ErrorCode::NegativeCoefficient: return "NegativeCoefficient";
    case ErrorCode::NonPositiveCoefficient: return "NonPositiveCoefficient";
    case ErrorCode::BadExponent: return "BadExponent";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::InvalidSeries: return "InvalidSeries";
    case ErrorCode::PeriodicSupport: return "PeriodicSupport";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::TruncationTooSmall: return "TruncationTooSmall";
    case ErrorCode::DegreeTooSmall: return "DegreeTooSmall";
    case ErrorCode::InfiniteDegree: return "InfiniteDegree";
    case ErrorCode::ZeroValueInWindow: return "ZeroValueInWindow";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::NotNullRecurrent: return "NotNullRecurrent";
    case ErrorCode::DivergentPairing: return "DivergentPairing";
    case ErrorCode::SingularPoint: return "SingularPoint";
    case ErrorCode::ZeroProbabilityBranch: return "ZeroProbabilityBranch";
    case ErrorCode::SymbolCapExceeded: return "SymbolCapExceeded";
  }
  return "UnknownError";
}

ErrorClass classify(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::TruncationTooSmall:
    case ErrorCode::SymbolCapExceeded:
      return ErrorClass::Truncation;
    case ErrorCode::InvalidSeries:
    case ErrorCode::InvalidParameter:
    case ErrorCode::NotNormalized:
    case ErrorCode::PeriodicSupport:
      return ErrorClass::Input;
    default:
      return ErrorClass::Precondition;
  }
}

}  // namespace renewlab
