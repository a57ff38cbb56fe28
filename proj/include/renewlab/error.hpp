#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace renewlab {

enum class ErrorCode {
  // series
  ZeroLeadingCoefficient,
  NegativeCoefficient,
  NonPositiveCoefficient,
  BadExponent,
  OutOfDomain,
  InvalidSeries,
  // chain
  PeriodicSupport,
  NotNormalized,
  InvalidParameter,
  TruncationTooSmall,
  DegreeTooSmall,
  // evolve
  InfiniteDegree,
  ZeroValueInWindow,
  PreconditionViolated,
  NotNullRecurrent,
  DivergentPairing,
  // spectral
  SingularPoint,
  // dynsys
  ZeroProbabilityBranch,
  SymbolCapExceeded,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Broad failure class, used by the CLI to choose an exit status.
enum class ErrorClass { Input, Precondition, Truncation };

ErrorClass classify(ErrorCode code) noexcept;

class MathError : public std::runtime_error {
 public:
  MathError(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace renewlab
