#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eqmo {

enum class ErrorCode {
  SigmaTooSmall,
  NonAffineMeanTerm,
  EmptyRiskTerm,
  GridMismatch,
  OutOfRange,
  UnsupportedOrder,
  NegativeVariance,
  OffGridTime,
  OrderMismatch,
  TooFewPaths,
  NoSecondOrderTerm,
  NoRealRoot,
  AmbiguousRoot,
  EmptyVGrid,
  UnsupportedObjectiveClass,
  EpsNotOnGrid,
  RegressionSingular,
  CyclicDependency,
  ParseError,
  IoError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. `diagnostics` carries every violation found when a
/// check collects more than one (validation), otherwise it holds the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  Error(ErrorCode code, const std::string& message, std::vector<std::string> diagnostics);

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

 private:
  ErrorCode code_;
  std::vector<std::string> diagnostics_;
};

}  // namespace eqmo
