#include "eqmo/error.hpp"

namespace eqmo {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SigmaTooSmall: return "SigmaTooSmall";
    case ErrorCode::NonAffineMeanTerm: return "NonAffineMeanTerm";
    case ErrorCode::EmptyRiskTerm: return "EmptyRiskTerm";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::UnsupportedOrder: return "UnsupportedOrder";
    case ErrorCode::NegativeVariance: return "NegativeVariance";
    case ErrorCode::OffGridTime: return "OffGridTime";
    case ErrorCode::OrderMismatch: return "OrderMismatch";
    case ErrorCode::TooFewPaths: return "TooFewPaths";
    case ErrorCode::NoSecondOrderTerm: return "NoSecondOrderTerm";
    case ErrorCode::NoRealRoot: return "NoRealRoot";
    case ErrorCode::AmbiguousRoot: return "AmbiguousRoot";
    case ErrorCode::EmptyVGrid: return "EmptyVGrid";
    case ErrorCode::UnsupportedObjectiveClass: return "UnsupportedObjectiveClass";
    case ErrorCode::EpsNotOnGrid: return "EpsNotOnGrid";
    case ErrorCode::RegressionSingular: return "RegressionSingular";
    case ErrorCode::CyclicDependency: return "CyclicDependency";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      diagnostics_{message} {}

Error::Error(ErrorCode code, const std::string& message, std::vector<std::string> diagnostics)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      diagnostics_(std::move(diagnostics)) {}

}  // namespace eqmo
