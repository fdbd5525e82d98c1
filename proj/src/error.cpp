#include "mmlin/error.hpp"

namespace mmlin {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDataError: return "DataError";
    case ErrorCode::kMissingArm: return "MissingArm";
    case ErrorCode::kInvalidPruning: return "InvalidPruning";
    case ErrorCode::kInvalidDelta: return "InvalidDelta";
    case ErrorCode::kInvalidRule: return "InvalidRule";
    case ErrorCode::kInvalidVariance: return "InvalidVariance";
    case ErrorCode::kSolverStalled: return "SolverStalled";
    case ErrorCode::kOracleTooLarge: return "OracleTooLarge";
    case ErrorCode::kDegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace mmlin
