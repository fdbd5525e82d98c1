#pragma once

#include <stdexcept>
#include <string>

namespace mmlin {

// Error categories surfaced through the C API as status codes.
enum class ErrorCode {
  kInvalidArgument = 1,
  kDataError,
  kMissingArm,
  kInvalidPruning,
  kInvalidDelta,
  kInvalidRule,
  kInvalidVariance,
  kSolverStalled,
  kOracleTooLarge,
  kDegenerateDenominator,
  kConfigError,
  kIoError,
};

const char* ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace mmlin
