#pragma once

#include <stdexcept>
#include <string>

namespace adalio {

enum class ErrorCode {
  kInput,               // malformed or non-finite input data
  kPropagationGap,      // IMU step outside (0, 0.1] s
  kUndistortCoverage,   // point time outside the pose history
  kNotAtRest,           // initialization data is not stationary
  kNumericalFailure,    // non-finite gain or state
  kParse,               // text file parse failure
  kBadMagic,            // binary scan header magic/version mismatch
  kTruncated,           // binary payload shorter than the header claims
  kNonMonotone,         // timestamps not increasing
  kConfig,              // missing/unknown/invalid configuration key
  kIo,                  // file cannot be opened or written
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInput: return "input";
    case ErrorCode::kPropagationGap: return "propagation-gap";
    case ErrorCode::kUndistortCoverage: return "undistortion-coverage";
    case ErrorCode::kNotAtRest: return "not-at-rest";
    case ErrorCode::kNumericalFailure: return "numerical-failure";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kNonMonotone: return "non-monotone";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + " error: " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace adalio
