#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace phigeo {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kNotNormalized,
  kNotSymmetric,
  kNotPositiveDefinite,
  kZeroProbability,
  kSchema,
  kParse,
  kIo,
  kRankDeficient,
  kNotConverged,
  kBoundaryActive,
};

// Stable identifier used in CLI messages and reports, e.g. "E_NOT_SYMMETRIC".
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace phigeo
