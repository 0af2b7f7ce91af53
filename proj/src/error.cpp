#include "phigeo/error.hpp"

namespace phigeo {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "E_INVALID_ARGUMENT";
    case ErrorCode::kDimensionMismatch: return "E_BAD_DIMENSION";
    case ErrorCode::kNotNormalized: return "E_NOT_NORMALIZED";
    case ErrorCode::kNotSymmetric: return "E_NOT_SYMMETRIC";
    case ErrorCode::kNotPositiveDefinite: return "E_NOT_SPD";
    case ErrorCode::kZeroProbability: return "E_ZERO_PROBABILITY";
    case ErrorCode::kSchema: return "E_SCHEMA";
    case ErrorCode::kParse: return "E_PARSE";
    case ErrorCode::kIo: return "E_IO";
    case ErrorCode::kRankDeficient: return "E_RANK_DEFICIENT";
    case ErrorCode::kNotConverged: return "E_NOT_CONVERGED";
    case ErrorCode::kBoundaryActive: return "E_BOUNDARY_ACTIVE";
  }
  return "E_UNKNOWN";
}

}  // namespace phigeo
