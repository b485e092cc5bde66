#include "ice/core/error.hpp"

namespace ice {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::contract_violation: return "contract_violation";
    case ErrorCode::unknown_token: return "unknown_token";
    case ErrorCode::unknown_concept: return "unknown_concept";
    case ErrorCode::degenerate_distribution: return "degenerate_distribution";
    case ErrorCode::degenerate_region: return "degenerate_region";
    case ErrorCode::numeric_failure: return "numeric_failure";
    case ErrorCode::input_not_found: return "input_not_found";
    case ErrorCode::invalid_input: return "invalid_input";
    case ErrorCode::schema_violation: return "schema_violation";
    case ErrorCode::descriptions_missing: return "descriptions_missing";
    case ErrorCode::backend_unavailable: return "backend_unavailable";
    case ErrorCode::version_mismatch: return "version_mismatch";
    case ErrorCode::checksum_mismatch: return "checksum_mismatch";
  }
  return "unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::numeric_failure:
      return 4;
    case ErrorCode::descriptions_missing:
    case ErrorCode::backend_unavailable:
      return 3;
    default:
      return 2;
  }
}

}  // namespace ice
