#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ice {

enum class ErrorCode {
  contract_violation,
  unknown_token,
  unknown_concept,
  degenerate_distribution,
  degenerate_region,
  numeric_failure,
  input_not_found,
  invalid_input,
  schema_violation,
  descriptions_missing,
  backend_unavailable,
  version_mismatch,
  checksum_mismatch,
};

std::string_view to_string(ErrorCode code);

// Process exit code for a CLI failure of this kind: 2 input, 3 missing
// dependency or fixture, 4 numeric failure.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorCode::contract_violation, message);
}

}  // namespace ice
