#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tmc {

enum class ErrorCode {
  invalid_size,
  unsupported_partition,
  path_too_long,
  config_mismatch,
  numerical_overflow,
  invalid_parameter,
  insufficient_samples,
  inconsistent_runs,
  no_crossing,
  fit_failed,
  insufficient_sizes,
  insufficient_data,
  too_large,
  usage,
  checkpoint_schema,
  io,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so that
// callers (and the CLI exit status) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tmc
