#include "tmc/error.hpp"

namespace tmc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_size: return "invalid-size";
    case ErrorCode::unsupported_partition: return "unsupported-partition";
    case ErrorCode::path_too_long: return "path-too-long";
    case ErrorCode::config_mismatch: return "config-mismatch";
    case ErrorCode::numerical_overflow: return "numerical-overflow";
    case ErrorCode::invalid_parameter: return "invalid-parameter";
    case ErrorCode::insufficient_samples: return "insufficient-samples";
    case ErrorCode::inconsistent_runs: return "inconsistent-runs";
    case ErrorCode::no_crossing: return "no-crossing";
    case ErrorCode::fit_failed: return "fit-failed";
    case ErrorCode::insufficient_sizes: return "insufficient-sizes";
    case ErrorCode::insufficient_data: return "insufficient-data";
    case ErrorCode::too_large: return "too-large";
    case ErrorCode::usage: return "usage";
    case ErrorCode::checkpoint_schema: return "checkpoint-schema";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

}  // namespace tmc
