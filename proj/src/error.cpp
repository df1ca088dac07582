#include "dapc/error.hpp"

namespace dapc {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::empty_sample: return "empty-sample";
    case ErrorCode::non_finite_input: return "non-finite-input";
    case ErrorCode::moment_degeneracy: return "moment-degeneracy";
    case ErrorCode::degree_out_of_range: return "degree-out-of-range";
    case ErrorCode::non_real_roots: return "non-real-roots";
    case ErrorCode::basis_too_large: return "basis-too-large";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::missing_normalization_stats: return "missing-normalization-stats";
    case ErrorCode::bases_not_refreshed: return "bases-not-refreshed";
    case ErrorCode::degenerate_node: return "degenerate-node";
    case ErrorCode::empty_dataset: return "empty-dataset";
    case ErrorCode::lm_stall: return "lm-stall";
    case ErrorCode::dimension_unsupported: return "dimension-unsupported";
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::weight_count_mismatch: return "weight-count-mismatch";
    case ErrorCode::unsupported_schema: return "unsupported-schema";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + detail), code_(code) {}

MomentDegeneracy::MomentDegeneracy(int max_feasible_degree, const std::string& detail)
    : Error(ErrorCode::moment_degeneracy,
            detail + " (max feasible degree " + std::to_string(max_feasible_degree) + ")"),
      max_feasible_degree_(max_feasible_degree) {}

}  // namespace dapc
