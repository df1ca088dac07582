#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dapc {

/// Machine-readable failure categories. Each maps to a stable kebab-case code
/// that the CLI prints and tests match on.
enum class ErrorCode {
  empty_sample,
  non_finite_input,
  moment_degeneracy,
  degree_out_of_range,
  non_real_roots,
  basis_too_large,
  dimension_mismatch,
  missing_normalization_stats,
  bases_not_refreshed,
  degenerate_node,
  empty_dataset,
  lm_stall,
  dimension_unsupported,
  invalid_argument,
  parse_error,
  weight_count_mismatch,
  unsupported_schema,
  io_error,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  std::string_view code_name() const noexcept { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

/// Raised by the univariate basis construction when the Hankel matrix of
/// moments stops being positive definite. `max_feasible_degree` is the
/// largest degree that still admits a real orthonormal family.
class MomentDegeneracy : public Error {
 public:
  MomentDegeneracy(int max_feasible_degree, const std::string& detail);

  int max_feasible_degree() const noexcept { return max_feasible_degree_; }

 private:
  int max_feasible_degree_;
};

}  // namespace dapc
