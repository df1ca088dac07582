#pragma once

// Plain single-layer aPC surrogate: per-input data-driven bases, a
// total-degree product basis and regularized least-squares coefficients.

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dapc/apc.hpp"
#include "dapc/multiindex.hpp"
#include "dapc/network.hpp"

namespace dapc {

struct ApcExpansion {
  int n_inputs = 0;
  int degree = 0;
  std::vector<OrthonormalBasis1D> bases;
  MultiIndexSet terms;
  Eigen::VectorXd coeffs;

  double operator()(std::span<const double> point) const;
  Eigen::VectorXd predict(const RowMatrix& inputs) const;
  double mean() const { return coeffs[0]; }
  double variance() const { return coeffs.tail(coeffs.size() - 1).squaredNorm(); }
  InputSensitivity sensitivity() const;
};

/// Fits on response column 0. Bases come from the empirical moments of each
/// input column unless `input_moments` supplies one MomentSet per input.
/// A negative ridge selects default_ridge.
ApcExpansion fit_apc(const Dataset& data, int degree, double ridge = -1.0,
                     const std::optional<std::vector<MomentSet>>& input_moments = std::nullopt);

}  // namespace dapc
