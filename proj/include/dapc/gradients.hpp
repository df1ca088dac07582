#pragma once

#include <Eigen/Dense>

#include "dapc/network.hpp"

namespace dapc {

/// d R(omega_t) / d w for every input row and every weight, columns in the
/// canonical flat order. Bases and normalization statistics are held fixed.
/// If `responses` is given it receives R(omega_t).
Eigen::MatrixXd weight_jacobian(const NetworkState& state, const RowMatrix& inputs,
                                Eigen::VectorXd* responses = nullptr);

/// Jacobian of the response when every hidden-layer basis (and its
/// normalization statistics) is rebuilt from the batch `inputs` as the
/// weights move. Adds to weight_jacobian the chain through the batch moments
/// of each hidden signal; the response's dependence on those moments is
/// taken by central differences. `inputs` must be the batch the state was
/// refreshed on.
Eigen::MatrixXd basis_aware_jacobian(const NetworkState& state, const RowMatrix& inputs,
                                     Eigen::VectorXd* responses = nullptr, const RefreshOptions& options = {});

/// Central differences with step rel_step * max(1, |w|), bases held fixed.
Eigen::MatrixXd finite_difference_jacobian(const NetworkState& state, const RowMatrix& inputs,
                                           double rel_step = 1e-6);

/// max |a - b| / max(1, |a|) over all entries.
double max_relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& reference);

}  // namespace dapc
