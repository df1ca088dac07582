#pragma once

#include <Eigen/Dense>

namespace dapc {

/// Point sets: one row per sample, one column per coordinate.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace dapc
