#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dapc/apc.hpp"
#include "dapc/types.hpp"

namespace dapc {

/// Distribution of one input: uniform(a, b) or an empirical sample.
struct Marginal {
  enum class Kind { uniform, empirical };

  Kind kind = Kind::uniform;
  double a = 0.0;
  double b = 1.0;
  std::vector<double> sorted_sample;

  static Marginal uniform(double a, double b);
  static Marginal empirical(std::vector<double> sample);

  /// Inverse CDF; empirical marginals interpolate linearly between order
  /// statistics (position u * (n - 1)).
  double quantile(double u) const;
  /// Analytic raw moments for uniform, sample raw moments for empirical.
  MomentSet moments(int order) const;
};

/// Largest dimension covered by the embedded direction numbers.
inline constexpr int kSobolMaxDims = 20;

/// Unscrambled Sobol points in [0, 1)^n_dims; the first `skip` points of the
/// sequence (starting at the origin) are dropped.
RowMatrix sobol_points(int n_dims, std::size_t count, std::size_t skip = 1);

RowMatrix map_to_marginals(const RowMatrix& unit_points, std::span<const Marginal> marginals);

/// Full tensor grid of the roots of each basis's highest-degree polynomial.
/// The last input varies fastest.
RowMatrix gaussian_tensor_grid(std::span<const OrthonormalBasis1D> bases);

/// Tensor grid with `nodes_per_axis` Gauss nodes of each marginal.
RowMatrix gaussian_grid(std::span<const Marginal> marginals, int nodes_per_axis);

/// Product quadrature weights matching gaussian_tensor_grid's row order.
Eigen::VectorXd gaussian_tensor_weights(std::span<const std::vector<double>> axis_nodes,
                                        std::span<const MomentSet> axis_moments);

RowMatrix monte_carlo_points(int n_dims, std::size_t count, std::uint64_t seed, std::span<const Marginal> marginals);

namespace detail {
struct SobolDirection {
  int degree;
  unsigned poly;
  unsigned m[8];
};
/// Entries for dimensions 2..kSobolMaxDims.
extern const SobolDirection kSobolTable[kSobolMaxDims - 1];
}  // namespace detail

}  // namespace dapc
