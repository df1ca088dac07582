#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "dapc/apc.hpp"

namespace dapc {

inline constexpr std::size_t kDefaultTermCap = 1'000'000;

using MultiIndex = std::vector<int>;

/// Total-degree multi-indices in graded order: ascending total degree, and
/// within one degree descending lexicographic, so (1,0,0) precedes (0,1,0).
/// Index 0 is always the all-zero tuple.
struct MultiIndexSet {
  int n_inputs = 0;
  int degree = 0;
  std::vector<MultiIndex> indices;
  /// Nonzero (input, degree) pairs of each index, for sparse evaluation.
  std::vector<std::vector<std::pair<int, int>>> support;

  std::size_t size() const { return indices.size(); }
};

/// (n + d)! / (n! d!), or SIZE_MAX when it would overflow.
std::size_t total_degree_count(int n_inputs, int degree);

MultiIndexSet enumerate_total_degree(int n_inputs, int degree, std::size_t cap = kDefaultTermCap);

/// Psi_alpha(point) = prod_j phi_j^{alpha_j}(point_j) for every alpha in `terms`.
std::vector<double> eval_multivariate(std::span<const OrthonormalBasis1D> bases, const MultiIndexSet& terms,
                                      std::span<const double> point);

}  // namespace dapc
