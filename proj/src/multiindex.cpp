#include "dapc/multiindex.hpp"

#include <cstdint>
#include <limits>
#include <string>

#include "dapc/error.hpp"

namespace dapc {
namespace {

// Appends every composition of `remaining` into positions [pos, n) in
// descending lexicographic order.
void compositions(MultiIndex& current, int pos, int remaining, std::vector<MultiIndex>& out) {
  const int n = static_cast<int>(current.size());
  if (pos == n - 1) {
    current[pos] = remaining;
    out.push_back(current);
    return;
  }
  for (int v = remaining; v >= 0; --v) {
    current[pos] = v;
    compositions(current, pos + 1, remaining - v, out);
  }
  current[pos] = 0;
}

}  // namespace

std::size_t total_degree_count(int n_inputs, int degree) {
  // C(n + d, d) built incrementally; every partial product is itself a binomial.
  std::uint64_t count = 1;
  for (int k = 1; k <= degree; ++k) {
    const std::uint64_t num = static_cast<std::uint64_t>(n_inputs) + k;
    if (count > std::numeric_limits<std::uint64_t>::max() / num) return std::numeric_limits<std::size_t>::max();
    count = count * num / k;
  }
  return static_cast<std::size_t>(count);
}

MultiIndexSet enumerate_total_degree(int n_inputs, int degree, std::size_t cap) {
  if (n_inputs < 1) throw Error(ErrorCode::invalid_argument, "n_inputs must be >= 1");
  if (degree < 0) throw Error(ErrorCode::invalid_argument, "degree must be >= 0");
  const std::size_t count = total_degree_count(n_inputs, degree);
  if (count > cap) {
    throw Error(ErrorCode::basis_too_large, "n=" + std::to_string(n_inputs) + ", d=" + std::to_string(degree) +
                                                " gives " + std::to_string(count) + " terms (cap " +
                                                std::to_string(cap) + ")");
  }

  MultiIndexSet set;
  set.n_inputs = n_inputs;
  set.degree = degree;
  set.indices.reserve(count);
  MultiIndex current(n_inputs, 0);
  for (int total = 0; total <= degree; ++total) compositions(current, 0, total, set.indices);

  set.support.resize(set.indices.size());
  for (std::size_t i = 0; i < set.indices.size(); ++i) {
    for (int j = 0; j < n_inputs; ++j) {
      if (set.indices[i][j] > 0) set.support[i].emplace_back(j, set.indices[i][j]);
    }
  }
  return set;
}

std::vector<double> eval_multivariate(std::span<const OrthonormalBasis1D> bases, const MultiIndexSet& terms,
                                      std::span<const double> point) {
  const auto n = static_cast<std::size_t>(terms.n_inputs);
  if (bases.size() != n || point.size() != n) {
    throw Error(ErrorCode::dimension_mismatch, "expected " + std::to_string(n) + " bases and coordinates, got " +
                                                   std::to_string(bases.size()) + " and " +
                                                   std::to_string(point.size()));
  }
  const int width = terms.degree + 1;
  std::vector<double> table(n * width);
  for (std::size_t j = 0; j < n; ++j) {
    for (int k = 0; k < width; ++k) table[j * width + k] = eval_basis(bases[j], k, point[j]);
  }
  std::vector<double> out(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    double v = 1.0;
    for (const auto& [j, a] : terms.support[i]) v *= table[j * width + a];
    out[i] = v;
  }
  return out;
}

}  // namespace dapc
