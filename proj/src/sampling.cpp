#include "dapc/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dapc/error.hpp"
#include "dapc/random.hpp"

namespace dapc {
namespace {

constexpr int kSobolBits = 32;

std::vector<std::uint32_t> direction_numbers(int dim) {
  std::vector<std::uint32_t> v(kSobolBits);
  if (dim == 0) {
    for (int k = 0; k < kSobolBits; ++k) v[k] = std::uint32_t{1} << (kSobolBits - 1 - k);
    return v;
  }
  const auto& entry = detail::kSobolTable[dim - 1];
  const int s = entry.degree;
  std::vector<std::uint32_t> m(kSobolBits + 1);
  for (int k = 1; k <= s; ++k) m[k] = entry.m[k - 1];
  for (int k = s + 1; k <= kSobolBits; ++k) {
    std::uint32_t next = m[k - s] ^ (m[k - s] << s);
    for (int i = 1; i < s; ++i) {
      if ((entry.poly >> (s - 1 - i)) & 1u) next ^= m[k - i] << i;
    }
    m[k] = next;
  }
  for (int k = 1; k <= kSobolBits; ++k) v[k - 1] = m[k] << (kSobolBits - k);
  return v;
}

void check_marginals(std::size_t columns, std::span<const Marginal> marginals) {
  if (columns != marginals.size()) {
    throw Error(ErrorCode::dimension_mismatch,
                std::to_string(columns) + " columns for " + std::to_string(marginals.size()) + " marginals");
  }
}

}  // namespace

Marginal Marginal::uniform(double a, double b) {
  if (!std::isfinite(a) || !std::isfinite(b) || !(a < b)) {
    throw Error(ErrorCode::invalid_argument, "uniform marginal needs finite a < b");
  }
  Marginal m;
  m.kind = Kind::uniform;
  m.a = a;
  m.b = b;
  return m;
}

Marginal Marginal::empirical(std::vector<double> sample) {
  if (sample.empty()) throw Error(ErrorCode::empty_sample, "empirical marginal needs samples");
  for (double x : sample) {
    if (!std::isfinite(x)) throw Error(ErrorCode::non_finite_input, "non-finite empirical sample");
  }
  std::sort(sample.begin(), sample.end());
  Marginal m;
  m.kind = Kind::empirical;
  m.a = sample.front();
  m.b = sample.back();
  m.sorted_sample = std::move(sample);
  return m;
}

double Marginal::quantile(double u) const {
  if (kind == Kind::uniform) return a + (b - a) * u;
  const auto& s = sorted_sample;
  if (s.size() == 1) return s.front();
  const double h = std::clamp(u, 0.0, 1.0) * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= s.size()) return s.back();
  return s[lo] + (h - static_cast<double>(lo)) * (s[lo + 1] - s[lo]);
}

MomentSet Marginal::moments(int order) const {
  if (kind == Kind::empirical) return raw_moments(sorted_sample, order);
  std::vector<double> mu(order + 1);
  for (int k = 0; k <= order; ++k) {
    mu[k] = (std::pow(b, k + 1) - std::pow(a, k + 1)) / ((k + 1) * (b - a));
  }
  mu[0] = 1.0;
  return MomentSet::from_raw(std::move(mu));
}

RowMatrix sobol_points(int n_dims, std::size_t count, std::size_t skip) {
  if (n_dims < 1) throw Error(ErrorCode::invalid_argument, "n_dims must be >= 1");
  if (n_dims > kSobolMaxDims) {
    throw Error(ErrorCode::dimension_unsupported,
                std::to_string(n_dims) + " dimensions requested, table covers " + std::to_string(kSobolMaxDims));
  }
  if (count + skip > (std::size_t{1} << kSobolBits)) {
    throw Error(ErrorCode::invalid_argument, "Sobol sequence length exceeds 2^32");
  }

  std::vector<std::vector<std::uint32_t>> v;
  for (int d = 0; d < n_dims; ++d) v.push_back(direction_numbers(d));

  RowMatrix out(static_cast<Eigen::Index>(count), n_dims);
  std::vector<std::uint32_t> x(n_dims, 0);
  const std::size_t total = skip + count;
  for (std::size_t i = 0; i < total; ++i) {
    if (i >= skip) {
      for (int d = 0; d < n_dims; ++d) {
        out(static_cast<Eigen::Index>(i - skip), d) = static_cast<double>(x[d]) * 0x1.0p-32;
      }
    }
    int c = 0;
    for (std::size_t value = i; value & 1u; value >>= 1) ++c;
    if (c >= kSobolBits) break;
    for (int d = 0; d < n_dims; ++d) x[d] ^= v[d][c];
  }
  return out;
}

RowMatrix map_to_marginals(const RowMatrix& unit_points, std::span<const Marginal> marginals) {
  check_marginals(static_cast<std::size_t>(unit_points.cols()), marginals);
  RowMatrix out(unit_points.rows(), unit_points.cols());
  for (Eigen::Index r = 0; r < unit_points.rows(); ++r) {
    for (Eigen::Index c = 0; c < unit_points.cols(); ++c) out(r, c) = marginals[c].quantile(unit_points(r, c));
  }
  return out;
}

RowMatrix gaussian_tensor_grid(std::span<const OrthonormalBasis1D> bases) {
  if (bases.empty()) throw Error(ErrorCode::invalid_argument, "grid needs at least one basis");
  std::vector<std::vector<double>> nodes;
  Eigen::Index rows = 1;
  for (const auto& b : bases) {
    nodes.push_back(quadrature_nodes(b));
    rows *= static_cast<Eigen::Index>(nodes.back().size());
  }
  const auto n = static_cast<Eigen::Index>(bases.size());
  RowMatrix out(rows, n);
  std::vector<std::size_t> pos(bases.size(), 0);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index j = 0; j < n; ++j) out(r, j) = nodes[j][pos[j]];
    for (Eigen::Index j = n - 1; j >= 0; --j) {
      if (++pos[j] < nodes[j].size()) break;
      pos[j] = 0;
    }
  }
  return out;
}

RowMatrix gaussian_grid(std::span<const Marginal> marginals, int nodes_per_axis) {
  if (nodes_per_axis < 1) throw Error(ErrorCode::invalid_argument, "need at least one node per axis");
  std::vector<OrthonormalBasis1D> bases;
  for (const auto& m : marginals) bases.push_back(univariate_basis(m.moments(2 * nodes_per_axis), nodes_per_axis));
  return gaussian_tensor_grid(bases);
}

Eigen::VectorXd gaussian_tensor_weights(std::span<const std::vector<double>> axis_nodes,
                                        std::span<const MomentSet> axis_moments) {
  if (axis_nodes.size() != axis_moments.size() || axis_nodes.empty()) {
    throw Error(ErrorCode::dimension_mismatch, "need one moment set per axis");
  }
  std::vector<std::vector<double>> w;
  Eigen::Index rows = 1;
  for (std::size_t j = 0; j < axis_nodes.size(); ++j) {
    w.push_back(quadrature_weights(axis_nodes[j], axis_moments[j]));
    rows *= static_cast<Eigen::Index>(w.back().size());
  }
  Eigen::VectorXd out(rows);
  std::vector<std::size_t> pos(w.size(), 0);
  for (Eigen::Index r = 0; r < rows; ++r) {
    double prod = 1.0;
    for (std::size_t j = 0; j < w.size(); ++j) prod *= w[j][pos[j]];
    out[r] = prod;
    for (std::size_t j = w.size(); j-- > 0;) {
      if (++pos[j] < w[j].size()) break;
      pos[j] = 0;
    }
  }
  return out;
}

RowMatrix monte_carlo_points(int n_dims, std::size_t count, std::uint64_t seed, std::span<const Marginal> marginals) {
  check_marginals(static_cast<std::size_t>(n_dims), marginals);
  RowMatrix unit(static_cast<Eigen::Index>(count), n_dims);
  Rng rng(seed);
  for (Eigen::Index r = 0; r < unit.rows(); ++r) {
    for (Eigen::Index c = 0; c < n_dims; ++c) unit(r, c) = rng.uniform();
  }
  return map_to_marginals(unit, marginals);
}

}  // namespace dapc
