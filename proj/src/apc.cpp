#include "dapc/apc.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dapc/error.hpp"

namespace dapc {
namespace {

using Real = long double;

// Hankel pivots below this are treated as a loss of positive definiteness.
constexpr Real kPivotTolerance = 1e-12L;
constexpr double kImaginaryTolerance = 1e-8;

std::vector<Real> binomial_row(int n) {
  std::vector<Real> row(static_cast<std::size_t>(n) + 1, 1.0L);
  for (int k = 1; k < n; ++k) row[k] = row[k - 1] * static_cast<Real>(n - k + 1) / k;
  return row;
}

// Coefficients (in x) of p((x - center) / scale) given coefficients of p in z.
std::vector<double> unstandardize(const std::vector<Real>& zcoef, Real center, Real scale) {
  const int k = static_cast<int>(zcoef.size()) - 1;
  std::vector<Real> xcoef(zcoef.size(), 0.0L);
  Real inv_scale_pow = 1.0L;
  for (int i = 0; i <= k; ++i) {
    const Real a = zcoef[i] * inv_scale_pow;
    const auto binom = binomial_row(i);
    Real shift_pow = 1.0L;  // (-center)^(i-j), built from j = i downwards
    for (int j = i; j >= 0; --j) {
      xcoef[j] += a * binom[j] * shift_pow;
      shift_pow *= -center;
    }
    inv_scale_pow /= scale;
  }
  return {xcoef.begin(), xcoef.end()};
}

double horner(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

Real horner_ld(const std::vector<double>& c, Real x) {
  Real acc = 0.0L;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + static_cast<Real>(*it);
  return acc;
}

Real horner_derivative_ld(const std::vector<double>& c, Real x) {
  Real acc = 0.0L;
  for (std::size_t i = c.size(); i-- > 1;) acc = acc * x + static_cast<Real>(i) * c[i];
  return acc;
}

void check_degree(const OrthonormalBasis1D& basis, int k) {
  if (k < 0 || k > basis.degree) {
    throw Error(ErrorCode::degree_out_of_range,
                "k=" + std::to_string(k) + " outside [0, " + std::to_string(basis.degree) + "]");
  }
}

// Parlett-Reinsch balancing with radix-2 scalings.
void balance(Eigen::MatrixXd& a) {
  constexpr double radix = 2.0;
  constexpr double sqrdx = radix * radix;
  const Eigen::Index n = a.rows();
  bool done = false;
  while (!done) {
    done = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double r = 0.0;
      double c = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= sqrdx;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= sqrdx;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        a.row(i) /= f;
        a.col(i) *= f;
      }
    }
  }
}

}  // namespace

MomentSet MomentSet::from_raw(std::vector<double> raw) {
  if (raw.empty()) throw Error(ErrorCode::empty_sample, "no moments given");
  for (double v : raw) {
    if (!std::isfinite(v)) throw Error(ErrorCode::non_finite_input, "non-finite moment");
  }
  if (raw[0] != 1.0) throw Error(ErrorCode::invalid_argument, "mu_0 must equal 1");

  MomentSet m;
  m.order = static_cast<int>(raw.size()) - 1;
  m.moments = std::move(raw);

  Real center = m.order >= 1 ? m.moments[1] : 0.0L;
  Real scale = 1.0L;
  if (m.order >= 2) {
    const Real var = m.moments[2] - center * center;
    scale = var > 0.0L ? std::sqrt(var) : 1.0L;
  }
  m.center = static_cast<double>(center);
  m.scale = static_cast<double>(scale);

  m.standardized.assign(m.moments.size(), 0.0L);
  for (int k = 0; k <= m.order; ++k) {
    const auto binom = binomial_row(k);
    Real acc = 0.0L;
    Real shift_pow = 1.0L;
    for (int j = k; j >= 0; --j) {
      acc += binom[j] * static_cast<Real>(m.moments[j]) * shift_pow;
      shift_pow *= -center;
    }
    m.standardized[k] = acc / std::pow(scale, static_cast<Real>(k));
  }
  m.standardized[0] = 1.0L;
  return m;
}

MomentSet raw_moments(std::span<const double> samples, int order) {
  if (samples.empty()) throw Error(ErrorCode::empty_sample, "cannot compute moments of nothing");
  if (order < 0) throw Error(ErrorCode::invalid_argument, "moment order must be >= 0");
  for (double v : samples) {
    if (!std::isfinite(v)) throw Error(ErrorCode::non_finite_input, "non-finite sample");
  }

  const Real n = static_cast<Real>(samples.size());
  Real mean = 0.0L;
  for (double v : samples) mean += v;
  mean /= n;
  Real var = 0.0L;
  for (double v : samples) var += (v - mean) * (v - mean);
  var /= n;
  Real scale = std::sqrt(var);
  // A spread at rounding level of the mean is a constant signal; keep z = x - mean
  // so the Hankel matrix exposes the degeneracy.
  if (!(scale > 1e-13L * std::abs(mean)) || !(scale > 1e-300L)) scale = 1.0L;

  MomentSet m;
  m.order = order;
  m.center = static_cast<double>(mean);
  m.scale = static_cast<double>(scale);
  std::vector<Real> raw(static_cast<std::size_t>(order) + 1, 0.0L);
  m.standardized.assign(static_cast<std::size_t>(order) + 1, 0.0L);
  for (double v : samples) {
    const Real z = (v - mean) / scale;
    Real xp = 1.0L;
    Real zp = 1.0L;
    for (int k = 0; k <= order; ++k) {
      raw[k] += xp;
      m.standardized[k] += zp;
      xp *= v;
      zp *= z;
    }
  }
  m.moments.resize(raw.size());
  for (int k = 0; k <= order; ++k) {
    m.moments[k] = static_cast<double>(raw[k] / n);
    m.standardized[k] /= n;
  }
  m.moments[0] = 1.0;
  m.standardized[0] = 1.0L;
  return m;
}

double OrthonormalBasis1D::operator()(int k, double x) const { return eval_basis(*this, k, x); }

OrthonormalBasis1D univariate_basis(const MomentSet& moments, int degree) {
  if (degree < 0) throw Error(ErrorCode::invalid_argument, "degree must be >= 0");
  if (moments.order < 2 * degree) {
    throw Error(ErrorCode::invalid_argument, "degree " + std::to_string(degree) + " needs moments up to order " +
                                                 std::to_string(2 * degree));
  }
  const int n = degree + 1;
  const auto& mu = moments.standardized;

  // Cholesky of the Hankel matrix; leading blocks serve every lower degree.
  std::vector<std::vector<Real>> chol(n, std::vector<Real>(n, 0.0L));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      Real s = mu[i + j];
      for (int k = 0; k < j; ++k) s -= chol[i][k] * chol[j][k];
      if (i == j) {
        if (!(s > kPivotTolerance)) {
          throw MomentDegeneracy(i - 1, "Hankel matrix of moments not positive definite at degree " +
                                            std::to_string(i));
        }
        chol[i][i] = std::sqrt(s);
      } else {
        chol[i][j] = s / chol[j][j];
      }
    }
  }

  OrthonormalBasis1D basis;
  basis.degree = degree;
  basis.coeffs.resize(n);
  basis.norms.resize(n);
  basis.coeffs[0] = {1.0};
  basis.norms[0] = 1.0;

  for (int k = 1; k <= degree; ++k) {
    // L y = e_k, then L^T a = y, restricted to the leading (k+1) block.
    std::vector<Real> y(k + 1, 0.0L);
    y[k] = 1.0L / chol[k][k];
    std::vector<Real> a(k + 1, 0.0L);
    for (int i = k; i >= 0; --i) {
      Real s = y[i];
      for (int j = i + 1; j <= k; ++j) s -= chol[j][i] * a[j];
      a[i] = s / chol[i][i];
    }
    Real norm2 = 0.0L;
    for (int i = 0; i <= k; ++i) {
      for (int j = 0; j <= k; ++j) norm2 += a[i] * a[j] * mu[i + j];
    }
    if (!(norm2 > 0.0L) || !std::isfinite(static_cast<double>(norm2))) {
      throw MomentDegeneracy(k - 1, "singular Hankel solve at degree " + std::to_string(k));
    }
    const Real inv = 1.0L / std::sqrt(norm2);
    for (auto& v : a) v *= inv;
    basis.norms[k] = static_cast<double>(norm2);
    basis.coeffs[k] = unstandardize(a, moments.center, moments.scale);
  }
  return basis;
}

double eval_basis(const OrthonormalBasis1D& basis, int k, double x) {
  check_degree(basis, k);
  return horner(basis.coeffs[k], x);
}

double eval_basis_derivative(const OrthonormalBasis1D& basis, int k, double x) {
  check_degree(basis, k);
  const auto& c = basis.coeffs[k];
  double acc = 0.0;
  for (std::size_t i = c.size(); i-- > 1;) acc = acc * x + static_cast<double>(i) * c[i];
  return acc;
}

void eval_basis_all(const OrthonormalBasis1D& basis, double x, std::span<double> values,
                    std::span<double> derivs) {
  const int limit = static_cast<int>(values.size());
  for (int k = 0; k < limit; ++k) {
    if (k > basis.degree) {
      values[k] = 0.0;
      if (!derivs.empty()) derivs[k] = 0.0;
      continue;
    }
    const auto& c = basis.coeffs[k];
    double v = 0.0;
    double d = 0.0;
    for (std::size_t i = c.size(); i-- > 0;) {
      d = d * x + v;
      v = v * x + c[i];
    }
    values[k] = v;
    if (!derivs.empty()) derivs[k] = d;
  }
}

OrthonormalBasis1D gaussian_monomial_basis() {
  OrthonormalBasis1D basis;
  basis.degree = 1;
  basis.coeffs = {{1.0}, {0.0, 1.0}};
  basis.norms = {1.0, 1.0};
  return basis;
}

std::vector<double> quadrature_nodes(const OrthonormalBasis1D& basis) {
  const int n = basis.degree;
  if (n < 1) throw Error(ErrorCode::invalid_argument, "quadrature needs a basis of degree >= 1");
  const auto& c = basis.coeffs[n];
  const double lead = c[n];

  std::vector<double> roots;
  if (n == 1) {
    roots.push_back(-c[0] / lead);
  } else {
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) companion(i, n - 1) = -c[i] / lead;
    balance(companion);
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
      throw Error(ErrorCode::non_real_roots, "companion eigenvalue iteration failed");
    }
    for (const auto& z : solver.eigenvalues()) {
      if (std::abs(z.imag()) > kImaginaryTolerance * std::max(1.0, std::abs(z.real()))) {
        throw Error(ErrorCode::non_real_roots, "complex root " + std::to_string(z.real()) + "+" +
                                                   std::to_string(z.imag()) + "i");
      }
      roots.push_back(z.real());
    }
  }

  // Newton polish on the polynomial itself.
  for (double& r : roots) {
    Real x = r;
    Real fx = std::abs(horner_ld(c, x));
    for (int it = 0; it < 4; ++it) {
      const Real d = horner_derivative_ld(c, x);
      if (d == 0.0L) break;
      const Real next = x - horner_ld(c, x) / d;
      const Real fn = std::abs(horner_ld(c, next));
      if (!(fn < fx)) break;
      x = next;
      fx = fn;
    }
    r = static_cast<double>(x);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

std::vector<double> quadrature_weights(std::span<const double> nodes, const MomentSet& moments) {
  const int n = static_cast<int>(nodes.size());
  if (n == 0) throw Error(ErrorCode::invalid_argument, "no nodes");
  if (moments.order < n - 1) {
    throw Error(ErrorCode::invalid_argument, "need moments up to order " + std::to_string(n - 1));
  }
  // Vandermonde system in the standardized variable, Gaussian elimination with
  // partial pivoting in extended precision.
  std::vector<std::vector<Real>> a(n, std::vector<Real>(n + 1, 0.0L));
  for (int j = 0; j < n; ++j) {
    const Real z = (static_cast<Real>(nodes[j]) - moments.center) / moments.scale;
    Real p = 1.0L;
    for (int k = 0; k < n; ++k) {
      a[k][j] = p;
      p *= z;
    }
  }
  for (int k = 0; k < n; ++k) a[k][n] = moments.standardized[k];

  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    std::swap(a[col], a[piv]);
    if (a[col][col] == 0.0L) throw Error(ErrorCode::invalid_argument, "coincident quadrature nodes");
    for (int r = col + 1; r < n; ++r) {
      const Real f = a[r][col] / a[col][col];
      for (int c = col; c <= n; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> w(n);
  std::vector<Real> sol(n);
  for (int r = n - 1; r >= 0; --r) {
    Real s = a[r][n];
    for (int c = r + 1; c < n; ++c) s -= a[r][c] * sol[c];
    sol[r] = s / a[r][r];
  }
  for (int i = 0; i < n; ++i) w[i] = static_cast<double>(sol[i]);
  return w;
}

}  // namespace dapc
