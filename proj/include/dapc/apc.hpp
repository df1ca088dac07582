#pragma once

// Data-driven univariate orthonormal polynomials (arbitrary polynomial chaos).
//
// A basis is built from raw moments alone: for each degree k the monomial
// coefficients solve the (k+1)x(k+1) Hankel system [mu_{i+j}] m = e_k. The
// solve runs on standardized moments, z = (x - center) / scale, in extended
// precision, and the resulting polynomials are mapped back to monomials in x.

#include <span>
#include <vector>

namespace dapc {

struct MomentSet {
  /// Highest moment index; a basis of degree d needs order >= 2d.
  int order = 0;
  /// Raw moments mu_0..mu_order, mu_0 == 1.
  std::vector<double> moments;

  /// Affine standardization applied before the Hankel solve.
  double center = 0.0;
  double scale = 1.0;
  /// E[z^k] for k = 0..order with z = (x - center) / scale.
  std::vector<long double> standardized;

  /// Builds a moment set from analytic raw moments (mu_0 must be 1).
  static MomentSet from_raw(std::vector<double> raw);
};

/// Empirical raw moments (1/N) sum x_i^k for k = 0..order.
MomentSet raw_moments(std::span<const double> samples, int order);

struct OrthonormalBasis1D {
  int degree = 0;
  /// coeffs[k][i] is the coefficient of x^i in phi_k; coeffs[k].size() == k + 1.
  std::vector<std::vector<double>> coeffs;
  /// Squared norm of each Hankel-solution polynomial before rescaling.
  std::vector<double> norms;

  double operator()(int k, double x) const;
};

OrthonormalBasis1D univariate_basis(const MomentSet& moments, int degree);

/// phi_k(x) by Horner's scheme. Throws degree-out-of-range for k outside [0, degree].
double eval_basis(const OrthonormalBasis1D& basis, int k, double x);
/// d phi_k / dx at x.
double eval_basis_derivative(const OrthonormalBasis1D& basis, int k, double x);

/// Fills values[k] = phi_k(x) and, if non-empty, derivs[k] = phi_k'(x) for
/// k = 0..basis.degree. Entries past basis.degree are set to zero.
void eval_basis_all(const OrthonormalBasis1D& basis, double x, std::span<double> values,
                    std::span<double> derivs = {});

/// The fixed {1, x} family a conventional network implicitly uses.
OrthonormalBasis1D gaussian_monomial_basis();

/// Real roots of phi_degree, ascending: the Gauss nodes of a (degree)-point
/// rule. Computed from the balanced companion matrix of the monic polynomial.
std::vector<double> quadrature_nodes(const OrthonormalBasis1D& basis);

/// Weights w_i with sum_i w_i x_i^k = mu_k for k < nodes.size().
std::vector<double> quadrature_weights(std::span<const double> nodes, const MomentSet& moments);

}  // namespace dapc
