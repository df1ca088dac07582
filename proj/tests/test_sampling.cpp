#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"

#include "dapc/apc.hpp"
#include "dapc/error.hpp"
#include "dapc/random.hpp"
#include "dapc/sampling.hpp"

using namespace dapc;

namespace {

// Exact star discrepancy of a 2-D point set over the boxes anchored at the
// origin whose corners lie on point coordinates (or 1).
double star_discrepancy_2d(const RowMatrix& p) {
  const Eigen::Index n = p.rows();
  std::vector<double> xs{1.0}, ys{1.0};
  for (Eigen::Index i = 0; i < n; ++i) {
    xs.push_back(p(i, 0));
    ys.push_back(p(i, 1));
  }
  double worst = 0.0;
  for (double bx : xs) {
    for (double by : ys) {
      int open = 0;
      int closed = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        open += p(i, 0) < bx && p(i, 1) < by;
        closed += p(i, 0) <= bx && p(i, 1) <= by;
      }
      const double vol = bx * by;
      worst = std::max({worst, vol - static_cast<double>(open) / n, static_cast<double>(closed) / n - vol});
    }
  }
  return worst;
}

double star_discrepancy_1d(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    worst = std::max({worst, (i + 1) / n - x[i], x[i] - i / n});
  }
  return worst;
}

RowMatrix pseudo_random(int n, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  RowMatrix x(count, n);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < n; ++j) x(i, j) = rng.uniform();
  }
  return x;
}

}  // namespace

TEST_CASE("first Sobol points") {
  const auto one = sobol_points(1, 3);
  CHECK(one(0, 0) == 0.5);
  CHECK(one(1, 0) == 0.75);
  CHECK(one(2, 0) == 0.25);

  const auto two = sobol_points(2, 4);
  const double expected[4][2] = {{0.5, 0.5}, {0.75, 0.25}, {0.25, 0.75}, {0.375, 0.375}};
  for (int i = 0; i < 4; ++i) {
    CHECK(two(i, 0) == expected[i][0]);
    CHECK(two(i, 1) == expected[i][1]);
  }
  CHECK(sobol_points(2, 1, 0)(0, 0) == 0.0);
}

TEST_CASE("Sobol points agree with a reference generator in 10 and 20 dimensions") {
  const auto ten = sobol_points(10, 5);
  const std::vector<std::vector<double>> ref{
      {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5},
      {0.75, 0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.75, 0.75, 0.75},
      {0.25, 0.75, 0.75, 0.75, 0.25, 0.25, 0.75, 0.25, 0.25, 0.25},
      {0.375, 0.375, 0.625, 0.875, 0.375, 0.125, 0.375, 0.875, 0.875, 0.625},
      {0.875, 0.875, 0.125, 0.375, 0.875, 0.625, 0.875, 0.375, 0.375, 0.125}};
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 10; ++j) CHECK(ten(i, j) == ref[i][j]);
  }
  const auto twenty = sobol_points(20, 39);
  const std::vector<double> row39{0.171875, 0.890625, 0.828125, 0.671875, 0.015625, 0.546875, 0.421875,
                                  0.046875, 0.359375, 0.921875, 0.765625, 0.828125, 0.828125, 0.609375,
                                  0.859375, 0.234375, 0.046875, 0.171875, 0.796875, 0.390625};
  for (int j = 0; j < 20; ++j) CHECK(twenty(38, j) == row39[j]);
}

TEST_CASE("Sobol errors") {
  try {
    sobol_points(21, 4);
    FAIL("expected dimension-unsupported");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::dimension_unsupported);
  }
}

TEST_CASE("Sobol points beat pseudo-random points in star discrepancy") {
  const auto s1 = sobol_points(1, 256);
  const auto r1 = pseudo_random(1, 256, 3);
  CHECK(star_discrepancy_1d(std::vector<double>(s1.data(), s1.data() + 256)) <
        star_discrepancy_1d(std::vector<double>(r1.data(), r1.data() + 256)));
  for (std::uint64_t seed : {1, 2, 3}) {
    CHECK(star_discrepancy_2d(sobol_points(2, 256)) < star_discrepancy_2d(pseudo_random(2, 256, seed)));
  }
}

TEST_CASE("property: Sobol points stay in the unit cube and are distinct per dimension") {
  for (int n = 1; n <= kSobolMaxDims; ++n) {
    const auto p = sobol_points(n, 512);
    CHECK(p.minCoeff() > 0.0);
    CHECK(p.maxCoeff() < 1.0);
    for (int j = 0; j < n; ++j) {
      std::vector<double> col(512);
      for (int i = 0; i < 512; ++i) col[i] = p(i, j);
      std::sort(col.begin(), col.end());
      CHECK(std::adjacent_find(col.begin(), col.end()) == col.end());
    }
  }
}

TEST_CASE("marginal mapping") {
  const std::vector<Marginal> pi{Marginal::uniform(-std::numbers::pi, std::numbers::pi)};
  RowMatrix u(1, 1);
  u(0, 0) = 0.5;
  CHECK(map_to_marginals(u, pi)(0, 0) == 0.0);
  const std::vector<Marginal> five{Marginal::uniform(-5.0, 5.0)};
  u(0, 0) = 0.0;
  CHECK(map_to_marginals(u, five)(0, 0) == -5.0);

  const auto emp = Marginal::empirical({5.0, 3.0, 1.0, 4.0, 2.0});
  CHECK(emp.quantile(0.25) == 2.0);
  CHECK(emp.quantile(0.0) == 1.0);
  CHECK(emp.quantile(1.0) == 5.0);
  CHECK(emp.quantile(0.1) == doctest::Approx(1.4));

  try {
    map_to_marginals(RowMatrix::Zero(2, 2), five);
    FAIL("expected dimension-mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::dimension_mismatch);
  }
  CHECK_THROWS_AS(Marginal::uniform(1.0, 1.0), Error);
  CHECK_THROWS_AS(Marginal::empirical({}), Error);
}

TEST_CASE("marginal moments") {
  const auto m = Marginal::uniform(-1.0, 3.0).moments(4);
  // E[x^k] = (3^{k+1} - (-1)^{k+1}) / (4 (k+1))
  for (int k = 0; k <= 4; ++k) {
    const double ref = (std::pow(3.0, k + 1) - std::pow(-1.0, k + 1)) / (4.0 * (k + 1));
    CHECK(m.moments[k] == doctest::Approx(ref).epsilon(1e-14));
  }
  const auto e = Marginal::empirical({1.0, 2.0, 3.0}).moments(2);
  CHECK(e.moments[2] == doctest::Approx(14.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("Gaussian tensor grids") {
  const std::vector<Marginal> cube(3, Marginal::uniform(-std::numbers::pi, std::numbers::pi));
  CHECK(gaussian_grid(cube, 3).rows() == 27);
  CHECK(gaussian_grid(cube, 6).rows() == 216);
  CHECK(gaussian_grid(cube, 11).rows() == 1331);

  const std::vector<Marginal> unit{Marginal::uniform(-1.0, 1.0)};
  const auto g = gaussian_grid(unit, 2);
  REQUIRE(g.rows() == 2);
  CHECK(g(0, 0) == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(g(1, 0) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));

  // Last input varies fastest; mixed per-axis degrees.
  std::vector<OrthonormalBasis1D> bases{univariate_basis(Marginal::uniform(0, 1).moments(4), 2),
                                        univariate_basis(Marginal::uniform(0, 1).moments(6), 3)};
  const auto grid = gaussian_tensor_grid(bases);
  REQUIRE(grid.rows() == 6);
  CHECK(grid(0, 0) == grid(2, 0));
  CHECK(grid(0, 1) < grid(1, 1));
  CHECK(grid(3, 0) > grid(0, 0));
}

TEST_CASE("property: tensor quadrature integrates product monomials") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    CAPTURE(trial);
    const int n = 1 + static_cast<int>(rng.uniform() * 3);
    std::vector<std::vector<double>> axis_nodes;
    std::vector<MomentSet> axis_moments;
    std::vector<OrthonormalBasis1D> bases;
    std::vector<int> degree;
    for (int j = 0; j < n; ++j) {
      const int d = 1 + static_cast<int>(rng.uniform() * 3);
      std::vector<double> sample(300);
      const double shift = rng.normal();
      for (double& x : sample) x = shift + std::exp(0.5 * rng.normal());
      const auto m = raw_moments(sample, 2 * d + 2);
      bases.push_back(univariate_basis(m, d + 1));
      axis_nodes.push_back(quadrature_nodes(bases.back()));
      axis_moments.push_back(m);
      degree.push_back(d);
    }
    const auto grid = gaussian_tensor_grid(bases);
    const auto w = gaussian_tensor_weights(axis_nodes, axis_moments);
    REQUIRE(w.size() == grid.rows());
    for (int check = 0; check < 10; ++check) {
      std::vector<int> k(n);
      double exact = 1.0;
      for (int j = 0; j < n; ++j) {
        k[j] = static_cast<int>(rng.uniform() * (2 * degree[j] + 2));
        exact *= axis_moments[j].moments[k[j]];
      }
      double q = 0.0;
      for (Eigen::Index i = 0; i < grid.rows(); ++i) {
        double v = w[i];
        for (int j = 0; j < n; ++j) v *= std::pow(grid(i, j), k[j]);
        q += v;
      }
      CHECK(std::abs(q - exact) < 1e-8 * std::max(1.0, std::abs(exact)));
    }
  }
}

TEST_CASE("Monte Carlo points") {
  const std::vector<Marginal> pi(2, Marginal::uniform(-std::numbers::pi, std::numbers::pi));
  CHECK(monte_carlo_points(2, 50, 7, pi) == monte_carlo_points(2, 50, 7, pi));
  CHECK(monte_carlo_points(2, 50, 7, pi) != monte_carlo_points(2, 50, 8, pi));
  CHECK(monte_carlo_points(2, 0, 7, pi).rows() == 0);
  const auto big = monte_carlo_points(1, 100'000, 3, std::vector<Marginal>{pi[0]});
  const double sd = std::numbers::pi / std::sqrt(3.0);
  CHECK(std::abs(big.mean()) < 3.0 * sd / std::sqrt(100'000.0));
  CHECK(big.minCoeff() >= -std::numbers::pi);
  CHECK(big.maxCoeff() < std::numbers::pi);
}
