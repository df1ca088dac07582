#include <cmath>
#include <vector>

#include "doctest.h"

#include "dapc/error.hpp"
#include "dapc/gradients.hpp"
#include "dapc/network.hpp"
#include "dapc/random.hpp"

using namespace dapc;

namespace {

RowMatrix uniform_inputs(int n, std::size_t count, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  RowMatrix x(count, n);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < n; ++j) x(i, j) = lo + (hi - lo) * rng.uniform();
  }
  return x;
}

NetworkState randomize(NetworkState s, std::uint64_t seed, double scale) {
  Rng rng(seed);
  auto w = s.flat_weights();
  for (double& v : w) v = scale * rng.normal();
  s.set_flat_weights(w);
  return s;
}

// Central differences of the response with every basis rebuilt at the
// perturbed weights.
Eigen::MatrixXd refreshed_fd(const NetworkState& s, const RowMatrix& x) {
  const auto w = s.flat_weights();
  Eigen::MatrixXd out(x.rows(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(w[i]));
    auto wp = w;
    auto wm = w;
    wp[i] += h;
    wm[i] -= h;
    auto a = s;
    auto b = s;
    a.set_flat_weights(wp);
    b.set_flat_weights(wm);
    out.col(i) = (predict(refresh_bases(a, x, RefreshOptions{true}), x) -
                  predict(refresh_bases(b, x, RefreshOptions{true}), x)) /
                 (2.0 * h);
  }
  return out;
}

struct Case {
  int n_inputs;
  std::vector<LayerSpec> layers;
  BasisMode mode = BasisMode::adaptive;
};

std::vector<Case> benchmark_cases() {
  const auto N = Activation::normalized;
  const auto T = Activation::tanh;
  return {
      {3, {{3, 2}, {1, 2, N}}},
      {3, {{3, 2}, {3, 2, N}, {1, 2, N}}},
      {3, {{3, 3}, {3, 3, N}, {1, 2, N}}},
      {10, {{5, 2}, {1, 3, N}}},
      {10, {{10, 2}, {1, 3, N}}},
      {3, {{6, 1}, {6, 1, T}, {1, 1, T}}, BasisMode::fixed_gaussian_monomial},
      {10, {{15, 1}, {10, 1, T}, {5, 1, T}, {1, 1, T}}, BasisMode::fixed_gaussian_monomial},
  };
}

}  // namespace

TEST_CASE("last-layer columns are the basis terms") {
  const auto x = uniform_inputs(3, 30, 1);
  auto s = refresh_bases(randomize(build_network(3, {{3, 2}, {1, 2, Activation::normalized}}, 1), 2, 0.5), x);
  const auto jac = weight_jacobian(s, x);
  const Eigen::Index first = static_cast<Eigen::Index>(s.layers[0].weights.size());
  std::vector<LayerTrace> trace;
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    trace_forward(s, std::span<const double>(x.row(t).data(), 3), trace, false);
    for (std::size_t i = 0; i < s.layers[1].term_count(); ++i) {
      CHECK(jac(t, first + static_cast<Eigen::Index>(i)) == trace[1].psi[i]);
    }
  }
}

TEST_CASE("linear single-layer columns do not depend on the weights") {
  const auto x = uniform_inputs(3, 25, 4);
  auto a = refresh_bases(build_network(3, {{1, 1}}, 1), x);
  auto b = refresh_bases(randomize(a, 9, 3.0), x);
  const auto ja = weight_jacobian(a, x);
  const auto jb = weight_jacobian(b, x);
  CHECK((ja - jb).cwiseAbs().maxCoeff() == 0.0);
  for (Eigen::Index t = 0; t < x.rows(); ++t) CHECK(ja(t, 1) == eval_basis(a.layers[0].bases[0], 1, x(t, 0)));
}

TEST_CASE("zero weights leave only last-layer columns") {
  const auto x = uniform_inputs(2, 10, 5);
  auto s = refresh_bases(randomize(build_network(2, {{2, 2}, {1, 2, Activation::tanh}}, 1), 3, 0.7), x);
  s.set_flat_weights(std::vector<double>(s.weight_count(), 0.0));
  Eigen::VectorXd r;
  const auto jac = weight_jacobian(s, x, &r);
  const Eigen::Index first = static_cast<Eigen::Index>(s.layers[0].weights.size());
  CHECK(jac.leftCols(first).cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("analytic jacobian matches finite differences on the benchmark architectures") {
  std::uint64_t seed = 10;
  for (const auto& c : benchmark_cases()) {
    CAPTURE(c.layers.size());
    CAPTURE(c.n_inputs);
    const auto train = uniform_inputs(c.n_inputs, 200, ++seed, -3.0, 3.0);
    const auto x = uniform_inputs(c.n_inputs, 20, ++seed, -3.0, 3.0);
    auto s = build_network(c.n_inputs, c.layers, ++seed, c.mode);
    s = refresh_bases(randomize(s, ++seed, 0.3), train, RefreshOptions{true});
    const auto jac = weight_jacobian(s, x);
    const auto fd = finite_difference_jacobian(s, x);
    CHECK(max_relative_error(jac, fd) < 1e-5);
  }
}

TEST_CASE("property: jacobian matches finite differences on random networks") {
  Rng rng(123);
  const Activation acts[] = {Activation::identity, Activation::sigmoid, Activation::tanh, Activation::normalized,
                             Activation::relu};
  for (int trial = 0; trial < 30; ++trial) {
    CAPTURE(trial);
    const int n = 1 + static_cast<int>(rng.uniform() * 3);
    const int depth = 1 + static_cast<int>(rng.uniform() * 3);
    std::vector<LayerSpec> specs;
    for (int l = 0; l < depth; ++l) {
      specs.push_back({l + 1 == depth ? 1 : 1 + static_cast<int>(rng.uniform() * 3),
                       1 + static_cast<int>(rng.uniform() * 3), acts[static_cast<int>(rng.uniform() * 5)]});
    }
    const auto train = uniform_inputs(n, 100, 1000 + trial, -2.0, 2.0);
    const auto x = uniform_inputs(n, 10, 2000 + trial, -2.0, 2.0);
    auto s = refresh_bases(randomize(build_network(n, specs, trial), 3000 + trial, 0.5), train, RefreshOptions{true});
    const auto jac = weight_jacobian(s, x);
    CHECK(jac.allFinite());
    bool has_relu = false;
    for (const auto& l : specs) has_relu |= l.activation == Activation::relu;
    // Central differences straddle relu kinks only with negligible probability.
    if (!has_relu) CHECK(max_relative_error(jac, finite_difference_jacobian(s, x)) < 1e-5);
  }
}

TEST_CASE("relu at the kink gives finite zero derivative") {
  auto s = build_network(1, {{1, 1}, {1, 1, Activation::relu}}, 1);
  s.layers[0].weights = {0.0, 1.0};
  RowMatrix x(4, 1);
  x << -1.0, 0.0, 1.0, 2.0;
  s = refresh_bases(s, x);
  const auto jac = weight_jacobian(s, x);
  CHECK(jac.allFinite());
  CHECK(jac(1, 1) == 0.0);
}

TEST_CASE("jacobian errors") {
  const auto s = build_network(2, {{1, 1}}, 1);
  try {
    weight_jacobian(s, uniform_inputs(2, 3, 1));
    FAIL("expected bases-not-refreshed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::bases_not_refreshed);
  }
  const auto r = refresh_bases(s, uniform_inputs(2, 10, 1));
  CHECK_THROWS_AS(weight_jacobian(r, uniform_inputs(3, 3, 1)), Error);
}

TEST_CASE("basis-aware jacobian matches finite differences through the refresh") {
  std::uint64_t seed = 50;
  const auto N = Activation::normalized;
  const std::vector<Case> cases{
      {3, {{3, 2}, {1, 2, N}}},
      {3, {{3, 2}, {3, 2, N}, {1, 2, N}}},
      {2, {{2, 2}, {2, 2, Activation::tanh}, {1, 2, Activation::sigmoid}}},
      {2, {{3, 1}, {1, 3, Activation::identity}}},
  };
  for (const auto& c : cases) {
    CAPTURE(c.layers.size());
    const auto x = uniform_inputs(c.n_inputs, 60, ++seed, -3.0, 3.0);
    auto s = refresh_bases(randomize(build_network(c.n_inputs, c.layers, ++seed), ++seed, 0.4), x);
    const auto jac = basis_aware_jacobian(s, x);
    const auto fd = refreshed_fd(s, x);
    CHECK(max_relative_error(jac, fd) < 1e-5);
    // The frozen-basis jacobian is a different quantity for adaptive hidden layers.
    CHECK(max_relative_error(weight_jacobian(s, x), fd) > 1e-3);
  }
}

TEST_CASE("basis-aware jacobian reduces to the plain one without hidden adaptive bases") {
  const auto x = uniform_inputs(3, 40, 7);
  const auto single = refresh_bases(randomize(build_network(3, {{1, 3}}, 1), 2, 0.5), x);
  CHECK((basis_aware_jacobian(single, x) - weight_jacobian(single, x)).cwiseAbs().maxCoeff() == 0.0);
  const auto fixed = randomize(
      build_network(3, {{4, 1}, {1, 1, Activation::tanh}}, 1, BasisMode::fixed_gaussian_monomial), 3, 0.5);
  CHECK((basis_aware_jacobian(fixed, x) - weight_jacobian(fixed, x)).cwiseAbs().maxCoeff() == 0.0);
}
