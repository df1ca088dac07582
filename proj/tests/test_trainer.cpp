#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"

#include "dapc/benchmarks.hpp"
#include "dapc/error.hpp"
#include "dapc/network.hpp"
#include "dapc/random.hpp"
#include "dapc/trainer.hpp"

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

Dataset make_data(const RowMatrix& x, const std::function<double(const Eigen::RowVectorXd&)>& f) {
  Dataset d;
  d.inputs = x;
  d.responses.resize(x.rows(), 1);
  for (Eigen::Index t = 0; t < x.rows(); ++t) d.responses(t, 0) = f(x.row(t));
  return d;
}

void check_monotone(const TrainingHistory& h) {
  double last = std::numeric_limits<double>::infinity();
  for (const auto& r : h.records) {
    if (!r.accepted) continue;
    CHECK(r.loss <= last);
    last = r.loss;
  }
}

}  // namespace

TEST_CASE("loss examples") {
  const auto x = uniform_inputs(2, 20, 1);
  auto s = refresh_bases(build_network(2, {{2, 2}, {1, 2, Activation::normalized}}, 3), x);
  auto zero = s;
  zero.set_flat_weights(std::vector<double>(s.weight_count(), 0.0));

  const auto l0 = loss(zero, make_data(x, [](const auto&) { return 0.0; }));
  CHECK(l0.total == 0.0);
  const auto lc = loss(zero, make_data(x, [](const auto&) { return 1.5; }));
  CHECK(lc.mse == doctest::Approx(2.25).epsilon(1e-15));
  CHECK(lc.msw == 0.0);

  // Responses generated by the network itself: only the weight term remains.
  const Eigen::VectorXd p = predict(s, x);
  Dataset self{x, RowMatrix(p)};
  const auto ls = loss(s, self);
  double sum2 = 0.0;
  for (double w : s.flat_weights()) sum2 += w * w;
  CHECK(ls.mse < 1e-28);
  CHECK(ls.total == doctest::Approx(sum2 / s.weight_count()).epsilon(1e-12));

  TrainingConfig no_bias;
  no_bias.regularization_on_bias = false;
  double bias2 = 0.0;
  for (const auto& layer : s.layers) {
    for (int node = 0; node < layer.spec.n_nodes; ++node) bias2 += std::pow(layer.node_weights(node)[0], 2);
  }
  CHECK(loss(s, self, no_bias).msw == doctest::Approx((sum2 - bias2) / s.weight_count()).epsilon(1e-12));

  try {
    loss(s, Dataset{RowMatrix(0, 2), RowMatrix(0, 1)});
    FAIL("expected empty-dataset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_dataset);
  }
}

TEST_CASE("config validation") {
  TrainingConfig c;
  CHECK_NOTHROW(c.validate());
  c.damping_up = 0.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.grad_tol = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.max_iterations = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.msw_multiplier = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("least squares solver") {
  Rng rng(4);
  Eigen::MatrixXd sq(5, 5);
  for (Eigen::Index i = 0; i < sq.size(); ++i) sq.data()[i] = rng.normal();
  Eigen::VectorXd y(5);
  for (auto& v : y) v = rng.normal();
  CHECK((sq * fit_least_squares(sq, y, 0.0) - y).cwiseAbs().maxCoeff() < 1e-10);

  // f = 2 + 3 phi_1 on an orthonormal design.
  const auto x = uniform_inputs(1, 200, 6);
  const auto s = refresh_bases(build_network(1, {{1, 4}}, 1), x);
  const auto design = design_matrix(s, x);
  const Eigen::VectorXd f = 2.0 * design.col(0) + 3.0 * design.col(1);
  const auto w = fit_least_squares(design, f, 0.0);
  CHECK(std::abs(w[0] - 2.0) < 1e-8);
  CHECK(std::abs(w[1] - 3.0) < 1e-8);
  CHECK(w.tail(3).cwiseAbs().maxCoeff() < 1e-8);

  // Rank-deficient: duplicated column.
  Eigen::MatrixXd rd(6, 3);
  for (Eigen::Index i = 0; i < 6; ++i) {
    rd(i, 0) = 1.0;
    rd(i, 1) = i;
    rd(i, 2) = i;
  }
  Eigen::VectorXd yr(6);
  yr << 1, 3, 2, 5, 4, 6;
  const auto wr = fit_least_squares(rd, yr, 0.0);
  CHECK(std::abs(wr[1] - wr[2]) < 1e-10);
  Eigen::VectorXd null(3);
  null << 0.0, 1.0, -1.0;
  for (double t : {-1.0, -1e-3, 1e-3, 0.5}) {
    CHECK((rd * (wr + t * null) - rd * wr).norm() < 1e-10);
    CHECK((wr + t * null).norm() > wr.norm());
  }

  CHECK(default_ridge(100, 40) == 2.5);
  CHECK_THROWS_AS(fit_least_squares(sq, Eigen::VectorXd(4), 0.0), Error);
}

TEST_CASE("LM reaches the least-squares optimum of a representable quadratic") {
  const auto x = uniform_inputs(1, 50, 8);
  const auto data = make_data(x, [](const auto& r) { return r[0] * r[0]; });
  const auto s = build_network(1, {{1, 2}}, 5);

  TrainingConfig exact;
  exact.msw_multiplier = 0.0;
  const auto r0 = train_lm(s, data, exact);
  CHECK(r0.loss.mse < 1e-10);
  check_monotone(r0.history);

  // With the weight penalty the optimum is the ridge solution at T / N_w.
  const auto r1 = train_lm(s, data);
  const auto ls = fit_single_layer(s, data);
  const auto l_ls = loss(ls, data);
  CHECK(std::abs(r1.loss.total - l_ls.total) < 1e-6);
  const auto wl = r1.state.flat_weights();
  const auto wr = ls.flat_weights();
  for (std::size_t i = 0; i < wl.size(); ++i) CHECK(wl[i] == doctest::Approx(wr[i]).epsilon(1e-6));
}

TEST_CASE("zero target drives the weights to zero") {
  const auto x = uniform_inputs(2, 40, 9);
  const auto data = make_data(x, [](const auto&) { return 0.0; });
  const auto r = train_lm(build_network(2, {{2, 2}, {1, 2, Activation::tanh}}, 2), data);
  for (double w : r.state.flat_weights()) CHECK(std::abs(w) < 1e-6);
}

TEST_CASE("training errors") {
  const auto s = build_network(2, {{1, 1}}, 1);
  try {
    train_lm(s, Dataset{RowMatrix(0, 2), RowMatrix(0, 1)});
    FAIL("expected empty-dataset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_dataset);
  }
  RowMatrix same(3, 2);
  same.setConstant(0.5);
  CHECK_THROWS_AS(train_lm(s, Dataset{same, RowMatrix::Ones(3, 1)}), Error);
  CHECK_THROWS_AS(fit_single_layer(build_network(2, {{2, 1}, {1, 1}}, 1), Dataset{same, RowMatrix::Ones(3, 1)}),
                  Error);
}

TEST_CASE("property: accepted losses never increase and runs are deterministic") {
  Rng rng(71);
  const Activation acts[] = {Activation::identity, Activation::tanh, Activation::normalized, Activation::sigmoid};
  for (int trial = 0; trial < 12; ++trial) {
    CAPTURE(trial);
    const int n = 1 + static_cast<int>(rng.uniform() * 3);
    std::vector<LayerSpec> specs{{1 + static_cast<int>(rng.uniform() * 3), 1 + static_cast<int>(rng.uniform() * 2)},
                                 {1, 1 + static_cast<int>(rng.uniform() * 2), acts[static_cast<int>(rng.uniform() * 4)]}};
    const auto x = uniform_inputs(n, 40, 300 + trial, -2.0, 2.0);
    const double a = rng.normal();
    const auto data = make_data(x, [a](const auto& r) { return std::sin(a * r[0]) + r.squaredNorm(); });
    TrainingConfig cfg;
    cfg.max_iterations = 40;
    cfg.project_invariant_directions = trial % 2 == 0;
    cfg.basis_aware_gradient = trial % 3 != 0;
    const auto s = build_network(n, specs, trial);
    const auto r1 = train_lm(s, data, cfg);
    const auto r2 = train_lm(s, data, cfg);
    check_monotone(r1.history);
    CHECK(r1.state.flat_weights() == r2.state.flat_weights());
    REQUIRE(r1.history.records.size() == r2.history.records.size());
    for (std::size_t i = 0; i < r1.history.records.size(); ++i) {
      CHECK(r1.history.records[i].loss == r2.history.records[i].loss);
      CHECK(r1.history.records[i].damping == r2.history.records[i].damping);
    }
    CHECK(r1.loss.total <= r1.history.records.front().loss);
    const auto& reason = r1.history.stop_reason;
    CHECK((reason == "max-iterations" || reason == "grad-tol" || reason == "loss-tol" ||
           reason == "damping-exhausted"));
  }
}

TEST_CASE("single-layer LM agrees with the least-squares fit") {
  const auto x = uniform_inputs(3, 120, 12, -std::numbers::pi, std::numbers::pi);
  const auto data = make_data(x, [](const auto& r) { return ishigami(std::vector<double>{r[0], r[1], r[2]}); });
  const auto s = build_network(3, {{1, 3}}, 4);
  const auto lm = train_lm(s, data);
  const auto ls = loss(fit_single_layer(s, data), data);
  CHECK(std::abs(lm.loss.total - ls.total) < 1e-6);
}

TEST_CASE("returned state reproduces the reported loss") {
  const auto x = uniform_inputs(3, 60, 13, -std::numbers::pi, std::numbers::pi);
  const auto data = make_data(x, [](const auto& r) { return ishigami(std::vector<double>{r[0], r[1], r[2]}); });
  TrainingConfig cfg;
  cfg.max_iterations = 30;
  const auto r = train_lm(build_network(3, {{3, 2}, {1, 2, Activation::normalized}}, 2), data, cfg);
  CHECK(loss(r.state, data, cfg).total == doctest::Approx(r.loss.total).epsilon(1e-12));
}

TEST_CASE("deep network beats the equal-data aPC at 100 Ishigami points for most seeds") {
  const auto problem = ishigami_problem();
  Dataset train;
  train.inputs = training_inputs(problem, Strategy::sobol, 100, 0);
  train.responses = problem.evaluate(train.inputs);
  const auto v = monte_carlo_points(3, 1000, 5, problem.marginals);
  const Eigen::VectorXd vy = problem.evaluate(v);

  const Architecture apc{Method::apc, {{1, 4}}};
  const double apc_mse = compute_metrics(train_model(apc, train, v, {}, 1).validation_predictions, vy).mse;
  const Architecture deep{Method::dapcnn, {{3, 2}, {3, 2, Activation::normalized}, {1, 2, Activation::normalized}}};
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const double mse = compute_metrics(train_model(deep, train, v, {}, seed).validation_predictions, vy).mse;
    MESSAGE("seed " << seed << ": deep " << mse << " vs aPC " << apc_mse);
    wins += mse < apc_mse;
  }
  CHECK(wins >= 3);
}

TEST_CASE("start selection follows the probe loss") {
  const auto x = uniform_inputs(2, 60, 14);
  const auto data = make_data(x, [](const auto& r) { return std::sin(3.0 * r[0]) * r[1]; });
  const std::vector<LayerSpec> specs{{2, 2}, {1, 2, Activation::tanh}};
  std::vector<NetworkState> starts;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) starts.push_back(build_network(2, specs, seed));
  TrainingConfig cfg;
  const auto pick = select_start(starts, data, cfg, 5);
  REQUIRE(pick < starts.size());
  cfg.max_iterations = 5;
  const double chosen = train_lm(starts[pick], data, cfg).loss.total;
  for (const auto& s : starts) CHECK(chosen <= train_lm(s, data, cfg).loss.total);

  CHECK(select_start({starts[2]}, data, cfg, 5) == 0);
  // Identical starts tie; the first wins.
  CHECK(select_start({starts[1], starts[1]}, data, cfg, 5) == 0);
  CHECK_THROWS_AS(select_start({}, data, cfg, 5), Error);
  CHECK_THROWS_AS(select_start(starts, data, cfg, 0), Error);
  TrainingConfig bad;
  bad.init_candidates = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}
