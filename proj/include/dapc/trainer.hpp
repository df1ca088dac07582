#pragma once

// Levenberg-Marquardt training of the mean-square-error plus
// mean-square-weights loss, and the regularized least-squares solver used
// for single-layer (plain aPC) fits.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dapc/error.hpp"
#include "dapc/network.hpp"

namespace dapc {

struct TrainingConfig {
  int max_iterations = 500;
  double damping_init = 1e-3;
  double damping_up = 10.0;
  double damping_down = 0.1;
  /// On the infinity norm of the loss gradient.
  double grad_tol = 1e-10;
  /// Relative loss decrease over the last 5 accepted iterations.
  double loss_tol = 1e-12;
  int max_damping_escalations = 20;
  bool regularization_on_bias = true;
  /// Multiplies the mean-square-weights term; 1 is the plain sum of both terms.
  double msw_multiplier = 1.0;
  /// Evaluate trial steps with bases rebuilt at the trial weights. When
  /// false, trials reuse the incumbent bases and the refresh happens after
  /// acceptance.
  bool refresh_trial_bases = true;
  /// Keep steps orthogonal to the scale and bias of hidden nodes whose
  /// consumer layer rebuilds its basis after an affine activation. The
  /// network response is invariant along those directions, so only the
  /// weight penalty would act there.
  bool project_invariant_directions = true;
  /// Differentiate through the basis rebuild (basis_aware_jacobian) instead
  /// of holding the bases fixed.
  bool basis_aware_gradient = true;
  /// Initializations tried by train_model. Each is trained for
  /// probe_iterations and the full run starts from the lowest probe loss.
  int init_candidates = 1;
  int probe_iterations = 30;
  std::uint64_t seed = 0;

  /// Throws invalid-argument on non-positive tolerances or bad factors.
  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  double mse = 0.0;
  double msw = 0.0;
};

struct IterationRecord {
  int iteration = 0;
  double loss = 0.0;
  double mse = 0.0;
  double msw = 0.0;
  double damping = 0.0;
  bool accepted = false;
};

struct TrainingHistory {
  std::vector<IterationRecord> records;
  /// One of: max-iterations, grad-tol, loss-tol, damping-exhausted.
  std::string stop_reason;
  std::vector<std::string> warnings;
};

struct TrainingResult {
  NetworkState state;
  TrainingHistory history;
  LossBreakdown loss;
};

/// Index of the start whose loss is lowest after `probe_iterations` LM
/// iterations; ties go to the earlier start.
std::size_t select_start(const std::vector<NetworkState>& starts, const Dataset& data, const TrainingConfig& cfg,
                         int probe_iterations);

/// Raised when no damped normal system could be solved; carries the best state.
class LmStall : public Error {
 public:
  LmStall(TrainingResult best, const std::string& detail)
      : Error(ErrorCode::lm_stall, detail), best_(std::move(best)) {}
  const TrainingResult& best() const noexcept { return best_; }

 private:
  TrainingResult best_;
};

LossBreakdown loss(const NetworkState& state, const Dataset& data, const TrainingConfig& cfg = {});

/// Trains on response column 0 of `data`. The state is refreshed first.
TrainingResult train_lm(const NetworkState& state, const Dataset& data, const TrainingConfig& cfg = {});

/// Minimum-norm solution of (D^T D + ridge I) w = D^T y through the thin SVD
/// of D; singular values below 1e-12 sigma_max are dropped.
Eigen::VectorXd fit_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& responses, double ridge);

/// T / N_w, the ridge equivalent of the unit-weighted loss.
double default_ridge(std::size_t n_points, std::size_t n_weights);

/// Rows Psi(omega_t) of the first layer.
Eigen::MatrixXd design_matrix(const NetworkState& state, const RowMatrix& inputs);

/// Refreshes a single-layer network on `data` and sets its weights by
/// fit_least_squares. A negative ridge selects default_ridge.
NetworkState fit_single_layer(const NetworkState& state, const Dataset& data, double ridge = -1.0);

}  // namespace dapc
