#include "dapc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>

#include "dapc/gradients.hpp"

namespace dapc {
namespace {

Eigen::VectorXd regularization_mask(const NetworkState& state, bool on_bias) {
  Eigen::VectorXd mask = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(state.weight_count()));
  if (on_bias) return mask;
  Eigen::Index offset = 0;
  for (const auto& layer : state.layers) {
    const auto m = static_cast<Eigen::Index>(layer.term_count());
    for (int node = 0; node < layer.spec.n_nodes; ++node) mask[offset + node * m] = 0.0;
    offset += m * layer.spec.n_nodes;
  }
  return mask;
}

LossBreakdown loss_terms(const Eigen::VectorXd& pred, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                         const Eigen::VectorXd& mask, double msw_multiplier) {
  LossBreakdown out;
  out.mse = (pred - y).squaredNorm() / static_cast<double>(y.size());
  out.msw = msw_multiplier * mask.cwiseProduct(w.cwiseProduct(w)).sum() / static_cast<double>(w.size());
  out.total = out.mse + out.msw;
  return out;
}

Eigen::VectorXd as_vector(const std::vector<double>& w) {
  return Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
}

bool affine_consumer(const NetworkState& state, std::size_t layer) {
  if (state.basis_mode != BasisMode::adaptive || layer + 1 >= state.layers.size()) return false;
  const Activation next = state.layers[layer + 1].spec.activation;
  return next == Activation::identity || next == Activation::normalized;
}

// Moves every invariant hidden node to zero bias and unit non-bias norm.
// The response is unchanged; only the weight penalty moves.
void canonicalize_hidden(NetworkState& state) {
  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    if (!affine_consumer(state, l)) continue;
    Layer& layer = state.layers[l];
    for (int node = 0; node < layer.spec.n_nodes; ++node) {
      auto w = layer.node_weights(node);
      double norm = 0.0;
      for (std::size_t i = 1; i < w.size(); ++i) norm += w[i] * w[i];
      norm = std::sqrt(norm);
      if (!(norm > 0.0)) continue;
      w[0] = 0.0;
      for (std::size_t i = 1; i < w.size(); ++i) w[i] /= norm;
    }
  }
}

// Orthonormal columns spanning, for every hidden node whose outgoing signal
// is consumed through an affine activation by an adaptive layer, the node's
// bias direction and its non-bias weight direction.
Eigen::MatrixXd invariant_directions(const NetworkState& state) {
  std::vector<Eigen::VectorXd> dirs;
  if (state.basis_mode == BasisMode::adaptive) {
    const auto n_w = static_cast<Eigen::Index>(state.weight_count());
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l + 1 < state.layers.size(); ++l) {
      const Layer& layer = state.layers[l];
      const auto m = static_cast<Eigen::Index>(layer.term_count());
      const bool affine = affine_consumer(state, l);
      for (int node = 0; affine && node < layer.spec.n_nodes; ++node) {
        const Eigen::Index base = offset + node * m;
        Eigen::VectorXd bias = Eigen::VectorXd::Zero(n_w);
        bias[base] = 1.0;
        dirs.push_back(std::move(bias));
        Eigen::VectorXd scale = Eigen::VectorXd::Zero(n_w);
        const auto w = layer.node_weights(node);
        for (Eigen::Index i = 1; i < m; ++i) scale[base + i] = w[i];
        const double norm = scale.norm();
        if (norm > 0.0) dirs.push_back(scale / norm);
      }
      offset += m * layer.spec.n_nodes;
    }
  }
  Eigen::MatrixXd u(static_cast<Eigen::Index>(state.weight_count()), static_cast<Eigen::Index>(dirs.size()));
  for (std::size_t k = 0; k < dirs.size(); ++k) u.col(static_cast<Eigen::Index>(k)) = dirs[k];
  return u;
}

bool has_two_distinct_rows(const RowMatrix& x) {
  for (Eigen::Index r = 1; r < x.rows(); ++r) {
    if (x.row(r) != x.row(0)) return true;
  }
  return false;
}

}  // namespace

void TrainingConfig::validate() const {
  if (max_iterations < 1) throw Error(ErrorCode::invalid_argument, "max_iterations must be >= 1");
  if (!(damping_init > 0.0) || !(grad_tol > 0.0) || !(loss_tol > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "damping and tolerances must be positive");
  }
  if (!(damping_up > 1.0) || !(damping_down > 0.0 && damping_down < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "need damping_up > 1 > damping_down > 0");
  }
  if (max_damping_escalations < 0) throw Error(ErrorCode::invalid_argument, "max_damping_escalations must be >= 0");
  if (!(msw_multiplier >= 0.0)) throw Error(ErrorCode::invalid_argument, "msw_multiplier must be >= 0");
  if (init_candidates < 1 || probe_iterations < 1) {
    throw Error(ErrorCode::invalid_argument, "init_candidates and probe_iterations must be >= 1");
  }
}

LossBreakdown loss(const NetworkState& state, const Dataset& data, const TrainingConfig& cfg) {
  if (data.size() == 0) throw Error(ErrorCode::empty_dataset, "loss over an empty dataset");
  validate_dataset(data);
  const Eigen::VectorXd pred = predict(state, data.inputs);
  return loss_terms(pred, data.response(0), as_vector(state.flat_weights()),
                    regularization_mask(state, cfg.regularization_on_bias), cfg.msw_multiplier);
}

TrainingResult train_lm(const NetworkState& initial, const Dataset& data, const TrainingConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) throw Error(ErrorCode::empty_dataset, "training on an empty dataset");
  validate_dataset(data);
  if (!has_two_distinct_rows(data.inputs)) {
    throw Error(ErrorCode::invalid_argument, "training needs at least two distinct input points");
  }

  const RowMatrix& x = data.inputs;
  const Eigen::VectorXd y = data.response(0);
  const double n_points = static_cast<double>(y.size());

  TrainingHistory history;
  std::set<std::string> seen_warnings;
  const RefreshOptions refresh_options{true};
  auto refresh = [&](const NetworkState& s) {
    std::vector<std::string> w;
    NetworkState out = refresh_bases(s, x, refresh_options, &w);
    for (auto& msg : w) {
      if (seen_warnings.insert(msg).second) history.warnings.push_back(std::move(msg));
    }
    return out;
  };

  NetworkState current = initial;
  if (cfg.project_invariant_directions) canonicalize_hidden(current);
  current = refresh(current);
  const Eigen::VectorXd mask = regularization_mask(current, cfg.regularization_on_bias);
  const double reg = cfg.msw_multiplier / static_cast<double>(current.weight_count());

  Eigen::VectorXd w = as_vector(current.flat_weights());
  auto jacobian = [&](const NetworkState& s, Eigen::VectorXd& responses) {
    return cfg.basis_aware_gradient ? basis_aware_jacobian(s, x, &responses, refresh_options)
                                    : weight_jacobian(s, x, &responses);
  };
  Eigen::VectorXd pred;
  Eigen::MatrixXd jac = jacobian(current, pred);
  LossBreakdown current_loss = loss_terms(pred, y, w, mask, cfg.msw_multiplier);

  double damping = cfg.damping_init;
  history.records.push_back({0, current_loss.total, current_loss.mse, current_loss.msw, damping, true});

  TrainingResult best{current, {}, current_loss};
  std::deque<double> recent{current_loss.total};

  auto finish = [&](std::string reason) {
    history.stop_reason = std::move(reason);
    best.history = std::move(history);
    return best;
  };

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const Eigen::VectorXd residual = pred - y;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(jac.cols(), jac.cols());
    a.selfadjointView<Eigen::Lower>().rankUpdate(jac.adjoint(), 1.0 / n_points);
    a.diagonal() += reg * mask;
    a.triangularView<Eigen::StrictlyUpper>() = a.transpose();
    const Eigen::VectorXd b = jac.transpose() * residual / n_points + reg * mask.cwiseProduct(w);

    Eigen::VectorXd scale = a.diagonal();
    const double floor = 1e-12 * std::max(1.0, scale.maxCoeff());
    scale = scale.cwiseMax(floor);
    Eigen::MatrixXd u;
    if (cfg.project_invariant_directions) u = invariant_directions(current);
    const bool project = u.cols() > 0;
    const Eigen::VectorXd rhs = project ? Eigen::VectorXd(b - u * (u.transpose() * b)) : b;
    if (2.0 * rhs.lpNorm<Eigen::Infinity>() < cfg.grad_tol) return finish("grad-tol");

    bool accepted = false;
    bool any_solved = false;
    for (int esc = 0; esc <= cfg.max_damping_escalations && !accepted; ++esc) {
      Eigen::MatrixXd damped = a;
      damped.diagonal() += damping * scale;
      if (project) {
        // P (A + lambda D) P + (I - P) with P = I - U U^T keeps the step in range(P).
        const Eigen::MatrixXd au = damped * u;
        const Eigen::MatrixXd uau = u.transpose() * au;
        damped -= au * u.transpose() + u * au.transpose();
        damped += u * (uau + Eigen::MatrixXd::Identity(u.cols(), u.cols())) * u.transpose();
      }
      Eigen::LLT<Eigen::MatrixXd> llt(damped);
      if (llt.info() != Eigen::Success) {
        damping *= cfg.damping_up;
        continue;
      }
      const Eigen::VectorXd step = -llt.solve(rhs);
      if (!step.allFinite()) {
        damping *= cfg.damping_up;
        continue;
      }
      any_solved = true;
      const Eigen::VectorXd w_trial = w + step;

      NetworkState trial = current;
      trial.set_flat_weights(std::span<const double>(w_trial.data(), static_cast<std::size_t>(w_trial.size())));
      if (cfg.project_invariant_directions) canonicalize_hidden(trial);
      const Eigen::VectorXd w_candidate = as_vector(trial.flat_weights());
      LossBreakdown trial_loss{std::numeric_limits<double>::infinity(), 0.0, 0.0};
      try {
        if (cfg.refresh_trial_bases) trial = refresh(trial);
        trial_loss = loss_terms(predict(trial, x), y, w_candidate, mask, cfg.msw_multiplier);
      } catch (const Error&) {
        // Unusable trial (e.g. degenerate moments); treated as a rejection.
      }

      if (std::isfinite(trial_loss.total) && trial_loss.total < current_loss.total) {
        accepted = true;
        damping = std::max(damping * cfg.damping_down, 1e-15);
        if (!cfg.refresh_trial_bases) {
          try {
            trial = refresh(trial);
          } catch (const Error&) {
            accepted = false;
          }
        }
        if (accepted) {
          current = std::move(trial);
          w = w_candidate;
          jac = jacobian(current, pred);
          current_loss = loss_terms(pred, y, w, mask, cfg.msw_multiplier);
          history.records.push_back({it, current_loss.total, current_loss.mse, current_loss.msw, damping, true});
        }
      }
      if (!accepted) {
        history.records.push_back({it, trial_loss.total, trial_loss.mse, trial_loss.msw, damping, false});
        damping *= cfg.damping_up;
      }
    }

    if (!accepted) {
      if (!any_solved) {
        history.stop_reason = "lm-stall";
        best.history = history;
        throw LmStall(best, "damped normal equations could not be solved");
      }
      return finish("damping-exhausted");
    }

    if (current_loss.total < best.loss.total) {
      best.state = current;
      best.loss = current_loss;
    }

    recent.push_back(current_loss.total);
    if (recent.size() > 6) recent.pop_front();
    if (recent.size() == 6) {
      const double before = recent.front();
      const double rel = (before - recent.back()) / std::max(std::abs(before), std::numeric_limits<double>::min());
      if (rel < cfg.loss_tol) return finish("loss-tol");
    }
  }
  return finish("max-iterations");
}

Eigen::VectorXd fit_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& responses, double ridge) {
  if (design.rows() != responses.size()) {
    throw Error(ErrorCode::dimension_mismatch, "design has " + std::to_string(design.rows()) + " rows, responses " +
                                                   std::to_string(responses.size()));
  }
  if (!(ridge >= 0.0)) throw Error(ErrorCode::invalid_argument, "ridge must be >= 0");
  if (design.size() == 0) return Eigen::VectorXd::Zero(design.cols());

  Eigen::BDCSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double cutoff = 1e-12 * (sigma.size() > 0 ? sigma[0] : 0.0);
  Eigen::VectorXd coeff = svd.matrixU().transpose() * responses;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    coeff[i] = (sigma[i] > cutoff && sigma[i] > 0.0) ? coeff[i] * sigma[i] / (sigma[i] * sigma[i] + ridge) : 0.0;
  }
  return svd.matrixV() * coeff;
}

double default_ridge(std::size_t n_points, std::size_t n_weights) {
  if (n_weights == 0) throw Error(ErrorCode::invalid_argument, "no weights");
  return static_cast<double>(n_points) / static_cast<double>(n_weights);
}

std::size_t select_start(const std::vector<NetworkState>& starts, const Dataset& data, const TrainingConfig& cfg,
                         int probe_iterations) {
  if (starts.empty()) throw Error(ErrorCode::invalid_argument, "no starting states");
  if (probe_iterations < 1) throw Error(ErrorCode::invalid_argument, "probe_iterations must be >= 1");
  if (starts.size() == 1) return 0;
  TrainingConfig probe = cfg;
  probe.max_iterations = probe_iterations;
  std::size_t best = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < starts.size(); ++i) {
    double l = 0.0;
    try {
      l = train_lm(starts[i], data, probe).loss.total;
    } catch (const LmStall& e) {
      l = e.best().loss.total;
    }
    if (l < best_loss) {
      best_loss = l;
      best = i;
    }
  }
  return best;
}

Eigen::MatrixXd design_matrix(const NetworkState& state, const RowMatrix& inputs) {
  if (state.layers.empty()) throw Error(ErrorCode::invalid_argument, "empty network");
  if (!state.has_bases()) throw Error(ErrorCode::bases_not_refreshed, "design matrix needs refreshed bases");
  if (inputs.cols() != state.n_inputs) {
    throw Error(ErrorCode::dimension_mismatch, "expected " + std::to_string(state.n_inputs) + " input columns");
  }
  const Layer& layer = state.layers.front();
  Eigen::MatrixXd design(inputs.rows(), static_cast<Eigen::Index>(layer.term_count()));
  for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
    const auto psi = eval_multivariate(layer.bases, layer.terms,
                                       std::span<const double>(inputs.row(t).data(), inputs.cols()));
    for (std::size_t i = 0; i < psi.size(); ++i) design(t, static_cast<Eigen::Index>(i)) = psi[i];
  }
  return design;
}

NetworkState fit_single_layer(const NetworkState& state, const Dataset& data, double ridge) {
  if (state.layers.size() != 1) throw Error(ErrorCode::invalid_argument, "least-squares fit needs one layer");
  if (data.size() == 0) throw Error(ErrorCode::empty_dataset, "fit on an empty dataset");
  validate_dataset(data);
  NetworkState out = refresh_bases(state, data.inputs);
  const Eigen::MatrixXd design = design_matrix(out, data.inputs);
  if (ridge < 0.0) ridge = default_ridge(data.size(), out.weight_count());
  const Eigen::VectorXd w = fit_least_squares(design, data.response(0), ridge);
  out.set_flat_weights(std::span<const double>(w.data(), static_cast<std::size_t>(w.size())));
  return out;
}

}  // namespace dapc
