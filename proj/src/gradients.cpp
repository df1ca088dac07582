#include "dapc/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dapc/error.hpp"

namespace dapc {

namespace {

std::vector<Eigen::Index> layer_offsets(const NetworkState& state) {
  std::vector<Eigen::Index> offset(state.layers.size() + 1, 0);
  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    offset[l + 1] = offset[l] + static_cast<Eigen::Index>(state.layers[l].weights.size());
  }
  return offset;
}

void check_inputs(const NetworkState& state, const RowMatrix& inputs) {
  if (!state.has_bases()) throw Error(ErrorCode::bases_not_refreshed, "jacobian needs refreshed bases");
  if (inputs.cols() != state.n_inputs) {
    throw Error(ErrorCode::dimension_mismatch, "expected " + std::to_string(state.n_inputs) + " input columns, got " +
                                                   std::to_string(inputs.cols()));
  }
  if (!inputs.allFinite()) throw Error(ErrorCode::non_finite_input, "non-finite jacobian input");
}

// Adds d(sum_N seed_N r_N)/dw to row, r being the responses of `start`.
// Only columns of layers <= start are touched.
void backprop(const NetworkState& state, const std::vector<LayerTrace>& trace, std::size_t start,
              std::vector<double> g, const std::vector<Eigen::Index>& offset, double* row) {
  std::vector<double> g_prev, v, dz;
  for (std::size_t l = start + 1; l-- > 0;) {
    const Layer& layer = state.layers[l];
    const LayerTrace& tr = trace[l];
    const std::size_t m = layer.term_count();
    for (int node = 0; node < layer.spec.n_nodes; ++node) {
      if (g[node] == 0.0) continue;
      double* dst = row + offset[l] + static_cast<Eigen::Index>(node * m);
      for (std::size_t i = 0; i < m; ++i) dst[i] += g[node] * tr.psi[i];
    }
    if (l == 0) break;

    v.assign(m, 0.0);
    for (int node = 0; node < layer.spec.n_nodes; ++node) {
      if (g[node] == 0.0) continue;
      const auto w = layer.node_weights(node);
      for (std::size_t i = 0; i < m; ++i) v[i] += g[node] * w[i];
    }

    const int width = layer.spec.degree + 1;
    dz.assign(layer.n_in, 0.0);
    for (std::size_t i = 1; i < m; ++i) {
      if (v[i] == 0.0) continue;
      const auto& support = layer.terms.support[i];
      for (std::size_t a = 0; a < support.size(); ++a) {
        double prod = tr.derivs[support[a].first * width + support[a].second];
        for (std::size_t b = 0; b < support.size(); ++b) {
          if (b != a) prod *= tr.values[support[b].first * width + support[b].second];
        }
        dz[support[a].first] += v[i] * prod;
      }
    }

    g_prev.resize(layer.n_in);
    for (int j = 0; j < layer.n_in; ++j) {
      std::optional<NormStats> stats;
      if (static_cast<std::size_t>(j) < layer.norm_stats.size()) stats = layer.norm_stats[j];
      g_prev[j] = dz[j] * activation_derivative(layer.spec.activation, tr.incoming[j], stats);
    }
    std::swap(g, g_prev);
  }
}

}  // namespace

Eigen::MatrixXd weight_jacobian(const NetworkState& state, const RowMatrix& inputs, Eigen::VectorXd* responses) {
  check_inputs(state, inputs);
  const auto offset = layer_offsets(state);
  const Eigen::Index total = offset.back();
  RowMatrix jac = RowMatrix::Zero(inputs.rows(), total);
  if (responses) responses->resize(inputs.rows());
  std::vector<LayerTrace> trace;
  for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
    trace_forward(state, std::span<const double>(inputs.row(t).data(), inputs.cols()), trace, true);
    if (responses) (*responses)[t] = trace.back().responses.front();
    backprop(state, trace, state.layers.size() - 1, {1.0}, offset, jac.row(t).data());
  }
  return jac;
}

Eigen::MatrixXd basis_aware_jacobian(const NetworkState& state, const RowMatrix& inputs, Eigen::VectorXd* responses,
                                     const RefreshOptions& options) {
  Eigen::MatrixXd jac = weight_jacobian(state, inputs, responses);
  const std::size_t n_layers = state.layers.size();
  if (state.basis_mode != BasisMode::adaptive || n_layers < 2) return jac;

  const Eigen::Index n_points = inputs.rows();
  const auto offset = layer_offsets(state);

  std::vector<RowMatrix> incoming(n_layers);
  incoming[0] = inputs;
  for (std::size_t l = 0; l + 1 < n_layers; ++l) incoming[l + 1] = layer_responses(state.layers[l], incoming[l], l == 0);

  // Moments theta_k of the signal each hidden-layer basis is built from.
  struct Group {
    std::size_t layer;
    int signal;
    int degree;
    std::vector<double> theta;
    Eigen::Index first_param;
  };
  std::vector<Group> groups;
  Eigen::Index n_params = 0;
  for (std::size_t l = 1; l < n_layers; ++l) {
    const Layer& layer = state.layers[l];
    for (int j = 0; j < layer.n_in; ++j) {
      const int d = layer.bases[j].degree;
      if (d == 0) continue;
      Group g{l, j, d, std::vector<double>(2 * d + 1, 0.0), n_params};
      std::vector<long double> acc(2 * d + 1, 0.0L);
      for (Eigen::Index s = 0; s < n_points; ++s) {
        const double z = incoming[l](s, j);
        const long double x = layer.spec.activation == Activation::normalized
                                  ? z
                                  : apply_activation(layer.spec.activation, z, layer.norm_stats[j]);
        long double p = 1.0L;
        for (int k = 0; k <= 2 * d; ++k, p *= x) acc[k] += p;
      }
      for (int k = 0; k <= 2 * d; ++k) g.theta[k] = static_cast<double>(acc[k] / n_points);
      g.theta[0] = 1.0;
      n_params += 2 * d;
      groups.push_back(std::move(g));
    }
  }
  if (n_params == 0) return jac;

  // M(p, :) = d theta_p / dw with every basis held fixed.
  RowMatrix moment_jac = RowMatrix::Zero(n_params, offset.back());
  std::vector<LayerTrace> trace;
  std::vector<double> row(static_cast<std::size_t>(offset.back()));
  for (Eigen::Index s = 0; s < n_points; ++s) {
    trace_forward(state, std::span<const double>(inputs.row(s).data(), inputs.cols()), trace, true);
    for (const Group& g : groups) {
      const Layer& layer = state.layers[g.layer];
      const double z = trace[g.layer].incoming[g.signal];
      double x = z;
      double dx = 1.0;
      if (layer.spec.activation != Activation::normalized) {
        x = apply_activation(layer.spec.activation, z, layer.norm_stats[g.signal]);
        dx = activation_derivative(layer.spec.activation, z, layer.norm_stats[g.signal]);
      }
      if (dx == 0.0) continue;
      const Eigen::Index width = offset[g.layer];
      std::fill(row.begin(), row.begin() + width, 0.0);
      std::vector<double> seed(state.layers[g.layer - 1].spec.n_nodes, 0.0);
      seed[g.signal] = 1.0;
      backprop(state, trace, g.layer - 1, std::move(seed), offset, row.data());
      const Eigen::Map<const Eigen::RowVectorXd> r(row.data(), width);
      double xpow = 1.0;  // x^(k-1)
      for (int k = 1; k <= 2 * g.degree; ++k, xpow *= x) {
        moment_jac.row(g.first_param + k - 1).head(width) += (k * xpow * dx / n_points) * r;
      }
    }
  }

  // The response is linear in the basis values of each output-layer signal:
  // r = sum_k C(s, j, k) phi_j^k(x_s) + terms free of signal j.
  const std::size_t last = n_layers - 1;
  const Layer& out_layer = state.layers[last];
  const int width = out_layer.spec.degree + 1;
  RowMatrix coeff;
  if (std::any_of(groups.begin(), groups.end(), [&](const Group& g) { return g.layer == last; })) {
    coeff = RowMatrix::Zero(n_points, out_layer.n_in * width);
    std::vector<double> values(static_cast<std::size_t>(out_layer.n_in * width));
    const auto w = out_layer.node_weights(0);
    for (Eigen::Index s = 0; s < n_points; ++s) {
      for (int j = 0; j < out_layer.n_in; ++j) {
        const double x = apply_activation(out_layer.spec.activation, incoming[last](s, j), out_layer.norm_stats[j]);
        eval_basis_all(out_layer.bases[j], x, std::span<double>(values.data() + j * width, width));
      }
      for (std::size_t i = 1; i < out_layer.term_count(); ++i) {
        const auto& support = out_layer.terms.support[i];
        for (std::size_t a = 0; a < support.size(); ++a) {
          double prod = w[i];
          for (std::size_t b = 0; b < support.size(); ++b) {
            if (b != a) prod *= values[support[b].first * width + support[b].second];
          }
          coeff(s, support[a].first * width + support[a].second) += prod;
        }
      }
    }
  }

  // E(:, p) = d response / d theta_p, downstream layers rebuilt from the perturbed signals.
  Eigen::MatrixXd effect = Eigen::MatrixXd::Zero(n_points, n_params);
  std::vector<double> phi(static_cast<std::size_t>(width));
  for (const Group& g : groups) {
    const double var = g.theta[2] - g.theta[1] * g.theta[1];
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    const Layer& base = state.layers[g.layer];
    for (int k = 1; k <= 2 * g.degree; ++k) {
      const double h = 1e-6 * std::max(std::abs(g.theta[k]), std::pow(sd, k));
      Eigen::VectorXd out[2];
      bool ok = true;
      for (int side = 0; side < 2 && ok; ++side) {
        std::vector<double> theta = g.theta;
        theta[k] += side == 0 ? h : -h;
        try {
          NormStats stats = base.norm_stats[g.signal];
          const OrthonormalBasis1D basis = signal_basis_from_moments(base.spec.activation, g.degree, theta, &stats);
          if (g.layer == last) {
            out[side].resize(n_points);
            for (Eigen::Index s = 0; s < n_points; ++s) {
              const double x = apply_activation(base.spec.activation, incoming[last](s, g.signal), stats);
              eval_basis_all(basis, x, phi);
              double r = 0.0;
              for (int a = 1; a <= g.degree; ++a) r += coeff(s, g.signal * width + a) * phi[a];
              out[side][s] = r;
            }
            continue;
          }
          Layer layer = base;
          layer.bases[g.signal] = basis;
          layer.norm_stats[g.signal] = stats;
          RowMatrix signals = layer_responses(layer, incoming[g.layer], false);
          for (std::size_t l2 = g.layer + 1; l2 < n_layers; ++l2) {
            Layer next = state.layers[l2];
            refresh_layer(next, l2, signals, options);
            signals = layer_responses(next, signals, false);
          }
          out[side] = signals.col(0);
        } catch (const Error&) {
          ok = false;
        }
      }
      if (ok) effect.col(g.first_param + k - 1) = (out[0] - out[1]) / (2.0 * h);
    }
  }
  jac.noalias() += effect * moment_jac;
  return jac;
}

Eigen::MatrixXd finite_difference_jacobian(const NetworkState& state, const RowMatrix& inputs, double rel_step) {
  NetworkState probe = state;
  std::vector<double> w = state.flat_weights();
  Eigen::MatrixXd jac(inputs.rows(), static_cast<Eigen::Index>(w.size()));
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double h = rel_step * std::max(1.0, std::abs(w[k]));
    const double keep = w[k];
    w[k] = keep + h;
    probe.set_flat_weights(w);
    const Eigen::VectorXd plus = predict(probe, inputs);
    w[k] = keep - h;
    probe.set_flat_weights(w);
    const Eigen::VectorXd minus = predict(probe, inputs);
    w[k] = keep;
    jac.col(static_cast<Eigen::Index>(k)) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

double max_relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& reference) {
  if (analytic.rows() != reference.rows() || analytic.cols() != reference.cols()) {
    throw Error(ErrorCode::dimension_mismatch, "jacobian shapes differ");
  }
  double worst = 0.0;
  for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
    for (Eigen::Index r = 0; r < analytic.rows(); ++r) {
      const double a = analytic(r, c);
      worst = std::max(worst, std::abs(a - reference(r, c)) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

}  // namespace dapc
