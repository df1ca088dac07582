#pragma once

// Deep arbitrary polynomial chaos network.
//
// Every node of layer L returns sum_i w_i Psi_i(z), where z are the incoming
// signals after the layer's activation and Psi is a total-degree multivariate
// product basis shared by all nodes of the layer. In adaptive mode the
// univariate factors are rebuilt from the training batch each time the
// weights change (refresh_bases); in fixed-gaussian-monomial mode they are
// the {1, x} family, which turns degree-1 layers into a conventional
// feed-forward network.
//
// The first layer receives the raw inputs; the activation of layer L >= 2 is
// applied to the responses of layer L-1. The last layer's superposition is
// the network response, without an output activation.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dapc/apc.hpp"
#include "dapc/multiindex.hpp"
#include "dapc/types.hpp"

namespace dapc {

enum class Activation { identity, sigmoid, tanh, relu, normalized };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

enum class BasisMode { adaptive, fixed_gaussian_monomial };

std::string_view basis_mode_name(BasisMode m);
BasisMode parse_basis_mode(std::string_view name);

struct LayerSpec {
  int n_nodes = 1;
  int degree = 1;
  Activation activation = Activation::identity;

  bool operator==(const LayerSpec&) const = default;
};

/// Batch mean and standard deviation of one incoming signal.
struct NormStats {
  double mean = 0.0;
  double std = 1.0;
};

struct Layer {
  LayerSpec spec;
  int n_in = 0;
  MultiIndexSet terms;
  /// n_nodes x terms.size(), node-major; position 0 of each node is the bias.
  std::vector<double> weights;
  /// One per incoming signal; empty until the first refresh in adaptive mode.
  std::vector<OrthonormalBasis1D> bases;
  std::vector<NormStats> norm_stats;

  std::size_t term_count() const { return terms.size(); }
  std::span<double> node_weights(int node);
  std::span<const double> node_weights(int node) const;
};

struct NetworkState {
  int n_inputs = 0;
  BasisMode basis_mode = BasisMode::adaptive;
  std::vector<Layer> layers;

  bool has_bases() const;
  std::size_t weight_count() const;
  /// Canonical order: layer-major, node-major, term index within node.
  std::vector<double> flat_weights() const;
  void set_flat_weights(std::span<const double> w);
  std::vector<LayerSpec> specs() const;
};

struct Dataset {
  RowMatrix inputs;
  RowMatrix responses;

  std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
  Eigen::VectorXd response(Eigen::Index column = 0) const { return responses.col(column); }
};

/// Validates shapes and finiteness; throws dimension-mismatch / non-finite-input.
void validate_dataset(const Dataset& data);

NetworkState build_network(int n_inputs, const std::vector<LayerSpec>& specs, std::uint64_t seed,
                           BasisMode mode = BasisMode::adaptive, std::size_t term_cap = kDefaultTermCap);

double apply_activation(Activation kind, double x, std::optional<NormStats> stats = std::nullopt);
double activation_derivative(Activation kind, double x, std::optional<NormStats> stats = std::nullopt);

struct RefreshOptions {
  /// Lower a signal's basis degree to the largest feasible one instead of
  /// failing when its moments are degenerate (hidden layers only).
  bool reduce_degree_on_degeneracy = false;
};

/// Signals whose batch standard deviation falls below this are dead and get
/// a degree-0 basis.
inline constexpr double kDeadSignalStd = 1e-10;

NetworkState refresh_bases(const NetworkState& state, const RowMatrix& training_inputs,
                           const RefreshOptions& options = {}, std::vector<std::string>* warnings = nullptr);

/// Batch responses of one layer; `incoming` holds the previous layer's raw
/// responses (or the inputs when `first_layer`).
RowMatrix layer_responses(const Layer& layer, const RowMatrix& incoming, bool first_layer);

/// Rebuilds one layer's bases and normalization statistics from its incoming
/// batch signals; refresh_bases applies this layer by layer.
void refresh_layer(Layer& layer, std::size_t index, const RowMatrix& incoming, const RefreshOptions& options = {},
                   std::vector<std::string>* warnings = nullptr);

/// Basis of a hidden-layer signal from the raw moments mu_0..mu_2d of the
/// signal the moments describe: the raw incoming response for the
/// normalized activation (statistics are derived from mu_1, mu_2 and written
/// to `stats`), the activated signal otherwise.
OrthonormalBasis1D signal_basis_from_moments(Activation activation, int degree, const std::vector<double>& raw,
                                             NormStats* stats = nullptr);

/// Per-point evaluation record of one layer.
struct LayerTrace {
  std::vector<double> incoming;   ///< responses of the previous layer (raw inputs for layer 1)
  std::vector<double> activated;  ///< signals fed to the basis
  std::vector<double> values;     ///< n_in x (degree+1): phi_j^k(activated_j)
  std::vector<double> derivs;     ///< same layout, d phi / d activated
  std::vector<double> psi;        ///< multivariate terms
  std::vector<double> responses;  ///< node outputs
};

void trace_forward(const NetworkState& state, std::span<const double> input, std::vector<LayerTrace>& trace,
                   bool with_derivatives);

struct ForwardResult {
  double response = 0.0;
  std::vector<std::vector<double>> layer_responses;
};

ForwardResult forward(const NetworkState& state, std::span<const double> input);
Eigen::VectorXd predict(const NetworkState& state, const RowMatrix& inputs);

struct NodeStatistics {
  double mean = 0.0;
  double variance = 0.0;
};

/// Mean and variance of a node response under the measure its basis is
/// orthonormal for: mean = w_0, variance = sum_{i>=1} w_i^2.
NodeStatistics node_statistics(std::span<const double> weights);

struct TermSensitivity {
  MultiIndex index;
  double value = 0.0;
};

/// Share of the node variance carried by each non-constant term.
std::vector<TermSensitivity> sobol_indices(std::span<const double> weights, const MultiIndexSet& terms);

struct InputSensitivity {
  std::vector<double> first_order;
  std::vector<double> total;
};

InputSensitivity aggregate_sobol(std::span<const TermSensitivity> terms, int n_inputs);

}  // namespace dapc
