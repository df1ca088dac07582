#include "dapc/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dapc/error.hpp"
#include "dapc/random.hpp"

namespace dapc {
namespace {

std::string layer_label(std::size_t layer) { return "layer " + std::to_string(layer + 1); }

// Fills the univariate tables and multivariate terms of `layer` at activated
// signals z. derivs may be null.
void eval_layer_terms(const Layer& layer, const double* z, double* values, double* derivs, double* psi) {
  const int width = layer.spec.degree + 1;
  for (int j = 0; j < layer.n_in; ++j) {
    std::span<double> vrow(values + static_cast<std::ptrdiff_t>(j) * width, width);
    std::span<double> drow;
    if (derivs != nullptr) drow = std::span<double>(derivs + static_cast<std::ptrdiff_t>(j) * width, width);
    eval_basis_all(layer.bases[j], z[j], vrow, drow);
  }
  const auto& support = layer.terms.support;
  for (std::size_t i = 0; i < support.size(); ++i) {
    double v = 1.0;
    for (const auto& [j, a] : support[i]) v *= values[j * width + a];
    psi[i] = v;
  }
}

std::optional<NormStats> stats_for(const Layer& layer, int j) {
  if (static_cast<std::size_t>(j) < layer.norm_stats.size()) return layer.norm_stats[j];
  return std::nullopt;
}

void require_bases(const NetworkState& state) {
  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    if (state.layers[l].bases.size() != static_cast<std::size_t>(state.layers[l].n_in)) {
      throw Error(ErrorCode::bases_not_refreshed, layer_label(l) + " has no basis; call refresh_bases first");
    }
  }
}

NormStats batch_stats(const Eigen::Ref<const Eigen::VectorXd>& column) {
  const double n = static_cast<double>(column.size());
  const double mean = column.sum() / n;
  const double var = (column.array() - mean).square().sum() / n;
  return {mean, std::sqrt(var)};
}

}  // namespace

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::normalized: return "normalized";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity" || name == "none" || name == "linear") return Activation::identity;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  if (name == "normalized") return Activation::normalized;
  throw Error(ErrorCode::invalid_argument, "unknown activation '" + std::string(name) + "'");
}

std::string_view basis_mode_name(BasisMode m) {
  return m == BasisMode::adaptive ? "adaptive" : "fixed-gaussian-monomial";
}

BasisMode parse_basis_mode(std::string_view name) {
  if (name == "adaptive") return BasisMode::adaptive;
  if (name == "fixed-gaussian-monomial") return BasisMode::fixed_gaussian_monomial;
  throw Error(ErrorCode::invalid_argument, "unknown basis mode '" + std::string(name) + "'");
}

std::span<double> Layer::node_weights(int node) {
  const std::size_t m = term_count();
  return {weights.data() + static_cast<std::size_t>(node) * m, m};
}

std::span<const double> Layer::node_weights(int node) const {
  const std::size_t m = term_count();
  return {weights.data() + static_cast<std::size_t>(node) * m, m};
}

bool NetworkState::has_bases() const {
  return std::all_of(layers.begin(), layers.end(),
                     [](const Layer& l) { return l.bases.size() == static_cast<std::size_t>(l.n_in); });
}

std::size_t NetworkState::weight_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size();
  return n;
}

std::vector<double> NetworkState::flat_weights() const {
  std::vector<double> w;
  w.reserve(weight_count());
  for (const auto& l : layers) w.insert(w.end(), l.weights.begin(), l.weights.end());
  return w;
}

void NetworkState::set_flat_weights(std::span<const double> w) {
  if (w.size() != weight_count()) {
    throw Error(ErrorCode::weight_count_mismatch,
                "expected " + std::to_string(weight_count()) + " weights, got " + std::to_string(w.size()));
  }
  std::size_t offset = 0;
  for (auto& l : layers) {
    std::copy_n(w.begin() + static_cast<std::ptrdiff_t>(offset), l.weights.size(), l.weights.begin());
    offset += l.weights.size();
  }
}

std::vector<LayerSpec> NetworkState::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers) out.push_back(l.spec);
  return out;
}

void validate_dataset(const Dataset& data) {
  if (data.inputs.rows() != data.responses.rows()) {
    throw Error(ErrorCode::dimension_mismatch, std::to_string(data.inputs.rows()) + " input rows vs " +
                                                   std::to_string(data.responses.rows()) + " response rows");
  }
  if (!data.inputs.allFinite() || !data.responses.allFinite()) {
    throw Error(ErrorCode::non_finite_input, "dataset contains non-finite entries");
  }
}

NetworkState build_network(int n_inputs, const std::vector<LayerSpec>& specs, std::uint64_t seed, BasisMode mode,
                           std::size_t term_cap) {
  if (n_inputs < 1) throw Error(ErrorCode::invalid_argument, "n_inputs must be >= 1");
  if (specs.empty()) throw Error(ErrorCode::invalid_argument, "at least one layer is required");
  if (specs.back().n_nodes != 1) {
    throw Error(ErrorCode::invalid_argument, "the last layer must have exactly one node");
  }

  NetworkState state;
  state.n_inputs = n_inputs;
  state.basis_mode = mode;
  Rng rng(seed);
  int n_in = n_inputs;
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const LayerSpec& spec = specs[l];
    if (spec.n_nodes < 1 || spec.degree < 1) {
      throw Error(ErrorCode::invalid_argument, layer_label(l) + ": nodes and degree must be >= 1");
    }
    if (mode == BasisMode::fixed_gaussian_monomial && spec.degree != 1) {
      throw Error(ErrorCode::invalid_argument, layer_label(l) + ": fixed monomial basis supports degree 1 only");
    }
    Layer layer;
    layer.spec = spec;
    layer.n_in = n_in;
    layer.terms = enumerate_total_degree(n_in, spec.degree, term_cap);
    const std::size_t m = layer.terms.size();
    const double sd = 1.0 / std::sqrt(static_cast<double>(m));
    layer.weights.resize(m * static_cast<std::size_t>(spec.n_nodes));
    for (int node = 0; node < spec.n_nodes; ++node) {
      auto w = layer.node_weights(node);
      w[0] = 0.0;
      for (std::size_t i = 1; i < m; ++i) w[i] = sd * rng.normal();
    }
    if (mode == BasisMode::fixed_gaussian_monomial) {
      layer.bases.assign(n_in, gaussian_monomial_basis());
    }
    state.layers.push_back(std::move(layer));
    n_in = spec.n_nodes;
  }
  return state;
}

double apply_activation(Activation kind, double x, std::optional<NormStats> stats) {
  switch (kind) {
    case Activation::identity: return x;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::tanh: return std::tanh(x);
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::normalized:
      if (!stats || !(stats->std > 0.0)) {
        throw Error(ErrorCode::missing_normalization_stats, "normalized activation needs (mean, std > 0)");
      }
      return (x - stats->mean) / stats->std;
  }
  return x;
}

double activation_derivative(Activation kind, double x, std::optional<NormStats> stats) {
  switch (kind) {
    case Activation::identity: return 1.0;
    case Activation::sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s);
    }
    case Activation::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::normalized:
      if (!stats || !(stats->std > 0.0)) {
        throw Error(ErrorCode::missing_normalization_stats, "normalized activation needs (mean, std > 0)");
      }
      return 1.0 / stats->std;
  }
  return 1.0;
}

RowMatrix layer_responses(const Layer& layer, const RowMatrix& incoming, bool first_layer) {
  if (layer.bases.size() != static_cast<std::size_t>(layer.n_in)) {
    throw Error(ErrorCode::bases_not_refreshed, "layer has no basis; call refresh_bases first");
  }
  const Eigen::Index n_points = incoming.rows();
  const int width = layer.spec.degree + 1;
  std::vector<double> activated(layer.n_in);
  std::vector<double> values(static_cast<std::size_t>(layer.n_in) * width);
  std::vector<double> psi(layer.term_count());
  RowMatrix responses(n_points, layer.spec.n_nodes);
  for (Eigen::Index t = 0; t < n_points; ++t) {
    for (int j = 0; j < layer.n_in; ++j) {
      activated[j] = first_layer ? incoming(t, j)
                                 : apply_activation(layer.spec.activation, incoming(t, j), stats_for(layer, j));
    }
    eval_layer_terms(layer, activated.data(), values.data(), nullptr, psi.data());
    for (int node = 0; node < layer.spec.n_nodes; ++node) {
      const auto w = layer.node_weights(node);
      double r = 0.0;
      for (std::size_t i = 0; i < psi.size(); ++i) r += w[i] * psi[i];
      responses(t, node) = r;
    }
  }
  return responses;
}

void refresh_layer(Layer& layer, std::size_t index, const RowMatrix& incoming, const RefreshOptions& options,
                   std::vector<std::string>* warnings) {
  const Eigen::Index n_points = incoming.rows();
  const int d = layer.spec.degree;
  const bool first = (index == 0);
  layer.norm_stats.assign(layer.n_in, NormStats{});
  layer.bases.assign(layer.n_in, OrthonormalBasis1D{});
  Eigen::VectorXd activated(n_points);

  for (int j = 0; j < layer.n_in; ++j) {
    const NormStats raw = batch_stats(incoming.col(j));
    bool dead = !(raw.std >= kDeadSignalStd);
    layer.norm_stats[j] = {raw.mean, dead ? 1.0 : raw.std};
    for (Eigen::Index t = 0; t < n_points; ++t) {
      activated[t] = first ? incoming(t, j) : apply_activation(layer.spec.activation, incoming(t, j),
                                                               layer.norm_stats[j]);
    }
    if (!activated.allFinite()) {
      throw Error(ErrorCode::non_finite_input, layer_label(index) + ", signal " + std::to_string(j + 1) +
                                                   ": non-finite activated signal");
    }
    if (!dead && !first) dead = !(batch_stats(activated).std >= kDeadSignalStd);

    if (dead && first) {
      throw MomentDegeneracy(0, layer_label(index) + ", input " + std::to_string(j + 1) + ": constant signal");
    }
    if (dead) {
      layer.bases[j] = univariate_basis(MomentSet::from_raw({1.0}), 0);
      if (warnings) {
        warnings->push_back(layer_label(index) + ", signal " + std::to_string(j + 1) + ": dead signal, degree 0 basis");
      }
      continue;
    }

    const MomentSet moments = raw_moments(std::span<const double>(activated.data(), activated.size()), 2 * d);
    try {
      layer.bases[j] = univariate_basis(moments, d);
    } catch (const MomentDegeneracy& e) {
      const std::string where = layer_label(index) + ", signal " + std::to_string(j + 1);
      if (first || !options.reduce_degree_on_degeneracy) throw MomentDegeneracy(e.max_feasible_degree(), where);
      const int reduced = std::max(0, e.max_feasible_degree());
      layer.bases[j] = univariate_basis(moments, reduced);
      if (warnings) warnings->push_back(where + ": degenerate moments, degree reduced to " + std::to_string(reduced));
    }
  }
}

OrthonormalBasis1D signal_basis_from_moments(Activation activation, int degree, const std::vector<double>& raw,
                                             NormStats* stats) {
  if (activation != Activation::normalized) return univariate_basis(MomentSet::from_raw(raw), degree);
  if (raw.size() < 3) throw Error(ErrorCode::invalid_argument, "normalized signal needs moments up to order 2");
  const long double mean = raw[1];
  const long double var = static_cast<long double>(raw[2]) - mean * mean;
  if (!(var > 0.0L)) throw MomentDegeneracy(0, "non-positive variance");
  const long double sd = std::sqrt(var);
  if (stats) *stats = {static_cast<double>(mean), static_cast<double>(sd)};
  // E[((x - mean) / sd)^k] from the raw moments of x.
  std::vector<double> shifted(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    long double acc = 0.0L;
    long double binom = 1.0L;
    for (std::size_t i = 0; i <= k; ++i) {
      acc += binom * raw[i] * std::pow(-mean, static_cast<long double>(k - i));
      binom = binom * static_cast<long double>(k - i) / static_cast<long double>(i + 1);
    }
    shifted[k] = static_cast<double>(acc / std::pow(sd, static_cast<long double>(k)));
  }
  shifted[0] = 1.0;
  return univariate_basis(MomentSet::from_raw(std::move(shifted)), degree);
}

NetworkState refresh_bases(const NetworkState& state, const RowMatrix& training_inputs, const RefreshOptions& options,
                           std::vector<std::string>* warnings) {
  if (state.basis_mode == BasisMode::fixed_gaussian_monomial) return state;
  if (training_inputs.rows() == 0) throw Error(ErrorCode::empty_dataset, "refresh needs training inputs");
  if (training_inputs.cols() != state.n_inputs) {
    throw Error(ErrorCode::dimension_mismatch, "expected " + std::to_string(state.n_inputs) + " input columns, got " +
                                                   std::to_string(training_inputs.cols()));
  }
  NetworkState out = state;
  RowMatrix signals = training_inputs;
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    refresh_layer(out.layers[l], l, signals, options, warnings);
    if (l + 1 < out.layers.size()) signals = layer_responses(out.layers[l], signals, l == 0);
  }
  return out;
}

void trace_forward(const NetworkState& state, std::span<const double> input, std::vector<LayerTrace>& trace,
                   bool with_derivatives) {
  if (input.size() != static_cast<std::size_t>(state.n_inputs)) {
    throw Error(ErrorCode::dimension_mismatch, "expected " + std::to_string(state.n_inputs) + " inputs, got " +
                                                   std::to_string(input.size()));
  }
  require_bases(state);
  trace.resize(state.layers.size());
  std::span<const double> signals = input;
  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    const Layer& layer = state.layers[l];
    LayerTrace& t = trace[l];
    t.incoming.assign(signals.begin(), signals.end());
    t.activated.resize(layer.n_in);
    for (int j = 0; j < layer.n_in; ++j) {
      t.activated[j] = (l == 0) ? t.incoming[j] : apply_activation(layer.spec.activation, t.incoming[j],
                                                                   stats_for(layer, j));
    }
    const std::size_t width = static_cast<std::size_t>(layer.spec.degree) + 1;
    t.values.resize(layer.n_in * width);
    if (with_derivatives) t.derivs.resize(layer.n_in * width);
    t.psi.resize(layer.term_count());
    eval_layer_terms(layer, t.activated.data(), t.values.data(), with_derivatives ? t.derivs.data() : nullptr,
                     t.psi.data());
    t.responses.resize(layer.spec.n_nodes);
    for (int node = 0; node < layer.spec.n_nodes; ++node) {
      const auto w = layer.node_weights(node);
      double r = 0.0;
      for (std::size_t i = 0; i < t.psi.size(); ++i) r += w[i] * t.psi[i];
      t.responses[node] = r;
    }
    signals = t.responses;
  }
}

ForwardResult forward(const NetworkState& state, std::span<const double> input) {
  for (double v : input) {
    if (!std::isfinite(v)) throw Error(ErrorCode::non_finite_input, "non-finite network input");
  }
  std::vector<LayerTrace> trace;
  trace_forward(state, input, trace, false);
  ForwardResult result;
  for (auto& t : trace) result.layer_responses.push_back(std::move(t.responses));
  result.response = result.layer_responses.back().front();
  return result;
}

Eigen::VectorXd predict(const NetworkState& state, const RowMatrix& inputs) {
  Eigen::VectorXd out(inputs.rows());
  std::vector<LayerTrace> trace;
  for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
    trace_forward(state, std::span<const double>(inputs.row(t).data(), inputs.cols()), trace, false);
    out[t] = trace.back().responses.front();
  }
  return out;
}

NodeStatistics node_statistics(std::span<const double> weights) {
  if (weights.empty()) throw Error(ErrorCode::invalid_argument, "node has no weights");
  double var = 0.0;
  for (std::size_t i = 1; i < weights.size(); ++i) var += weights[i] * weights[i];
  return {weights[0], var};
}

std::vector<TermSensitivity> sobol_indices(std::span<const double> weights, const MultiIndexSet& terms) {
  if (weights.size() != terms.size()) {
    throw Error(ErrorCode::dimension_mismatch, std::to_string(weights.size()) + " weights for " +
                                                   std::to_string(terms.size()) + " terms");
  }
  const double var = node_statistics(weights).variance;
  if (!(var > 0.0)) throw Error(ErrorCode::degenerate_node, "node response has zero variance");
  std::vector<TermSensitivity> out;
  out.reserve(terms.size() - 1);
  for (std::size_t i = 1; i < terms.size(); ++i) out.push_back({terms.indices[i], weights[i] * weights[i] / var});
  return out;
}

InputSensitivity aggregate_sobol(std::span<const TermSensitivity> terms, int n_inputs) {
  InputSensitivity s;
  s.first_order.assign(n_inputs, 0.0);
  s.total.assign(n_inputs, 0.0);
  for (const auto& t : terms) {
    int active = 0;
    int last = -1;
    for (int j = 0; j < n_inputs; ++j) {
      if (t.index[j] > 0) {
        ++active;
        last = j;
        s.total[j] += t.value;
      }
    }
    if (active == 1) s.first_order[last] += t.value;
  }
  return s;
}

}  // namespace dapc
