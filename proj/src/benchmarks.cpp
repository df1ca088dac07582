#include "dapc/benchmarks.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <string>
#include <thread>

#include "dapc/error.hpp"
#include "dapc/random.hpp"

namespace dapc {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint64_t kValidationStream = 0x76616c6964ULL;

double sample_std(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

Architecture apc_arch(int degree) { return {Method::apc, {{1, degree, Activation::identity}}}; }

Architecture dann_arch(std::vector<int> nodes) {
  Architecture a{Method::dann, {}};
  for (int n : nodes) a.layers.push_back({n, 1, Activation::tanh});
  return a;
}

Architecture dapc_arch(std::vector<int> nodes, std::vector<int> degrees) {
  Architecture a{Method::dapcnn, {}};
  for (std::size_t i = 0; i < nodes.size(); ++i) a.layers.push_back({nodes[i], degrees[i], Activation::normalized});
  return a;
}

}  // namespace

double ishigami(std::span<const double> w, double a, double b) {
  if (w.size() != 3) throw Error(ErrorCode::dimension_mismatch, "Ishigami takes 3 inputs");
  const double s1 = std::sin(w[0]);
  const double s2 = std::sin(w[1]);
  return s1 + a * s2 * s2 + b * std::pow(w[2], 4) * s1;
}

double on10(std::span<const double> w) {
  if (w.size() != 10) throw Error(ErrorCode::dimension_mismatch, "ON-10 takes 10 inputs");
  const double q = w[0] * w[0] + w[1] - 1.0;
  double r = q * q + w[0] * w[0] + 0.1 * w[0] * std::exp(w[1]) + 1.0;
  for (int i = 3; i <= 10; ++i) r += std::pow(w[i - 1], 3) / i;
  return r;
}

double ishigami_variance(double a, double b) {
  const double pi4 = std::pow(kPi, 4);
  return a * a / 8.0 + b * pi4 / 5.0 + b * b * pi4 * pi4 / 18.0 + 0.5;
}

std::array<double, 3> ishigami_first_order(double a, double b) {
  const double v = ishigami_variance(a, b);
  const double t = 1.0 + b * std::pow(kPi, 4) / 5.0;
  return {0.5 * t * t / v, a * a / 8.0 / v, 0.0};
}

MetricReport compute_metrics(const Eigen::VectorXd& predictions, const Eigen::VectorXd& references) {
  if (predictions.size() != references.size()) {
    throw Error(ErrorCode::dimension_mismatch, std::to_string(predictions.size()) + " predictions for " +
                                                   std::to_string(references.size()) + " references");
  }
  if (references.size() < 2) throw Error(ErrorCode::invalid_argument, "metrics need at least two points");
  MetricReport r;
  r.mse = (predictions - references).squaredNorm() / static_cast<double>(references.size());
  const double mu_ref = references.mean();
  const double sd_ref = sample_std(references);
  r.rel_mean_err = mu_ref != 0.0 ? (predictions.mean() - mu_ref) / mu_ref : MetricReport::kUndefined;
  r.rel_std_err = sd_ref != 0.0 ? (sample_std(predictions) - sd_ref) / sd_ref : MetricReport::kUndefined;
  r.averaged_mse = r.mse;
  r.averaged_mean_err = std::abs(predictions.mean() - mu_ref);
  r.averaged_std_err = std::abs(sample_std(predictions) - sd_ref);
  return r;
}

MetricReport compute_metrics_vector(const RowMatrix& predictions, const RowMatrix& references) {
  if (predictions.rows() != references.rows() || predictions.cols() != references.cols()) {
    throw Error(ErrorCode::dimension_mismatch, "prediction and reference shapes differ");
  }
  if (references.cols() < 1) throw Error(ErrorCode::invalid_argument, "need at least one output column");
  if (references.rows() < 2) throw Error(ErrorCode::invalid_argument, "metrics need at least two points");
  if (references.cols() == 1) return compute_metrics(predictions.col(0), references.col(0));

  const auto m = static_cast<double>(references.cols());
  const auto v = static_cast<double>(references.rows());
  Eigen::VectorXd dmean(references.cols());
  Eigen::VectorXd dstd(references.cols());
  for (Eigen::Index c = 0; c < references.cols(); ++c) {
    dmean[c] = predictions.col(c).mean() - references.col(c).mean();
    dstd[c] = sample_std(predictions.col(c)) - sample_std(references.col(c));
  }
  MetricReport r;
  r.averaged_mse = (predictions - references).squaredNorm() / (m * v);
  r.averaged_mean_err = dmean.norm() / m;
  r.averaged_std_err = dstd.norm() / m;
  r.mse = r.averaged_mse;
  r.rel_mean_err = MetricReport::kUndefined;
  r.rel_std_err = MetricReport::kUndefined;
  return r;
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::apc: return "apc";
    case Method::dann: return "dann";
    case Method::dapcnn: return "dapcnn";
  }
  return "dapcnn";
}

Method parse_method(std::string_view name) {
  if (name == "apc") return Method::apc;
  if (name == "dann") return Method::dann;
  if (name == "dapcnn") return Method::dapcnn;
  throw Error(ErrorCode::invalid_argument, "unknown method '" + std::string(name) + "'");
}

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::sobol: return "sobol";
    case Strategy::gaussian_grid: return "gaussian-grid";
    case Strategy::monte_carlo: return "monte-carlo";
  }
  return "sobol";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "sobol") return Strategy::sobol;
  if (name == "gaussian-grid") return Strategy::gaussian_grid;
  if (name == "monte-carlo") return Strategy::monte_carlo;
  throw Error(ErrorCode::invalid_argument, "unknown strategy '" + std::string(name) + "'");
}

Eigen::VectorXd Problem::evaluate(const RowMatrix& inputs) const {
  if (inputs.cols() != n_inputs) throw Error(ErrorCode::dimension_mismatch, name + " takes " +
                                                                                std::to_string(n_inputs) + " inputs");
  Eigen::VectorXd out(inputs.rows());
  for (Eigen::Index t = 0; t < inputs.rows(); ++t) out[t] = model(std::span<const double>(inputs.row(t).data(), n_inputs));
  return out;
}

Problem ishigami_problem() {
  return {"ishigami", 3, std::vector<Marginal>(3, Marginal::uniform(-kPi, kPi)),
          [](std::span<const double> w) { return ishigami(w); }};
}

Problem on10_problem() {
  return {"on10", 10, std::vector<Marginal>(10, Marginal::uniform(-5.0, 5.0)), on10};
}

Problem problem_by_name(std::string_view name) {
  if (name == "ishigami") return ishigami_problem();
  if (name == "on10") return on10_problem();
  throw Error(ErrorCode::invalid_argument, "unknown problem '" + std::string(name) + "'");
}

RowMatrix training_inputs(const Problem& problem, Strategy strategy, std::size_t size, std::uint64_t seed) {
  switch (strategy) {
    case Strategy::sobol:
      return map_to_marginals(sobol_points(problem.n_inputs, size), problem.marginals);
    case Strategy::monte_carlo:
      return monte_carlo_points(problem.n_inputs, size, seed, problem.marginals);
    case Strategy::gaussian_grid: {
      const int per_axis =
          static_cast<int>(std::lround(std::pow(static_cast<double>(size), 1.0 / problem.n_inputs)));
      std::size_t check = 1;
      for (int j = 0; j < problem.n_inputs; ++j) check *= static_cast<std::size_t>(per_axis);
      if (per_axis < 1 || check != size) {
        throw Error(ErrorCode::invalid_argument, "Gaussian grid size " + std::to_string(size) + " is not a " +
                                                     std::to_string(problem.n_inputs) + "-th power");
      }
      return gaussian_grid(problem.marginals, per_axis);
    }
  }
  throw Error(ErrorCode::invalid_argument, "unknown strategy");
}

BasisMode Architecture::basis_mode() const {
  return method == Method::dann ? BasisMode::fixed_gaussian_monomial : BasisMode::adaptive;
}

std::size_t Architecture::weight_count(int n_inputs) const {
  std::size_t total = 0;
  int n_in = n_inputs;
  for (const auto& l : layers) {
    total += total_degree_count(n_in, l.degree) * static_cast<std::size_t>(l.n_nodes);
    n_in = l.n_nodes;
  }
  return total;
}

ArchitectureTable ishigami_architectures() {
  return {
      {10, {apc_arch(2), dann_arch({6, 6, 1}), dapc_arch({3, 1}, {2, 2})}},
      {100, {apc_arch(4), dann_arch({9, 6, 3, 1}), dapc_arch({3, 3, 1}, {2, 2, 2})}},
      {1000, {apc_arch(6), dann_arch({10, 8, 6, 1}), dapc_arch({3, 3, 1}, {3, 3, 2})}},
  };
}

ArchitectureTable on10_architectures() {
  return {
      {100, {apc_arch(2), dann_arch({9, 6, 3, 1}), dapc_arch({5, 1}, {2, 3})}},
      {500, {apc_arch(3), dann_arch({15, 10, 5, 1}), dapc_arch({10, 1}, {2, 3})}},
      {1000, {apc_arch(4), dann_arch({15, 10, 5, 1}), dapc_arch({10, 1}, {2, 3})}},
  };
}

ArchitectureTable architectures_for(std::string_view problem) {
  if (problem == "ishigami") return ishigami_architectures();
  if (problem == "on10") return on10_architectures();
  throw Error(ErrorCode::invalid_argument, "no architecture table for '" + std::string(problem) + "'");
}

ModelRun train_model(const Architecture& arch, const Dataset& train, const RowMatrix& validation_inputs,
                     const TrainingConfig& training, std::uint64_t seed) {
  const int n = static_cast<int>(train.inputs.cols());
  NetworkState state = build_network(n, arch.layers, seed, arch.basis_mode());
  ModelRun run;
  if (arch.method == Method::apc) {
    if (arch.layers.size() != 1) throw Error(ErrorCode::invalid_argument, "aPC models have one layer");
    state = fit_single_layer(state, train);
    run.stop_reason = "least-squares";
  } else {
    TrainingConfig cfg = training;
    cfg.seed = seed;
    if (training.init_candidates > 1) {
      std::vector<NetworkState> starts{state};
      for (int c = 1; c < training.init_candidates; ++c) {
        starts.push_back(build_network(n, arch.layers, mix_seed(seed, static_cast<std::uint64_t>(c)), arch.basis_mode()));
      }
      state = std::move(starts[select_start(starts, train, cfg, training.probe_iterations)]);
    }
    TrainingResult result = train_lm(state, train, cfg);
    state = std::move(result.state);
    run.iterations = result.history.records.empty() ? 0 : result.history.records.back().iteration;
    run.stop_reason = result.history.stop_reason;
  }
  run.train_predictions = predict(state, train.inputs);
  run.validation_predictions = predict(state, validation_inputs);
  return run;
}

std::vector<SweepRow> convergence_sweep(const Problem& problem, const ArchitectureTable& table,
                                        const SweepConfig& config) {
  if (config.validation_size == 0) throw Error(ErrorCode::empty_dataset, "validation_size must be positive");
  for (std::size_t i = 1; i < table.size(); ++i) {
    if (table[i].size <= table[i - 1].size) throw Error(ErrorCode::invalid_argument, "sizes must be ascending");
  }

  const RowMatrix validation_inputs =
      monte_carlo_points(problem.n_inputs, config.validation_size, mix_seed(config.seed, kValidationStream),
                         problem.marginals);
  const Eigen::VectorXd validation_ref = problem.evaluate(validation_inputs);

  struct Task {
    std::size_t table_row;
    std::size_t model;
  };
  std::vector<Task> tasks;
  std::vector<Dataset> train_sets(table.size());
  std::vector<std::string> train_errors(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    try {
      train_sets[i].inputs = training_inputs(problem, config.strategy, table[i].size, mix_seed(config.seed, table[i].size));
      train_sets[i].responses = problem.evaluate(train_sets[i].inputs);
    } catch (const Error& e) {
      train_errors[i] = std::string(e.code_name());
    }
    for (std::size_t k = 0; k < table[i].models.size(); ++k) tasks.push_back({i, k});
  }

  std::vector<SweepRow> rows(tasks.size());
  auto run_task = [&](std::size_t t) {
    const Task& task = tasks[t];
    const SizeArchitectures& entry = table[task.table_row];
    const Architecture& arch = entry.models[task.model];
    SweepRow& row = rows[t];
    row.size = entry.size;
    row.method = arch.method;
    row.n_weights = arch.weight_count(problem.n_inputs);
    if (!train_errors[task.table_row].empty()) {
      row.error = train_errors[task.table_row];
      return;
    }
    const Dataset& train = train_sets[task.table_row];
    row.training_points = train.size();
    try {
      const std::uint64_t seed = mix_seed(mix_seed(config.seed, entry.size), task.model + 1);
      const ModelRun run = train_model(arch, train, validation_inputs, config.training, seed);
      row.train_mse = (run.train_predictions - train.response(0)).squaredNorm() / static_cast<double>(train.size());
      row.metrics = compute_metrics(run.validation_predictions, validation_ref);
      row.iterations = run.iterations;
      row.stop_reason = run.stop_reason;
    } catch (const Error& e) {
      row.error = std::string(e.code_name());
    }
  };

  int jobs = config.jobs > 0 ? config.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  jobs = std::min<int>(jobs, static_cast<int>(tasks.size()));
  if (jobs <= 1) {
    for (std::size_t t = 0; t < tasks.size(); ++t) run_task(t);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (int j = 0; j < jobs; ++j) {
    workers.emplace_back([&] {
      for (std::size_t t = next++; t < tasks.size(); t = next++) run_task(t);
    });
  }
  for (auto& w : workers) w.join();
  return rows;
}

}  // namespace dapc
