#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dapc/network.hpp"
#include "dapc/sampling.hpp"
#include "dapc/trainer.hpp"

namespace dapc {

double ishigami(std::span<const double> w, double a = 7.0, double b = 0.1);
double on10(std::span<const double> w);

/// Analytic variance and first-order indices of the Ishigami function for
/// inputs uniform on (-pi, pi).
double ishigami_variance(double a = 7.0, double b = 0.1);
std::array<double, 3> ishigami_first_order(double a = 7.0, double b = 0.1);

/// Undefined relative metrics (zero reference mean or std) are NaN.
struct MetricReport {
  static constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

  double mse = 0.0;
  double rel_mean_err = 0.0;
  double rel_std_err = 0.0;
  double averaged_mse = 0.0;
  double averaged_mean_err = 0.0;
  double averaged_std_err = 0.0;
};

MetricReport compute_metrics(const Eigen::VectorXd& predictions, const Eigen::VectorXd& references);
MetricReport compute_metrics_vector(const RowMatrix& predictions, const RowMatrix& references);

enum class Method { apc, dann, dapcnn };
std::string_view method_name(Method m);
Method parse_method(std::string_view name);

enum class Strategy { sobol, gaussian_grid, monte_carlo };
std::string_view strategy_name(Strategy s);
Strategy parse_strategy(std::string_view name);

struct Problem {
  std::string name;
  int n_inputs = 0;
  std::vector<Marginal> marginals;
  std::function<double(std::span<const double>)> model;

  Eigen::VectorXd evaluate(const RowMatrix& inputs) const;
};

Problem ishigami_problem();
Problem on10_problem();
Problem problem_by_name(std::string_view name);

/// Training inputs of one strategy. For the Gaussian grid `size` must be a
/// perfect n-th power.
RowMatrix training_inputs(const Problem& problem, Strategy strategy, std::size_t size, std::uint64_t seed);

struct Architecture {
  Method method = Method::dapcnn;
  std::vector<LayerSpec> layers;

  BasisMode basis_mode() const;
  std::size_t weight_count(int n_inputs) const;
};

struct SizeArchitectures {
  std::size_t size = 0;
  std::vector<Architecture> models;
};

using ArchitectureTable = std::vector<SizeArchitectures>;

/// Architectures of the Ishigami and ON-10 comparison studies.
ArchitectureTable ishigami_architectures();
ArchitectureTable on10_architectures();
ArchitectureTable architectures_for(std::string_view problem);

struct SweepConfig {
  Strategy strategy = Strategy::sobol;
  std::size_t validation_size = 1000;
  std::uint64_t seed = 0;
  /// Studies try four initializations per trained model.
  TrainingConfig training = [] {
    TrainingConfig t;
    t.init_candidates = 4;
    return t;
  }();
  /// Worker threads; 0 selects the hardware concurrency.
  int jobs = 0;
};

struct SweepRow {
  std::size_t size = 0;
  Method method = Method::dapcnn;
  std::size_t training_points = 0;
  std::size_t n_weights = 0;
  double train_mse = std::numeric_limits<double>::quiet_NaN();
  MetricReport metrics{MetricReport::kUndefined, MetricReport::kUndefined, MetricReport::kUndefined,
                       MetricReport::kUndefined, MetricReport::kUndefined, MetricReport::kUndefined};
  int iterations = 0;
  std::string stop_reason;
  /// Error code when training failed; empty otherwise.
  std::string error;
};

/// Trains one model of `arch` on `train` and returns its predictions on `validation_inputs`.
struct ModelRun {
  Eigen::VectorXd train_predictions;
  Eigen::VectorXd validation_predictions;
  int iterations = 0;
  std::string stop_reason;
};
ModelRun train_model(const Architecture& arch, const Dataset& train, const RowMatrix& validation_inputs,
                     const TrainingConfig& training, std::uint64_t seed);

/// One row per (size, model) in table order. Rows are independent, so they
/// are spread over `jobs` threads; results do not depend on the thread count.
std::vector<SweepRow> convergence_sweep(const Problem& problem, const ArchitectureTable& table,
                                        const SweepConfig& config);

}  // namespace dapc
