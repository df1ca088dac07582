// Command-line front end: data generation, training, evaluation,
// sensitivity reports and convergence sweeps.

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dapc/apc_expansion.hpp"
#include "dapc/benchmarks.hpp"
#include "dapc/error.hpp"
#include "dapc/io.hpp"
#include "dapc/network.hpp"
#include "dapc/random.hpp"
#include "dapc/sampling.hpp"
#include "dapc/trainer.hpp"

namespace {

using namespace dapc;

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_argument, std::string("bad ") + what + " entry '" + item + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::invalid_argument, std::string("empty ") + what + " list");
  return out;
}

std::vector<std::string> parse_word_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

struct TrainOptions {
  int max_iterations = 500;
  double damping = 1e-3;
  double grad_tol = 1e-10;
  double loss_tol = 1e-12;
  double msw_multiplier = 1.0;
  bool no_bias_regularization = false;
  bool frozen_basis_gradient = false;
  bool no_invariant_projection = false;
  bool refresh_after_accept = false;
  int init_candidates = 1;
  int probe_iterations = 30;

  TrainingConfig config(std::uint64_t seed) const {
    TrainingConfig c;
    c.max_iterations = max_iterations;
    c.damping_init = damping;
    c.grad_tol = grad_tol;
    c.loss_tol = loss_tol;
    c.msw_multiplier = msw_multiplier;
    c.regularization_on_bias = !no_bias_regularization;
    c.basis_aware_gradient = !frozen_basis_gradient;
    c.project_invariant_directions = !no_invariant_projection;
    c.refresh_trial_bases = !refresh_after_accept;
    c.init_candidates = init_candidates;
    c.probe_iterations = probe_iterations;
    c.seed = seed;
    return c;
  }

  std::string describe() const {
    std::ostringstream s;
    s << "max_iter=" << max_iterations << " damping=" << format_double(damping)
      << " grad_tol=" << format_double(grad_tol) << " loss_tol=" << format_double(loss_tol)
      << " msw=" << format_double(msw_multiplier) << " bias_reg=" << (no_bias_regularization ? 0 : 1)
      << " basis_aware=" << (frozen_basis_gradient ? 0 : 1) << " projection=" << (no_invariant_projection ? 0 : 1)
      << " trial_refresh=" << (refresh_after_accept ? 0 : 1) << " init_candidates=" << init_candidates
      << " probe_iter=" << probe_iterations;
    return s.str();
  }
};

void add_train_options(CLI::App* cmd, TrainOptions& o) {
  cmd->add_option("--max-iter", o.max_iterations, "Levenberg-Marquardt iteration cap");
  cmd->add_option("--damping", o.damping, "Initial damping");
  cmd->add_option("--grad-tol", o.grad_tol, "Gradient infinity-norm tolerance");
  cmd->add_option("--loss-tol", o.loss_tol, "Relative loss decrease tolerance over 5 iterations");
  cmd->add_option("--msw-multiplier", o.msw_multiplier, "Weight of the mean-square-weights term");
  cmd->add_flag("--no-bias-regularization", o.no_bias_regularization, "Leave biases out of the weight penalty");
  cmd->add_flag("--frozen-basis-gradient", o.frozen_basis_gradient,
                "Differentiate with the hidden-layer bases held fixed");
  cmd->add_flag("--no-invariant-projection", o.no_invariant_projection,
                "Do not remove the scale and bias directions of hidden nodes from the step");
  cmd->add_flag("--refresh-after-accept", o.refresh_after_accept,
                "Evaluate trial steps on the incumbent bases and refresh only after acceptance");
  cmd->add_option("--init-candidates", o.init_candidates,
                  "Initializations to probe; training continues from the lowest probe loss");
  cmd->add_option("--probe-iterations", o.probe_iterations, "Iterations of each probe run");
}

std::string metric_line(const MetricReport& m) {
  return "mse=" + format_double(m.mse) + " rel_mean_err=" + format_double(m.rel_mean_err) +
         " rel_std_err=" + format_double(m.rel_std_err);
}

int run(int argc, char** argv) {
  CLI::App app{"Deep arbitrary polynomial chaos networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  // gen-data
  std::string gd_problem = "ishigami";
  std::string gd_strategy = "sobol";
  std::size_t gd_size = 100;
  std::uint64_t gd_seed = 0;
  std::size_t gd_skip = 1;
  std::string gd_out;
  auto* gen = app.add_subcommand("gen-data", "Sample a benchmark problem into a CSV dataset");
  gen->add_option("--problem", gd_problem, "ishigami or on10");
  gen->add_option("--strategy", gd_strategy, "sobol, gaussian-grid or monte-carlo");
  gen->add_option("--size", gd_size, "Number of points (a perfect n-th power for gaussian-grid)");
  gen->add_option("--seed", gd_seed, "Seed for monte-carlo sampling");
  gen->add_option("--skip", gd_skip, "Leading Sobol points to drop");
  gen->add_option("--out", gd_out, "Output CSV")->required();

  // train
  std::string tr_data, tr_arch, tr_out, tr_history;
  std::string tr_layers, tr_degrees, tr_activation = "normalized", tr_mode = "adaptive", tr_method = "lm";
  std::uint64_t tr_seed = 0;
  TrainOptions tr_opts;
  auto* train = app.add_subcommand("train", "Train a network on a CSV dataset");
  train->add_option("--data", tr_data, "Training CSV")->required();
  train->add_option("--arch", tr_arch, "Architecture JSON file");
  train->add_option("--layers", tr_layers, "Nodes per layer, e.g. 3,1");
  train->add_option("--degree", tr_degrees, "Degree per layer, e.g. 2,2 (one value applies to all)");
  train->add_option("--activation", tr_activation, "identity, sigmoid, tanh, relu or normalized");
  train->add_option("--mode", tr_mode, "adaptive or fixed-gaussian-monomial");
  train->add_option("--method", tr_method, "lm, or lsq for single-layer least squares");
  train->add_option("--seed", tr_seed, "Weight initialization seed");
  train->add_option("--out", tr_out, "Model JSON output")->required();
  train->add_option("--history", tr_history, "Iteration history CSV");
  add_train_options(train, tr_opts);

  // eval
  std::string ev_model, ev_data, ev_out;
  auto* eval = app.add_subcommand("eval", "Predict a dataset and report validation metrics");
  eval->add_option("--model", ev_model, "Model JSON")->required();
  eval->add_option("--data", ev_data, "CSV with inputs and reference responses")->required();
  eval->add_option("--out", ev_out, "Predictions CSV");

  // sobol
  std::string so_model, so_out;
  int so_layer = 0;
  int so_node = 1;
  auto* sobol = app.add_subcommand("sobol", "Sensitivity indices of one node");
  sobol->add_option("--model", so_model, "Model JSON")->required();
  sobol->add_option("--layer", so_layer, "Layer (1-based, default last)");
  sobol->add_option("--node", so_node, "Node (1-based)");
  sobol->add_option("--out", so_out, "Output CSV")->required();

  // sweep
  std::string sw_problem = "ishigami", sw_strategy = "sobol", sw_sizes, sw_methods = "apc,dann,dapcnn", sw_out;
  std::size_t sw_validation = 1000;
  std::uint64_t sw_seed = 0;
  int sw_jobs = 0;
  TrainOptions sw_opts;
  sw_opts.init_candidates = SweepConfig{}.training.init_candidates;
  auto* sweep = app.add_subcommand("sweep", "Convergence study over training-set sizes");
  sweep->add_option("--problem", sw_problem, "ishigami or on10");
  sweep->add_option("--strategy", sw_strategy, "sobol, gaussian-grid or monte-carlo");
  sweep->add_option("--sizes", sw_sizes, "Subset of the table's sizes, e.g. 10,100");
  sweep->add_option("--methods", sw_methods, "Subset of apc,dann,dapcnn");
  sweep->add_option("--validation-size", sw_validation, "Monte Carlo validation points");
  sweep->add_option("--seed", sw_seed, "Sweep seed");
  sweep->add_option("--jobs", sw_jobs, "Worker threads (0: all cores)");
  sweep->add_option("--out", sw_out, "Output CSV")->required();
  add_train_options(sweep, sw_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error code=invalid-argument message=\"" << e.what() << "\"\n";
    return 2;
  }

  if (*gen) {
    const Problem problem = problem_by_name(gd_problem);
    const Strategy strategy = parse_strategy(gd_strategy);
    Dataset data;
    if (strategy == Strategy::sobol) {
      data.inputs = map_to_marginals(sobol_points(problem.n_inputs, gd_size, gd_skip), problem.marginals);
    } else {
      data.inputs = training_inputs(problem, strategy, gd_size, gd_seed);
    }
    data.responses = problem.evaluate(data.inputs);
    const std::string cfg = "gen-data problem=" + gd_problem + " strategy=" + gd_strategy +
                            " size=" + std::to_string(gd_size) + " seed=" + std::to_string(gd_seed) +
                            " skip=" + std::to_string(gd_skip);
    save_dataset(gd_out, data, provenance_comments(cfg));
    std::cout << "wrote " << data.size() << " points to " << gd_out << "\n";
    return 0;
  }

  if (*train) {
    const Dataset data = load_dataset(tr_data);
    ArchitectureFile arch;
    if (!tr_arch.empty()) {
      arch = load_architecture(tr_arch);
    } else {
      if (tr_layers.empty()) throw Error(ErrorCode::invalid_argument, "give --arch or --layers");
      const auto nodes = parse_int_list(tr_layers, "--layers");
      auto degrees = tr_degrees.empty() ? std::vector<int>{1} : parse_int_list(tr_degrees, "--degree");
      if (degrees.size() == 1) degrees.assign(nodes.size(), degrees[0]);
      if (degrees.size() != nodes.size()) {
        throw Error(ErrorCode::invalid_argument, "--degree needs one value or one per layer");
      }
      arch.basis_mode = parse_basis_mode(tr_mode);
      const Activation act = parse_activation(tr_activation);
      for (std::size_t i = 0; i < nodes.size(); ++i) arch.layers.push_back({nodes[i], degrees[i], act});
    }
    NetworkState initial = build_network(static_cast<int>(data.inputs.cols()), arch.layers, tr_seed,
                                         arch.basis_mode);
    const std::string cfg = "train arch=" + architecture_to_json(arch) + " method=" + tr_method +
                            " seed=" + std::to_string(tr_seed) + " " + tr_opts.describe();
    ModelProvenance prov{tr_seed, config_digest(cfg), 0.0};
    NetworkState trained;
    const TrainingConfig tc = tr_opts.config(tr_seed);
    if (tr_method == "lsq") {
      trained = fit_single_layer(initial, data);
      prov.final_loss = loss(trained, data, tc).total;
      std::cout << "least-squares fit, loss=" << format_double(prov.final_loss) << "\n";
    } else if (tr_method == "lm") {
      tc.validate();
      if (tc.init_candidates > 1) {
        std::vector<NetworkState> starts{initial};
        for (int c = 1; c < tc.init_candidates; ++c) {
          starts.push_back(build_network(initial.n_inputs, arch.layers, mix_seed(tr_seed, static_cast<std::uint64_t>(c)),
                                         arch.basis_mode));
        }
        initial = std::move(starts[select_start(starts, data, tc, tc.probe_iterations)]);
      }
      TrainingResult result = train_lm(initial, data, tc);
      trained = std::move(result.state);
      prov.final_loss = result.loss.total;
      for (const auto& w : result.history.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "stop=" << result.history.stop_reason << " loss=" << format_double(result.loss.total)
                << " mse=" << format_double(result.loss.mse) << " msw=" << format_double(result.loss.msw) << "\n";
      if (!tr_history.empty()) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& r : result.history.records) {
          rows.push_back({std::to_string(r.iteration), format_double(r.loss), format_double(r.mse),
                          format_double(r.msw), format_double(r.damping), r.accepted ? "1" : "0"});
        }
        write_csv(tr_history, {"iteration", "loss", "mse", "msw", "damping", "accepted"}, rows,
                  provenance_comments(cfg));
      }
    } else {
      throw Error(ErrorCode::invalid_argument, "unknown --method '" + tr_method + "'");
    }
    save_model(trained, tr_out, prov);
    return 0;
  }

  if (*eval) {
    const NetworkState state = load_model(ev_model);
    const Dataset data = load_dataset(ev_data);
    const Eigen::VectorXd pred = predict(state, data.inputs);
    const MetricReport m = compute_metrics(pred, data.response(0));
    std::cout << metric_line(m) << "\n";
    if (!ev_out.empty()) {
      std::vector<std::vector<std::string>> rows;
      for (Eigen::Index t = 0; t < pred.size(); ++t) {
        rows.push_back({std::to_string(t + 1), format_double(pred[t]), format_double(data.responses(t, 0))});
      }
      write_csv(ev_out, {"index", "prediction", "reference"}, rows,
                provenance_comments("eval model=" + ev_model + " data=" + ev_data + " " + metric_line(m)));
    }
    return 0;
  }

  if (*sobol) {
    const NetworkState state = load_model(so_model);
    const int layer_no = so_layer == 0 ? static_cast<int>(state.layers.size()) : so_layer;
    if (layer_no < 1 || layer_no > static_cast<int>(state.layers.size())) {
      throw Error(ErrorCode::invalid_argument, "--layer out of range");
    }
    const Layer& layer = state.layers[layer_no - 1];
    if (so_node < 1 || so_node > layer.spec.n_nodes) throw Error(ErrorCode::invalid_argument, "--node out of range");
    const auto w = layer.node_weights(so_node - 1);
    const auto terms = sobol_indices(w, layer.terms);
    const auto agg = aggregate_sobol(terms, layer.n_in);
    const NodeStatistics stats = node_statistics(w);
    std::vector<std::vector<std::string>> rows;
    for (const auto& t : terms) {
      std::string idx;
      for (std::size_t j = 0; j < t.index.size(); ++j) idx += (j ? " " : "") + std::to_string(t.index[j]);
      rows.push_back({"term", idx, format_double(t.value)});
    }
    for (int j = 0; j < layer.n_in; ++j) {
      rows.push_back({"first-order", std::to_string(j + 1), format_double(agg.first_order[j])});
      rows.push_back({"total", std::to_string(j + 1), format_double(agg.total[j])});
    }
    rows.push_back({"mean", "", format_double(stats.mean)});
    rows.push_back({"variance", "", format_double(stats.variance)});
    write_csv(so_out, {"kind", "index", "value"}, rows,
              provenance_comments("sobol model=" + so_model + " layer=" + std::to_string(layer_no) +
                                  " node=" + std::to_string(so_node)));
    return 0;
  }

  if (*sweep) {
    const Problem problem = problem_by_name(sw_problem);
    ArchitectureTable table = architectures_for(sw_problem);
    std::vector<Method> methods;
    for (const auto& m : parse_word_list(sw_methods)) methods.push_back(parse_method(m));
    ArchitectureTable chosen;
    std::vector<int> sizes;
    if (!sw_sizes.empty()) sizes = parse_int_list(sw_sizes, "--sizes");
    for (const auto& entry : table) {
      if (!sizes.empty() && std::find(sizes.begin(), sizes.end(), static_cast<int>(entry.size)) == sizes.end()) {
        continue;
      }
      SizeArchitectures e{entry.size, {}};
      for (const auto& a : entry.models) {
        if (std::find(methods.begin(), methods.end(), a.method) != methods.end()) e.models.push_back(a);
      }
      chosen.push_back(std::move(e));
    }
    if (chosen.empty()) throw Error(ErrorCode::invalid_argument, "no table rows match --sizes");
    SweepConfig sc;
    sc.strategy = parse_strategy(sw_strategy);
    sc.validation_size = sw_validation;
    sc.seed = sw_seed;
    sc.jobs = sw_jobs;
    sc.training = sw_opts.config(sw_seed);
    const auto rows = convergence_sweep(problem, chosen, sc);
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows) {
      cells.push_back({problem.name, std::string(strategy_name(sc.strategy)), std::to_string(r.size),
                       std::string(method_name(r.method)), std::to_string(sw_seed), std::to_string(r.n_weights),
                       std::to_string(r.training_points), format_double(r.train_mse), format_double(r.metrics.mse),
                       format_double(r.metrics.rel_mean_err), format_double(r.metrics.rel_std_err),
                       std::to_string(r.iterations), r.stop_reason, r.error});
    }
    const std::string cfg = "sweep problem=" + sw_problem + " strategy=" + sw_strategy + " sizes=" + sw_sizes +
                            " methods=" + sw_methods + " validation=" + std::to_string(sw_validation) +
                            " seed=" + std::to_string(sw_seed) + " " + sw_opts.describe();
    write_csv(sw_out,
              {"problem", "strategy", "size", "method", "seed", "n_weights", "training_points", "train_mse",
               "val_mse", "rel_mean_err", "rel_std_err", "iterations", "stop_reason", "error"},
              cells, provenance_comments(cfg));
    for (const auto& c : cells) {
      std::cout << c[2] << " " << c[3] << " val_mse=" << c[8] << (c[13].empty() ? "" : " error=" + c[13]) << "\n";
    }
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const dapc::Error& e) {
    std::cerr << "error code=" << e.code_name() << " message=\"" << e.what() << "\"\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error code=internal message=\"" << e.what() << "\"\n";
    return 1;
  }
}
