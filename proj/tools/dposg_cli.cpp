// Command-line front end: run and sweep experiments, inspect gossip
// topologies, evaluate the step-size planner and emit plot bundles.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 numerical abort.

#include "dposg/dposg.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string fmt6(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.6g", value);
  return buffer;
}

dposg::RunConfig load_with_env(const std::string& path) {
  dposg::RunConfig config = dposg::load_config(path);
  if (const char* seed = std::getenv("DPOSG_SEED"); seed != nullptr && *seed != '\0')
    dposg::set_config_value(config, "master_seed", seed);
  return config;
}

void print_resolved(const dposg::ResolvedRun& r) {
  const auto& c = r.config;
  std::cout << "optimizer: " << dposg::to_string(c.optimizer) << '\n'
            << "problem: " << c.problem << '\n'
            << "topology: " << c.topology << " (M = " << c.workers << ", rho = " << fmt6(r.rho) << ")\n"
            << "minibatch: " << c.minibatch << " (total batch " << c.minibatch * c.workers << ")\n"
            << "rounds: " << *c.rounds << '\n'
            << "eta: " << fmt6(*c.eta) << '\n'
            << "iterations: " << c.iterations << '\n'
            << "master_seed: " << c.master_seed << '\n';
  for (const auto& note : r.notes) std::cout << "note: " << note << '\n';
}

int cmd_run(const std::string& config_path, const std::string& out_dir, bool describe_only) {
  const dposg::RunConfig config = load_with_env(config_path);
  if (describe_only) {
    const dposg::ResolvedRun resolved = dposg::resolve(config);
    std::cout << dposg::describe(*resolved.problem);
    return 0;
  }
  const dposg::RunResult result = dposg::run(config);
  print_resolved(result.resolved);
  dposg::write_run_outputs(result, out_dir);
  std::cout << "records: " << result.records.size() << '\n';
  if (!result.records.empty()) {
    const auto tail = dposg::window_mean(result.records, result.resolved.config.tail_fraction);
    std::cout << "final grad_norm_sq_at_avg: " << fmt6(result.records.back().grad_norm_sq_at_avg) << '\n'
              << "tail grad_norm_sq_at_avg: " << fmt6(tail.grad_norm_sq_at_avg) << '\n'
              << "tail lambda_consensus: " << fmt6(tail.lambda_consensus) << '\n';
  }
  std::cout << "oracle_calls: " << result.counters.oracle_calls << '\n'
            << "mix_rounds: " << result.counters.mix_rounds_total << '\n'
            << "busiest_node_messages per iteration: " << result.counters.busiest_node_messages << '\n'
            << "wrote: " << (std::filesystem::path(out_dir) / "records.csv").string() << '\n';
  return 0;
}

std::vector<std::string> split_values(const std::string& text) {
  std::vector<std::string> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto first = item.find_first_not_of(' ');
    const auto last = item.find_last_not_of(' ');
    if (first != std::string::npos) values.push_back(item.substr(first, last - first + 1));
  }
  return values;
}

int cmd_sweep(const std::string& config_path, const std::string& axis_name, const std::string& values_text,
              const std::string& out_dir) {
  const dposg::RunConfig base = load_with_env(config_path);
  const dposg::SweepAxis axis = dposg::parse_sweep_axis(axis_name);
  const auto values = split_values(values_text);
  const auto rows = dposg::sweep(base, axis, values, std::filesystem::path(out_dir));
  std::cout << "axis: " << dposg::to_string(axis) << '\n';
  std::cout << "value  seed  tail_grad_norm_sq_at_avg  tail_lambda_consensus\n";
  for (const auto& row : rows) {
    std::cout << row.value << "  " << row.resolved.master_seed << "  " << fmt6(row.tail.grad_norm_sq_at_avg) << "  "
              << fmt6(row.tail.lambda_consensus) << '\n';
  }
  std::cout << "wrote: " << (std::filesystem::path(out_dir) / "sweep.csv").string() << '\n';
  return 0;
}

int cmd_topology(const std::string& kind, int workers, std::optional<int> rounds, std::uint64_t seed,
                 const std::string& save_path) {
  dposg::Rng rng = dposg::make_stream(seed, dposg::streams::kTopology);
  dposg::GossipMatrix w = [&] {
    if (kind == "ring") return dposg::make_ring(workers);
    if (kind == "complete") return dposg::make_complete(workers);
    if (kind == "random2") return dposg::sample_random_two_neighbor(workers, rng);
    throw dposg::InvalidArgument("unknown topology kind '" + kind + "' (expected ring, complete or random2)");
  }();
  const dposg::SpectralInfo info = dposg::spectral(w);
  std::cout << "topology: " << kind << '\n' << "M: " << workers << '\n';
  if (workers <= 12) {
    std::cout << "matrix:\n";
    for (int i = 0; i < workers; ++i) {
      std::cout << ' ';
      for (int j = 0; j < workers; ++j) std::cout << ' ' << fmt6(w(i, j));
      std::cout << '\n';
    }
  } else {
    std::cout << "matrix: " << workers << "x" << workers << ", max degree " << w.max_degree() << '\n';
  }
  std::cout << "eigenvalues:";
  for (double lambda : info.eigenvalues) std::cout << ' ' << fmt6(std::abs(lambda) < 1e-15 ? 0.0 : lambda);
  std::cout << '\n' << "rho: " << fmt6(info.rho) << '\n';
  if (rounds) {
    const double distance = dposg::consensus_distance(w, *rounds);
    const double bound = std::pow(info.rho, *rounds);
    std::cout << "t: " << *rounds << '\n'
              << "max_i ||1/M - W^t e_i||: " << fmt6(distance) << '\n'
              << "rho^t: " << fmt6(bound) << '\n'
              << "bound gap (rho^t - distance): " << fmt6(bound - distance) << '\n';
  }
  if (!save_path.empty()) {
    std::ofstream out(save_path);
    if (!out) throw dposg::InvalidArgument("cannot write '" + save_path + "'");
    dposg::write_text(out, w);
    std::cout << "wrote: " << save_path << '\n';
  }
  return 0;
}

int cmd_plan(double l, double g, double sigma, int workers, int minibatch, double rho, const std::string& rounds_text) {
  dposg::PlannerInput input{l, g, sigma, workers, minibatch, rho, 1};
  if (rounds_text == "auto") {
    input.rounds = dposg::plan_t(input);
  } else {
    dposg::RunConfig scratch;
    dposg::set_config_value(scratch, "rounds", rounds_text);
    input.rounds = *scratch.rounds;
  }
  const dposg::EtaPlan plan = dposg::plan_eta(input);
  std::cout << "eta terms:\n"
            << "  [1] 1/(6 sqrt2 L)                      = " << fmt6(plan.terms[0]) << '\n'
            << "  [2] (1 - rho^t)/(sqrt(32 c M) L)       = " << fmt6(plan.terms[1]) << '\n'
            << "  [3] sqrt(1 - rho^2t)/(4 m^1/4 M^3/4 L) = " << fmt6(plan.terms[2]) << '\n'
            << "c: " << dposg::kStepSizeConstant << '\n'
            << "t: " << input.rounds << (rounds_text == "auto" ? " (planned)" : "") << '\n'
            << "eta: " << fmt6(plan.eta) << '\n'
            << "binding term: " << plan.binding + 1 << '\n';
  return 0;
}

int cmd_plot(const std::vector<std::string>& csvs, const std::string& out_dir) {
  std::vector<std::filesystem::path> paths(csvs.begin(), csvs.end());
  dposg::write_plot_bundle(paths, out_dir);
  std::cout << "series: " << paths.size() << '\n'
            << "wrote: " << (std::filesystem::path(out_dir) / "plot_data.json").string() << '\n'
            << "wrote: " << (std::filesystem::path(out_dir) / "plot_convergence.py").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized optimistic stochastic gradient simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";

  auto* run = app.add_subcommand("run", "Run one experiment from a config file");
  bool describe_only = false;
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--describe", describe_only, "Print the problem's constants and exit");

  auto* sweep = app.add_subcommand("sweep", "Run a config over a list of values of one parameter");
  std::string axis;
  std::string values;
  sweep->add_option("config", config_path, "Config file")->required();
  sweep->add_option("--axis", axis, "M, m, t, eta, sigma or topology")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--out", out_dir, "Output directory");

  auto* topology = app.add_subcommand("topology", "Inspect a gossip matrix");
  std::string kind;
  int workers = 0;
  std::optional<int> rounds;
  std::uint64_t seed = 0;
  std::string save_path;
  topology->add_option("kind", kind, "ring, complete or random2")->required();
  topology->add_option("--M", workers, "Number of nodes")->required();
  topology->add_option("--t", rounds, "Rounds for the consensus-distance check");
  topology->add_option("--seed", seed, "Seed for random2");
  topology->add_option("--save", save_path, "Write the matrix in the plain-text format");

  auto* plan = app.add_subcommand("plan", "Evaluate the step-size and rounds planner");
  double l = 0.0, g = 0.0, sigma = 0.0, rho = 0.0;
  int plan_workers = 1, minibatch = 1;
  std::string plan_rounds;
  plan->add_option("--L", l, "Lipschitz constant")->required();
  plan->add_option("--G", g, "Gradient bound")->required();
  plan->add_option("--sigma", sigma, "Noise level")->required();
  plan->add_option("--M", plan_workers, "Workers")->required();
  plan->add_option("--m", minibatch, "Minibatch per worker")->required();
  plan->add_option("--rho", rho, "Spectral gap")->required();
  plan->add_option("--t", plan_rounds, "Rounds or 'auto'")->required();

  auto* plot = app.add_subcommand("plot", "Emit plot data and a plotting script for run CSVs");
  std::vector<std::string> csvs;
  plot->add_option("csv", csvs, "Run CSV files")->required();
  plot->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, out_dir, describe_only);
    if (*sweep) return cmd_sweep(config_path, axis, values, out_dir);
    if (*topology) return cmd_topology(kind, workers, rounds, seed, save_path);
    if (*plan) return cmd_plan(l, g, sigma, plan_workers, minibatch, rho, plan_rounds);
    if (*plot) return cmd_plot(csvs, out_dir);
  } catch (const dposg::NumericalAbort& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
