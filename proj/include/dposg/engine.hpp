#pragma once

#include "dposg/common.hpp"
#include "dposg/config.hpp"
#include "dposg/decentralized.hpp"
#include "dposg/metrics.hpp"
#include "dposg/oadam.hpp"
#include "dposg/osg.hpp"
#include "dposg/planner.hpp"
#include "dposg/problems.hpp"
#include "dposg/rng.hpp"
#include "dposg/topology.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace dposg {

/// A RunConfig with every "auto" field filled in, plus the objects it names.
struct ResolvedRun {
  RunConfig config;
  ProblemPtr problem;
  std::optional<GossipMatrix> gossip;
  MixingSchedule schedule;
  double rho = 0.0;
  std::optional<EtaPlan> eta_plan;
  std::vector<std::string> notes;

  const GossipMatrix& mixing_matrix() const { return *gossip; }
};

namespace detail {

inline bool is_single_machine(Optimizer optimizer) {
  return optimizer == Optimizer::Osg || optimizer == Optimizer::OAdam;
}

inline bool is_centralized(Optimizer optimizer) {
  return optimizer == Optimizer::Cposg || optimizer == Optimizer::CpOAdam;
}

inline std::string default_topology(const RunConfig& c) {
  if (is_single_machine(c.optimizer)) return "identity";
  if (is_centralized(c.optimizer)) return "complete";
  if (c.optimizer == Optimizer::RandDpOAdam) return "random2";
  if (c.optimizer == Optimizer::Gda && c.workers == 1) return "identity";
  return "ring";
}

inline GossipMatrix build_topology(const std::string& topology, int workers) {
  if (topology == "ring") return make_ring(workers);
  if (topology == "complete") return make_complete(workers);
  if (topology == "identity") return make_identity(workers);
  if (topology == "random2") {
    if (workers < 3) throw InvalidArgument("random two-neighbor mixing requires M >= 3");
    // Spectrum and degree of any single draw equal those of the fixed ring.
    return make_ring(workers);
  }
  if (topology.rfind("file:", 0) == 0) {
    const std::string path = topology.substr(5);
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open gossip matrix file '" + path + "'");
    GossipMatrix w = read_text(in);
    if (w.size() != workers)
      throw InvalidArgument("gossip matrix file has M = " + std::to_string(w.size()) + " but workers = " +
                            std::to_string(workers));
    return w;
  }
  throw InvalidArgument("unknown topology '" + topology + "' (expected ring, complete, identity, random2 or file:<path>)");
}

inline Vector initial_point(const RunConfig& c, int dim) {
  if (c.initial_point.empty()) return Vector::Zero(dim);
  if (c.initial_point.size() == 1) return Vector::Constant(dim, c.initial_point.front());
  if (static_cast<int>(c.initial_point.size()) != dim)
    throw InvalidArgument("initial_point has " + std::to_string(c.initial_point.size()) + " values, problem dimension is " +
                          std::to_string(dim));
  return Eigen::Map<const Vector>(c.initial_point.data(), dim);
}

}  // namespace detail

/// Validates `config` and resolves topology, t and eta. Throws InvalidArgument
/// before any iteration would run.
inline ResolvedRun resolve(const RunConfig& config) {
  ResolvedRun r;
  RunConfig& c = r.config;
  c = config;
  require(c.workers >= 1, "workers must be >= 1");
  require(c.iterations >= 0, "iterations must be >= 0");
  require(c.metrics_every >= 1, "metrics_every must be >= 1");
  require(c.tail_fraction > 0.0 && c.tail_fraction <= 1.0, "tail_fraction must lie in (0, 1]");
  require(c.sigma >= 0.0, "sigma must be non-negative");
  if (c.total_batch) {
    require(*c.total_batch >= 1, "total_batch must be >= 1");
    if (*c.total_batch % c.workers != 0)
      throw InvalidArgument("total_batch " + std::to_string(*c.total_batch) + " is not divisible by workers " +
                            std::to_string(c.workers));
    c.minibatch = *c.total_batch / c.workers;
  }
  require(c.minibatch >= 1, "minibatch must be >= 1");
  if (c.eta) require(*c.eta > 0.0, "eta must be positive");
  if (c.rounds) require(*c.rounds >= 1, "rounds must be >= 1");
  if (c.projection_radius) require(*c.projection_radius > 0.0, "projection_radius must be positive");
  if (c.plan_sigma) require(*c.plan_sigma >= 0.0, "plan_sigma must be non-negative");
  if (uses_adam(c.optimizer)) validate(c.adam);

  r.problem = make_problem(c.problem, c.problem_params, c.sigma);
  c.initial_point = [&] {
    const Vector x0 = detail::initial_point(c, r.problem->dim());
    return std::vector<double>(x0.data(), x0.data() + x0.size());
  }();

  if (detail::is_single_machine(c.optimizer) && c.workers != 1)
    throw InvalidArgument(std::string(to_string(c.optimizer)) + " is single-machine and requires workers = 1");
  const std::string wanted = detail::default_topology(c);
  if (c.topology.empty()) c.topology = wanted;
  const bool forced = detail::is_single_machine(c.optimizer) || detail::is_centralized(c.optimizer) ||
                      c.optimizer == Optimizer::RandDpOAdam;
  if (forced && c.topology != wanted)
    throw InvalidArgument(std::string(to_string(c.optimizer)) + " requires topology = " + wanted);
  if (detail::is_centralized(c.optimizer)) {
    if (c.rounds && *c.rounds != 1) throw InvalidArgument(std::string(to_string(c.optimizer)) + " uses t = 1");
    c.rounds = 1;
  }
  r.gossip = detail::build_topology(c.topology, c.workers);
  r.rho = spectral(*r.gossip).rho;

  const auto& constants = r.problem->constants();
  PlannerInput plan{constants.lipschitz, constants.grad_bound, c.plan_sigma.value_or(c.sigma), c.workers,
                    c.minibatch, r.rho, 1};
  if (!c.rounds) {
    c.rounds = r.rho == 0.0 ? 1 : plan_t(plan);
    r.notes.push_back("rounds resolved to " + std::to_string(*c.rounds));
  }
  plan.rounds = *c.rounds;
  if (!c.eta) {
    r.eta_plan = plan_eta(plan);
    c.eta = r.eta_plan->eta;
    r.notes.push_back("eta resolved to " + detail::format_double(*c.eta) + " (binding term " +
                      std::to_string(r.eta_plan->binding + 1) + ")");
    if (!c.projection_radius)
      r.notes.push_back("warning: planned eta assumes iterates stay in the ball of radius D/2 = " +
                        detail::format_double(constants.domain_diameter / 2.0) + " but projection is off");
  }
  r.schedule = c.topology == "random2" ? MixingSchedule::random_sequence(*c.rounds)
                                       : MixingSchedule::fixed_power(*c.rounds);
  return r;
}

struct RunResult {
  ResolvedRun resolved;
  std::vector<RunRecord> records;
  Counters counters;
  Matrix final_x;
  Matrix final_z;
};

using RecordSink = std::function<void(const RunRecord&)>;

namespace detail {

template <class LocalState, class LocalUpdate>
void drive(RunResult& result, std::vector<Worker<LocalState>>& workers, LocalUpdate&& update,
           const RecordSink& sink) {
  const ResolvedRun& r = result.resolved;
  const RunConfig& c = r.config;
  const GossipMatrix& w = r.mixing_matrix();
  Counters& counters = result.counters;
  const int count = static_cast<int>(workers.size());
  Rng topology_rng = make_stream(c.master_seed, streams::kTopology);
  const RoundOptions options{c.projection_radius, c.parallel};

  auto emit = [&](std::int64_t k) {
    result.records.push_back(
        snapshot(k, gather_z(std::span<const Worker<LocalState>>(workers)), *r.problem, counters));
    if (sink) sink(result.records.back());
  };

  if (c.iterations >= 1) {
    counters.busiest_node_messages = count > 1 ? busiest_node_messages(w, r.schedule.rounds) : 0;
    emit(0);
  }
  for (std::int64_t k = 1; k <= c.iterations; ++k) {
    decentralized_round(std::span<Worker<LocalState>>(workers), w, r.schedule, topology_rng, update, options);
    counters.oracle_calls += count;
    if (count > 1) counters.mix_rounds_total += r.schedule.rounds;
    for (const auto& worker : workers)
      if (!worker.state.x.allFinite() || !worker.state.z.allFinite()) throw NumericalAbort(k, worker.id);
    if (k % c.metrics_every == 0) emit(k);
  }
  result.final_x = gather_x(std::span<const Worker<LocalState>>(workers));
  result.final_z = gather_z(std::span<const Worker<LocalState>>(workers));
}

}  // namespace detail

/// Executes the configured optimizer for N iterations. Records are taken at
/// k = 0, metrics_every, 2 metrics_every, ... <= N (none when N = 0).
inline RunResult run(const RunConfig& config, const RecordSink& sink = {}) {
  RunResult result;
  result.resolved = resolve(config);
  const ResolvedRun& r = result.resolved;
  const RunConfig& c = r.config;
  const Vector x0 = Eigen::Map<const Vector>(c.initial_point.data(), static_cast<Eigen::Index>(c.initial_point.size()));
  const Problem& problem = *r.problem;
  const double eta = *c.eta;
  const int minibatch = c.minibatch;

  if (uses_adam(c.optimizer)) {
    auto workers = make_workers<OAdamState>(c.workers, x0, c.master_seed);
    const AdamParams params = c.adam;
    detail::drive(
        result, workers,
        [&](OAdamWorker& worker, const Vector& anchor) {
          oadam_update(worker.state, anchor, problem_sampler(problem, minibatch, worker.rng), eta, params);
        },
        sink);
  } else if (c.optimizer == Optimizer::Gda) {
    auto workers = make_workers<OsgState>(c.workers, x0, c.master_seed);
    detail::drive(
        result, workers,
        [&](WorkerState& worker, const Vector& anchor) {
          gda_update(worker.state, anchor, problem_sampler(problem, minibatch, worker.rng), eta);
        },
        sink);
  } else {
    auto workers = make_workers<OsgState>(c.workers, x0, c.master_seed);
    detail::drive(
        result, workers,
        [&](WorkerState& worker, const Vector& anchor) {
          osg_update(worker.state, anchor, problem_sampler(problem, minibatch, worker.rng), eta);
        },
        sink);
  }
  return result;
}

inline constexpr const char* kRecordCsvHeader =
    "iter,grad_norm_sq_at_avg,lambda_consensus,mu_disagreement,avg_param_norm,oracle_calls,mix_rounds";

inline void write_csv_row(std::ostream& out, const RunRecord& r) {
  char buffer[256];
  std::snprintf(buffer, sizeof buffer, "%lld,%.17g,%.17g,%.17g,%.17g,%lld,%lld\n", static_cast<long long>(r.iter),
                r.grad_norm_sq_at_avg, r.lambda_consensus, r.mu_disagreement, r.avg_param_norm,
                static_cast<long long>(r.oracle_calls), static_cast<long long>(r.mix_rounds));
  out << buffer;
}

inline std::string records_csv(std::span<const RunRecord> records) {
  std::ostringstream out;
  out << kRecordCsvHeader << '\n';
  for (const auto& record : records) write_csv_row(out, record);
  return out.str();
}

/// 64-bit FNV-1a, hex encoded.
inline std::string config_hash(const RunConfig& config) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : format_config(config)) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(hash));
  return buffer;
}

inline nlohmann::json to_json(const MetricSummary& s) {
  return {{"grad_norm_sq_at_avg", s.grad_norm_sq_at_avg},
          {"lambda_consensus", s.lambda_consensus},
          {"mu_disagreement", s.mu_disagreement},
          {"avg_param_norm", s.avg_param_norm},
          {"records", s.count}};
}

inline nlohmann::json to_json(const Counters& c) {
  return {{"oracle_calls", c.oracle_calls},
          {"metrics_oracle_calls", c.metrics_oracle_calls},
          {"mix_rounds_total", c.mix_rounds_total},
          {"busiest_node_messages", c.busiest_node_messages}};
}

/// {config_hash, ergodic_means, tail_means, counters}; means are null for an
/// empty record stream.
inline nlohmann::json summary_json(const RunResult& result) {
  nlohmann::json out;
  out["config_hash"] = config_hash(result.resolved.config);
  if (result.records.empty()) {
    out["ergodic_means"] = nullptr;
    out["tail_means"] = nullptr;
  } else {
    out["ergodic_means"] = to_json(ergodic_mean(result.records));
    out["tail_means"] = to_json(window_mean(result.records, result.resolved.config.tail_fraction));
  }
  out["counters"] = to_json(result.counters);
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  out << text;
}

/// Writes records.csv, resolved.cfg and summary.json under `out_dir`.
inline void write_run_outputs(const RunResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir / "records.csv", records_csv(result.records));
  write_text_file(out_dir / "resolved.cfg", format_config(result.resolved.config));
  write_text_file(out_dir / "summary.json", summary_json(result).dump(2) + "\n");
}

enum class SweepAxis { Workers, Minibatch, Rounds, Eta, Sigma, Topology };

inline SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "M" || name == "workers") return SweepAxis::Workers;
  if (name == "m" || name == "minibatch") return SweepAxis::Minibatch;
  if (name == "t" || name == "rounds") return SweepAxis::Rounds;
  if (name == "eta") return SweepAxis::Eta;
  if (name == "sigma") return SweepAxis::Sigma;
  if (name == "topology") return SweepAxis::Topology;
  throw InvalidArgument("axis '" + name + "' is not sweepable (expected M, m, t, eta, sigma or topology)");
}

inline const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Workers: return "M";
    case SweepAxis::Minibatch: return "m";
    case SweepAxis::Rounds: return "t";
    case SweepAxis::Eta: return "eta";
    case SweepAxis::Sigma: return "sigma";
    case SweepAxis::Topology: return "topology";
  }
  return "M";
}

struct SweepRow {
  std::string value;
  RunConfig resolved;
  MetricSummary tail;
  MetricSummary ergodic;
  Counters counters;
};

inline void apply_sweep_value(RunConfig& config, SweepAxis axis, const std::string& value) {
  switch (axis) {
    case SweepAxis::Workers: set_config_value(config, "workers", value); break;
    case SweepAxis::Minibatch: set_config_value(config, "minibatch", value); break;
    case SweepAxis::Rounds: set_config_value(config, "rounds", value); break;
    case SweepAxis::Eta: set_config_value(config, "eta", value); break;
    case SweepAxis::Sigma: set_config_value(config, "sigma", value); break;
    case SweepAxis::Topology: set_config_value(config, "topology", value); break;
  }
}

inline constexpr const char* kSweepCsvHeader =
    "axis,value,seed,workers,minibatch,rounds,eta,tail_grad_norm_sq_at_avg,tail_lambda_consensus,"
    "tail_mu_disagreement,tail_avg_param_norm,ergodic_grad_norm_sq_at_avg,oracle_calls,mix_rounds";

inline std::string sweep_csv(SweepAxis axis, std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << kSweepCsvHeader << '\n';
  for (const auto& row : rows) {
    const auto& c = row.resolved;
    char buffer[512];
    std::snprintf(buffer, sizeof buffer, "%s,%s,%llu,%d,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%lld,%lld\n",
                  to_string(axis), row.value.c_str(), static_cast<unsigned long long>(c.master_seed), c.workers,
                  c.minibatch, c.rounds.value_or(0), c.eta.value_or(0.0), row.tail.grad_norm_sq_at_avg,
                  row.tail.lambda_consensus, row.tail.mu_disagreement, row.tail.avg_param_norm,
                  row.ergodic.grad_norm_sq_at_avg, static_cast<long long>(row.counters.oracle_calls),
                  static_cast<long long>(row.counters.mix_rounds_total));
    out << buffer;
  }
  return out.str();
}

/// Runs `base` once per value, with master_seed + index as the seed, and
/// summarizes the tail window (tail_fraction) of each run. When `out_dir` is
/// given, run i is written to out_dir/run_<i>/ and the table to sweep.csv.
inline std::vector<SweepRow> sweep(const RunConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                                   const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
  require(!values.empty(), "sweep needs at least one value");
  require(base.iterations >= 1, "sweep needs iterations >= 1");
  std::vector<RunConfig> configs;
  for (std::size_t i = 0; i < values.size(); ++i) {
    RunConfig config = base;
    apply_sweep_value(config, axis, values[i]);
    config.master_seed = base.master_seed + i;
    resolve(config);  // reject every bad value before the first run starts
    configs.push_back(std::move(config));
  }
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const RunResult result = run(configs[i]);
    rows.push_back(SweepRow{values[i], result.resolved.config,
                            window_mean(result.records, result.resolved.config.tail_fraction),
                            ergodic_mean(result.records), result.counters});
    if (out_dir) write_run_outputs(result, *out_dir / ("run_" + std::to_string(i)));
  }
  if (out_dir) write_text_file(*out_dir / "sweep.csv", sweep_csv(axis, rows));
  return rows;
}

}  // namespace dposg
