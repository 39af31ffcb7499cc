#pragma once

#include "dposg/common.hpp"
#include "dposg/problems.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>

namespace dposg {

struct Counters {
  /// Stochastic oracle calls made by the optimizer.
  std::int64_t oracle_calls = 0;
  /// Exact operator evaluations made by metrics; kept apart from the above.
  std::int64_t metrics_oracle_calls = 0;
  std::int64_t mix_rounds_total = 0;
  /// Messages sent by the busiest node in one iteration.
  std::int64_t busiest_node_messages = 0;

  bool operator==(const Counters&) const = default;
};

/// One row of the run CSV.
struct RunRecord {
  std::int64_t iter = 0;
  double grad_norm_sq_at_avg = 0.0;  // ||g(z_bar_k)||^2
  double lambda_consensus = 0.0;     // (1/M) sum_i ||z_k^i - z_bar_k||^2
  double mu_disagreement = 0.0;      // (1/M) sum_i ||g(z_k^i) - g(z_bar_k)||
  double avg_param_norm = 0.0;       // ||z_bar_k||
  std::int64_t oracle_calls = 0;
  std::int64_t mix_rounds = 0;

  bool operator==(const RunRecord&) const = default;
};

/// Analysis quantities at iteration `iter` for the d x M query-point matrix
/// `z`, using the exact operator. Only `counters.metrics_oracle_calls` is
/// modified.
inline RunRecord snapshot(std::int64_t iter, const Matrix& z, const Problem& problem, Counters& counters) {
  require(z.cols() >= 1, "snapshot needs at least one worker");
  const double workers = static_cast<double>(z.cols());
  const Vector mean = z.rowwise().mean();
  const OperatorValue g_mean = problem.grad_exact(mean);
  RunRecord record;
  record.iter = iter;
  record.grad_norm_sq_at_avg = g_mean.squaredNorm();
  record.avg_param_norm = mean.norm();
  double lambda = 0.0;
  double mu = 0.0;
  for (Eigen::Index i = 0; i < z.cols(); ++i) {
    const Vector zi = z.col(i);
    lambda += (zi - mean).squaredNorm();
    mu += (problem.grad_exact(zi) - g_mean).norm();
  }
  record.lambda_consensus = lambda / workers;
  record.mu_disagreement = mu / workers;
  record.oracle_calls = counters.oracle_calls;
  record.mix_rounds = counters.mix_rounds_total;
  counters.metrics_oracle_calls += z.cols() + 1;
  return record;
}

/// Per-metric means over a window of records.
struct MetricSummary {
  double grad_norm_sq_at_avg = 0.0;
  double lambda_consensus = 0.0;
  double mu_disagreement = 0.0;
  double avg_param_norm = 0.0;
  std::size_t count = 0;
};

/// Mean of each metric over the last ceil(fraction * n) records.
inline MetricSummary window_mean(std::span<const RunRecord> records, double fraction) {
  require(!records.empty(), "window_mean needs at least one record");
  require(fraction > 0.0 && fraction <= 1.0, "window fraction must lie in (0, 1]");
  const auto n = records.size();
  auto count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  count = std::clamp<std::size_t>(count, 1, n);
  MetricSummary summary;
  summary.count = count;
  for (std::size_t i = n - count; i < n; ++i) {
    summary.grad_norm_sq_at_avg += records[i].grad_norm_sq_at_avg;
    summary.lambda_consensus += records[i].lambda_consensus;
    summary.mu_disagreement += records[i].mu_disagreement;
    summary.avg_param_norm += records[i].avg_param_norm;
  }
  const double denom = static_cast<double>(count);
  summary.grad_norm_sq_at_avg /= denom;
  summary.lambda_consensus /= denom;
  summary.mu_disagreement /= denom;
  summary.avg_param_norm /= denom;
  return summary;
}

/// Full-run average, the finite-sample version of the ergodic mean.
inline MetricSummary ergodic_mean(std::span<const RunRecord> records) { return window_mean(records, 1.0); }

}  // namespace dposg
