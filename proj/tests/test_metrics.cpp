#include "dposg/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace dposg {
namespace {

TEST(Snapshot, IdenticalWorkersHaveNoDisagreement) {
  const auto problem = make_problem("quadratic_saddle", {}, 0.0);
  Matrix z(2, 3);
  z.colwise() = Vector::Constant(2, 0.5);
  Counters counters;
  const RunRecord r = snapshot(5, z, *problem, counters);
  EXPECT_EQ(r.iter, 5);
  EXPECT_EQ(r.lambda_consensus, 0.0);
  EXPECT_EQ(r.mu_disagreement, 0.0);
  EXPECT_NEAR(r.avg_param_norm, 0.5 * std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(r.grad_norm_sq_at_avg, grad_exact(*problem, Vector::Constant(2, 0.5)).squaredNorm(), 1e-15);
}

TEST(Snapshot, TwoOppositeWorkers) {
  const auto problem = make_problem("quadratic_saddle", {{"dim", {2}}}, 0.0);
  Matrix z = Matrix::Zero(4, 2);
  z(0, 0) = 1.0;
  z(0, 1) = -1.0;
  Counters counters;
  const RunRecord r = snapshot(0, z, *problem, counters);
  EXPECT_EQ(r.lambda_consensus, 1.0);
  EXPECT_EQ(r.avg_param_norm, 0.0);
}

TEST(Snapshot, BilinearMuAtPlusMinusE1) {
  const auto problem = make_problem("bilinear_saddle", {{"dim", {2}}}, 0.0);
  Matrix z = Matrix::Zero(4, 2);
  z(0, 0) = 1.0;
  z(0, 1) = -1.0;
  Counters counters;
  const RunRecord r = snapshot(0, z, *problem, counters);
  EXPECT_EQ(r.mu_disagreement, 1.0);
  EXPECT_EQ(r.grad_norm_sq_at_avg, 0.0);
}

TEST(Snapshot, UsesASeparateCounter) {
  const auto problem = make_problem("quadratic_saddle", {}, 0.0);
  Counters counters;
  counters.oracle_calls = 40;
  counters.mix_rounds_total = 7;
  const RunRecord r = snapshot(1, Matrix::Zero(2, 4), *problem, counters);
  EXPECT_EQ(counters.oracle_calls, 40);
  EXPECT_EQ(counters.metrics_oracle_calls, 5);
  EXPECT_EQ(r.oracle_calls, 40);
  EXPECT_EQ(r.mix_rounds, 7);
}

TEST(Snapshot, DisagreementIsBoundedByLipschitzTimesConsensusRoot) {
  // Jensen: mu <= (1/M) sum L ||z_i - z_bar|| <= L sqrt(lambda).
  Rng rng(8);
  for (const auto& problem : {make_problem("bilinear_saddle", {{"dim", {3}}, {"matrix", {1, 2, 0, 0, 1, 0, 3, 0, 1}}}, 0.0),
                              make_problem("dirac_gan", {}, 0.0), make_problem("nonmonotone_saddle", {}, 0.0)}) {
    for (int trial = 0; trial < 200; ++trial) {
      Matrix z(problem->dim(), 6);
      for (int i = 0; i < 6; ++i) z.col(i) = sample_ball(problem->dim(), 0.5, rng);
      Counters counters;
      const RunRecord r = snapshot(0, z, *problem, counters);
      EXPECT_LE(r.mu_disagreement, problem->constants().lipschitz * std::sqrt(r.lambda_consensus) * (1 + 1e-12))
          << problem->name();
    }
  }
}

std::vector<RunRecord> ramp(int n) {
  std::vector<RunRecord> records(n);
  for (int i = 0; i < n; ++i) {
    records[i].iter = i;
    records[i].grad_norm_sq_at_avg = i;
    records[i].lambda_consensus = 2.0 * i;
  }
  return records;
}

TEST(WindowMean, LinearRampHalfWindow) {
  const auto records = ramp(10);
  const MetricSummary s = window_mean(records, 0.5);
  EXPECT_EQ(s.grad_norm_sq_at_avg, 7.0);
  EXPECT_EQ(s.lambda_consensus, 14.0);
  EXPECT_EQ(s.count, 5u);
}

TEST(WindowMean, SingleRecordAndConstantStream) {
  const auto one = ramp(1);
  EXPECT_EQ(window_mean(one, 1.0).grad_norm_sq_at_avg, 0.0);
  std::vector<RunRecord> constant(7);
  for (auto& r : constant) r.mu_disagreement = 0.25;
  EXPECT_EQ(window_mean(constant, 0.3).mu_disagreement, 0.25);
  EXPECT_EQ(window_mean(constant, 0.3).count, 3u);
}

TEST(WindowMean, ErgodicMeanUsesEveryRecord) {
  const auto records = ramp(10);
  EXPECT_EQ(ergodic_mean(records).grad_norm_sq_at_avg, 4.5);
}

TEST(WindowMean, Errors) {
  EXPECT_THROW(window_mean({}, 0.5), InvalidArgument);
  const auto records = ramp(3);
  EXPECT_THROW(window_mean(records, 0.0), InvalidArgument);
  EXPECT_THROW(window_mean(records, 1.5), InvalidArgument);
}

}  // namespace
}  // namespace dposg
