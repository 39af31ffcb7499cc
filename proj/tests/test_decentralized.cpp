#include "dposg/decentralized.hpp"

#include <gtest/gtest.h>

#include <span>
#include <stdexcept>

namespace dposg {
namespace {

ProblemPtr noisy_quadratic(int dim = 2, double sigma = 1.0) {
  return make_problem("quadratic_saddle", {{"dim", {double(dim)}}, {"c", {2.0}}}, sigma);
}

TEST(Dposg, IdentitySingleWorkerIsBitIdenticalToOsg) {
  const auto problem = noisy_quadratic();
  const Vector x0 = Vector::LinSpaced(4, -1.0, 1.0);
  const double eta = 0.05;
  constexpr std::uint64_t kSeed = 99;

  auto workers = make_workers(1, x0, kSeed);
  const GossipMatrix w = make_identity(1);
  Rng topology_rng = make_stream(kSeed, streams::kTopology);

  OsgState reference = OsgState::from_initial(x0);
  Rng reference_rng = worker_stream(kSeed, 0);
  for (int k = 0; k < 1000; ++k) {
    dposg_iteration(workers, w, MixingSchedule::fixed_power(1), *problem, eta, 3, topology_rng);
    reference = osg_step(reference, *problem, eta, 3, reference_rng);
    ASSERT_EQ(workers[0].state.x, reference.x) << "k=" << k;
    ASSERT_EQ(workers[0].state.z, reference.z) << "k=" << k;
  }
}

TEST(Dposg, FirstIterationFromCommonInitialPoint) {
  const auto problem = noisy_quadratic(2, 0.0);
  const Vector x0 = Vector::Constant(4, 0.5);
  auto workers = make_workers(4, x0, 1);
  Rng topology_rng(0);
  dposg_iteration(workers, make_ring(4), MixingSchedule::fixed_power(2), *problem, 0.1, 1, topology_rng);
  for (const auto& worker : workers) {
    EXPECT_TRUE(worker.state.z.isApprox(x0, 1e-15));
    EXPECT_TRUE(worker.state.x.isApprox(x0 - 0.1 * grad_exact(*problem, x0), 1e-15));
  }
}

TEST(Dposg, FirstIterationFromZeroInit) {
  // X_0 = Z_0 = 0: the anchor is 0, so Z_1 = 0 and X_1 = -eta g(xi, 0) per column.
  const auto problem = noisy_quadratic(2, 1.0);
  auto workers = make_workers(3, Vector::Zero(4), 8);
  Rng topology_rng(0);
  dposg_iteration(workers, make_ring(3), MixingSchedule::fixed_power(1), *problem, 0.1, 2, topology_rng);
  for (const auto& worker : workers) {
    Rng replay = worker_stream(8, worker.id);
    EXPECT_EQ(worker.state.z, Vector::Zero(4));
    EXPECT_EQ(worker.state.x, -0.1 * grad_stochastic(*problem, Vector::Zero(4), 2, replay).value);
  }
}

TEST(Dposg, CompleteGraphKeepsWorkersIdenticalWithoutNoise) {
  const auto problem = noisy_quadratic(3, 0.0);
  Rng init(4);
  auto workers = make_workers(5, Vector::Zero(6), 7);
  for (auto& worker : workers) worker.state.x = sample_ball(6, 1.0, init);
  Rng topology_rng(0);
  const GossipMatrix w = make_complete(5);
  for (int k = 0; k < 50; ++k) {
    dposg_iteration(workers, w, MixingSchedule::fixed_power(1), *problem, 0.1, 1, topology_rng);
    for (const auto& worker : workers) ASSERT_TRUE(worker.state.x.isApprox(workers[0].state.x, 1e-13)) << "k=" << k;
  }
}

TEST(Dposg, MixingPreservesTheColumnMeanOfTheAnchor) {
  const auto problem = noisy_quadratic(2, 1.0);
  auto workers = make_workers(6, Vector::Zero(4), 3);
  Rng init(1);
  for (auto& worker : workers) worker.state.x = sample_ball(4, 1.0, init);
  const GossipMatrix w = make_ring(6);
  Rng topology_rng(0);
  for (int k = 0; k < 20; ++k) {
    const Matrix before = gather_x(std::span<const WorkerState>(workers));
    std::vector<Vector> samples(workers.size());
    decentralized_round(std::span<WorkerState>(workers), w, MixingSchedule::fixed_power(3), topology_rng,
                        [&](WorkerState& worker, const Vector& anchor) {
                          samples[worker.id] = anchor;
                          osg_update(worker.state, anchor, problem_sampler(*problem, 1, worker.rng), 0.05);
                        });
    Vector anchor_mean = Vector::Zero(4);
    for (const auto& a : samples) anchor_mean += a / double(samples.size());
    EXPECT_LE((anchor_mean - before.rowwise().mean()).norm(), 1e-12);
  }
}

TEST(Dposg, OneOracleCallPerWorkerPerIteration) {
  auto counted = std::make_shared<CountingProblem>(noisy_quadratic());
  auto workers = make_workers(8, Vector::Zero(4), 5);
  Rng topology_rng(0);
  constexpr int kIterations = 37;
  for (int k = 0; k < kIterations; ++k)
    dposg_iteration(workers, make_ring(8), MixingSchedule::fixed_power(2), *counted, 0.01, 4, topology_rng);
  EXPECT_EQ(counted->calls(), kIterations * 8);
}

TEST(Dposg, ParallelExecutionMatchesSequential) {
  const auto problem = noisy_quadratic(4, 1.0);
  const Vector x0 = Vector::Constant(8, 0.3);
  auto sequential = make_workers(8, x0, 11);
  auto parallel = make_workers(8, x0, 11);
  Rng rng_a(0);
  Rng rng_b(0);
  const GossipMatrix w = make_ring(8);
  for (int k = 0; k < 100; ++k) {
    dposg_iteration(sequential, w, MixingSchedule::fixed_power(2), *problem, 0.05, 2, rng_a, {std::nullopt, false});
    dposg_iteration(parallel, w, MixingSchedule::fixed_power(2), *problem, 0.05, 2, rng_b, {std::nullopt, true});
  }
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(sequential[i].state.x, parallel[i].state.x);
    EXPECT_EQ(sequential[i].state.z, parallel[i].state.z);
  }
}

TEST(Dposg, WorkerStreamsDoNotDependOnWorkerCount) {
  // Worker i draws the same noise whatever M is.
  const auto problem = noisy_quadratic(2, 1.0);
  auto four = make_workers(4, Vector::Zero(4), 21);
  auto eight = make_workers(8, Vector::Zero(4), 21);
  Rng rng(0);
  dposg_iteration(four, make_identity(4), MixingSchedule::fixed_power(1), *problem, 0.1, 1, rng);
  dposg_iteration(eight, make_identity(8), MixingSchedule::fixed_power(1), *problem, 0.1, 1, rng);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(four[i].state.x, eight[i].state.x);
}

TEST(Dposg, ProjectionKeepsIteratesInTheBall) {
  const auto problem = make_problem("bilinear_saddle", {{"dim", {2}}}, 0.0);
  auto workers = make_workers(4, Vector::Constant(4, 0.9), 1);
  Rng rng(0);
  for (int k = 0; k < 50; ++k) {
    decentralized_round(
        std::span<WorkerState>(workers), make_ring(4), MixingSchedule::fixed_power(1), rng,
        [&](WorkerState& worker, const Vector& anchor) {
          gda_update(worker.state, anchor, problem_sampler(*problem, 1, worker.rng), 0.5);
        },
        {1.0, false});
    for (const auto& worker : workers) ASSERT_LE(worker.state.x.norm(), 1.0 + 1e-12);
  }
}

TEST(Dposg, RejectsMismatchedSizes) {
  const auto problem = noisy_quadratic();
  auto workers = make_workers(3, Vector::Zero(4), 1);
  Rng rng(0);
  EXPECT_THROW(dposg_iteration(workers, make_ring(4), MixingSchedule::fixed_power(1), *problem, 0.1, 1, rng),
               InvalidArgument);
  auto wrong_dim = make_workers(4, Vector::Zero(3), 1);
  EXPECT_THROW(dposg_iteration(wrong_dim, make_ring(4), MixingSchedule::fixed_power(1), *problem, 0.1, 1, rng),
               InvalidArgument);
}

TEST(DecentralizedRound, PropagatesWorkerFailures) {
  auto workers = make_workers(3, Vector::Zero(2), 1);
  Rng rng(0);
  EXPECT_THROW(decentralized_round(std::span<WorkerState>(workers), make_ring(3), MixingSchedule::fixed_power(1), rng,
                                   [](WorkerState& worker, const Vector&) {
                                     if (worker.id == 1) throw std::runtime_error("boom");
                                   }),
               std::runtime_error);
}

}  // namespace
}  // namespace dposg
