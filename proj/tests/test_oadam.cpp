#include "dposg/oadam.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace dposg {
namespace {

TEST(OAdam, IdentityPreconditionerWithZeroBeta1IsOsg) {
  const auto problem = make_problem("quadratic_saddle", {{"dim", {2}}}, 1.0);
  const Vector x0 = Vector::LinSpaced(4, -1.0, 1.0);
  AdamParams params;
  params.beta1 = 0.0;
  params.identity_preconditioner = true;
  OAdamState adam = OAdamState::from_initial(x0);
  OsgState osg = OsgState::from_initial(x0);
  Rng rng_a(5);
  Rng rng_b(5);
  for (int k = 0; k < 300; ++k) {
    adam = oadam_step(adam, *problem, 0.05, 2, params, rng_a);
    osg = osg_step(osg, *problem, 0.05, 2, rng_b);
    ASSERT_EQ(adam.x, osg.x) << "k=" << k;
    ASSERT_EQ(adam.z, osg.z) << "k=" << k;
  }
}

TEST(OAdam, FirstStepIsASignStep) {
  // With bias correction, m_hat = g and v_hat = g^2 after one step, so
  // p = g / (|g| + eps).
  const auto problem = make_problem("quadratic_saddle", {}, 0.0);
  Rng rng(0);
  Vector x0(2);
  x0 << 1.0, -2.0;
  const Vector g = grad_exact(*problem, x0);
  const OAdamState s = oadam_step(OAdamState::from_initial(x0), *problem, 0.1, 1, AdamParams{}, rng);
  const Vector p = g.array() / (g.array().abs() + 1e-8);
  EXPECT_EQ(s.z, x0);
  EXPECT_TRUE(s.x.isApprox(x0 - 0.1 * p, 1e-15));
  EXPECT_EQ(s.step, 1);
}

TEST(OAdam, ConvergesOnStronglyMonotoneQuadratic) {
  const auto problem = make_problem("quadratic_saddle", {{"dim", {2}}}, 0.0);
  Rng rng(0);
  OAdamState s = OAdamState::from_initial(Vector::Constant(4, 1.0));
  for (int k = 0; k < 2000; ++k) s = oadam_step(s, *problem, 1e-2, 1, AdamParams{}, rng);
  EXPECT_LT(s.x.norm(), 1e-2);
}

TEST(OAdam, RejectsInvalidHyperparameters) {
  const auto problem = make_problem("quadratic_saddle", {}, 0.0);
  Rng rng(0);
  AdamParams bad;
  bad.beta2 = 1.0;
  EXPECT_THROW(oadam_step(OAdamState::from_initial(Vector::Zero(2)), *problem, 0.1, 1, bad, rng), InvalidArgument);
}

TEST(DpOAdam, CompleteGraphWithoutNoiseMatchesSingleMachine) {
  const auto problem = make_problem("quadratic_saddle", {{"dim", {2}}}, 0.0);
  const Vector x0 = Vector::Constant(4, 0.7);
  auto workers = make_workers<OAdamState>(4, x0, 3);
  OAdamState single = OAdamState::from_initial(x0);
  Rng topology_rng(0);
  Rng rng(0);
  for (int k = 0; k < 100; ++k) {
    dp_oadam_iteration(workers, make_complete(4), MixingSchedule::fixed_power(1), *problem, 0.01, 1, AdamParams{},
                       topology_rng);
    single = oadam_step(single, *problem, 0.01, 1, AdamParams{}, rng);
  }
  for (const auto& worker : workers) EXPECT_TRUE(worker.state.x.isApprox(single.x, 1e-12));
}

TEST(DpOAdam, KeepsPerWorkerMoments) {
  const auto problem = make_problem("quadratic_saddle", {{"dim", {2}}}, 1.0);
  auto workers = make_workers<OAdamState>(3, Vector::Zero(4), 3);
  Rng topology_rng(0);
  for (int k = 0; k < 5; ++k)
    dp_oadam_iteration(workers, make_ring(3), MixingSchedule::fixed_power(1), *problem, 0.01, 1, AdamParams{},
                       topology_rng);
  EXPECT_NE(workers[0].state.second_moment, workers[1].state.second_moment);
  for (const auto& worker : workers) EXPECT_EQ(worker.state.step, 5);
}

TEST(DpOAdam, RandomSequenceConsumesTheTopologyStream) {
  const auto problem = make_problem("quadratic_saddle", {{"dim", {2}}}, 1.0);
  auto a = make_workers<OAdamState>(5, Vector::Constant(4, 1.0), 3);
  auto b = make_workers<OAdamState>(5, Vector::Constant(4, 1.0), 3);
  Rng rng_a(1);
  Rng rng_b(1);
  for (int k = 0; k < 20; ++k) {
    dp_oadam_iteration(a, make_ring(5), MixingSchedule::random_sequence(2), *problem, 0.01, 1, AdamParams{}, rng_a);
    dp_oadam_iteration(b, make_ring(5), MixingSchedule::random_sequence(2), *problem, 0.01, 1, AdamParams{}, rng_b);
  }
  for (int i = 0; i < 5; ++i) EXPECT_EQ(a[i].state.x, b[i].state.x);
  EXPECT_EQ(rng_a, rng_b);
  EXPECT_NE(rng_a, Rng(1));
}

}  // namespace
}  // namespace dposg
