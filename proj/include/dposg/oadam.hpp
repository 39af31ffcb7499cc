#pragma once

#include "dposg/common.hpp"
#include "dposg/decentralized.hpp"
#include "dposg/problems.hpp"
#include "dposg/rng.hpp"

#include <cmath>
#include <cstdint>
#include <span>

namespace dposg {

struct AdamParams {
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;
  /// Test hook: use the bias-corrected first moment directly (unit
  /// preconditioner). With beta1 = 0 the method is exactly OSG.
  bool identity_preconditioner = false;
};

/// Optimistic Adam: OSG structure with the stochastic gradient replaced by the
/// bias-corrected, second-moment-preconditioned step p_k.
struct OAdamState {
  Vector x;
  Vector z;
  Vector first_moment;
  Vector second_moment;
  Vector p_prev;
  std::int64_t step = 0;

  static OAdamState from_initial(Vector x0) {
    OAdamState state;
    const auto d = x0.size();
    state.first_moment = Vector::Zero(d);
    state.second_moment = Vector::Zero(d);
    state.p_prev = Vector::Zero(d);
    state.z = x0;
    state.x = std::move(x0);
    return state;
  }
};

/// z_k = anchor - eta p_{k-1}; draw g at z_k; update moments; then
/// x_k = anchor - eta p_k. Unrolled, z_{k+1} = anchor' - 2 eta p_k + eta p_{k-1}.
template <class Sampler>
void oadam_update(OAdamState& state, const Vector& anchor, Sampler&& sample, double eta, const AdamParams& params) {
  state.z = anchor - eta * state.p_prev;
  const Vector g = sample(static_cast<const Vector&>(state.z));
  ++state.step;
  const double k = static_cast<double>(state.step);
  state.first_moment = params.beta1 * state.first_moment + (1.0 - params.beta1) * g;
  state.second_moment = params.beta2 * state.second_moment + (1.0 - params.beta2) * g.cwiseProduct(g);
  const Vector m_hat = state.first_moment / (1.0 - std::pow(params.beta1, k));
  Vector p;
  if (params.identity_preconditioner) {
    p = m_hat;
  } else {
    const Vector v_hat = state.second_moment / (1.0 - std::pow(params.beta2, k));
    p = m_hat.array() / (v_hat.array().sqrt() + params.epsilon);
  }
  state.x = anchor - eta * p;
  state.p_prev = std::move(p);
}

inline void validate(const AdamParams& params) {
  require(params.beta1 >= 0.0 && params.beta1 < 1.0, "beta1 must lie in [0, 1)");
  require(params.beta2 >= 0.0 && params.beta2 < 1.0, "beta2 must lie in [0, 1)");
  require(params.epsilon >= 0.0, "adam epsilon must be non-negative");
}

inline OAdamState oadam_step(OAdamState state, const Problem& problem, double eta, int minibatch,
                             const AdamParams& params, Rng& rng) {
  require(eta > 0.0, "oadam_step requires eta > 0");
  validate(params);
  const Vector anchor = state.x;
  oadam_update(state, anchor, problem_sampler(problem, minibatch, rng), eta, params);
  return state;
}

using OAdamWorker = Worker<OAdamState>;

/// Decentralized optimistic Adam: the DPOSG round with oadam_update as the
/// local rule. Each worker keeps its own moments.
inline void dp_oadam_iteration(std::span<OAdamWorker> workers, const GossipMatrix& w, const MixingSchedule& schedule,
                               const Problem& problem, double eta, int minibatch, const AdamParams& params,
                               Rng& topology_rng, const RoundOptions& options = {}) {
  require(eta > 0.0, "dp_oadam_iteration requires eta > 0");
  validate(params);
  decentralized_round(
      workers, w, schedule, topology_rng,
      [&](OAdamWorker& worker, const Vector& anchor) {
        oadam_update(worker.state, anchor, problem_sampler(problem, minibatch, worker.rng), eta, params);
      },
      options);
}

}  // namespace dposg
