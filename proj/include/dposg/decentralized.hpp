#pragma once

#include "dposg/common.hpp"
#include "dposg/osg.hpp"
#include "dposg/problems.hpp"
#include "dposg/rng.hpp"
#include "dposg/topology.hpp"

#include <cstdint>
#include <exception>
#include <optional>
#include <span>
#include <vector>

namespace dposg {

/// One machine: its optimizer state and its private noise stream.
template <class LocalState>
struct Worker {
  int id = 0;
  LocalState state;
  Rng rng;
};

using WorkerState = Worker<OsgState>;

/// Workers 0..M-1 starting at x0 with streams split from `master_seed`.
template <class LocalState = OsgState>
std::vector<Worker<LocalState>> make_workers(int count, const Vector& x0, std::uint64_t master_seed) {
  require(count >= 1, "need at least one worker");
  std::vector<Worker<LocalState>> workers;
  workers.reserve(count);
  for (int i = 0; i < count; ++i)
    workers.push_back(Worker<LocalState>{i, LocalState::from_initial(x0), worker_stream(master_seed, i)});
  return workers;
}

/// d x M matrix whose column i is worker i's x.
template <class LocalState>
Matrix gather_x(std::span<const Worker<LocalState>> workers) {
  require(!workers.empty(), "need at least one worker");
  Matrix x(workers.front().state.x.size(), static_cast<Eigen::Index>(workers.size()));
  for (std::size_t i = 0; i < workers.size(); ++i) {
    require(workers[i].state.x.size() == x.rows(), "workers disagree on the parameter dimension");
    x.col(static_cast<Eigen::Index>(i)) = workers[i].state.x;
  }
  return x;
}

/// d x M matrix whose column i is worker i's z.
template <class LocalState>
Matrix gather_z(std::span<const Worker<LocalState>> workers) {
  require(!workers.empty(), "need at least one worker");
  Matrix z(workers.front().state.z.size(), static_cast<Eigen::Index>(workers.size()));
  for (std::size_t i = 0; i < workers.size(); ++i) z.col(static_cast<Eigen::Index>(i)) = workers[i].state.z;
  return z;
}

struct RoundOptions {
  /// Radius D/2 of the ball each x is projected onto after the update.
  std::optional<double> projection_radius;
  /// Fan per-worker updates out over OpenMP threads when available.
  bool parallel = false;
};

inline void project_onto_ball(Vector& x, double radius) {
  const double norm = x.norm();
  if (norm > radius) x *= radius / norm;
}

/// One synchronous decentralized round. The mixed matrix A = X_{k-1} W^t is
/// computed once; then every worker runs `update(worker, A e_i)`
/// independently. Mixing is a barrier, so sequential and parallel execution
/// give identical states.
template <class LocalState, class LocalUpdate>
void decentralized_round(std::span<Worker<LocalState>> workers, const GossipMatrix& w,
                         const MixingSchedule& schedule, Rng& topology_rng, LocalUpdate&& update,
                         const RoundOptions& options = {}) {
  require(static_cast<int>(workers.size()) == w.size(),
          "worker count " + std::to_string(workers.size()) + " does not match gossip matrix size " +
              std::to_string(w.size()));
  const Matrix mixed = mix(gather_x(std::span<const Worker<LocalState>>(workers)), schedule, w, topology_rng);
  const int count = static_cast<int>(workers.size());
  std::vector<std::exception_ptr> failures(count);
#pragma omp parallel for schedule(static) if (options.parallel)
  for (int i = 0; i < count; ++i) {
    try {
      const Vector anchor = mixed.col(i);
      update(workers[i], anchor);
      if (options.projection_radius) project_onto_ball(workers[i].state.x, *options.projection_radius);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto& failure : failures)
    if (failure) std::rethrow_exception(failure);
}

/// Sampler bound to a problem, a minibatch size and a worker's stream.
inline auto problem_sampler(const Problem& problem, int minibatch, Rng& rng) {
  return [&problem, minibatch, &rng](const Vector& z) { return grad_stochastic(problem, z, minibatch, rng).value; };
}

/// DPOSG iteration k:
///   Z_k = X_{k-1} W^t - eta G(xi_{k-1}, Z_{k-1})
///   X_k = X_{k-1} W^t - eta G(xi_k, Z_k)
/// with one fresh stochastic gradient per worker, reused as next iteration's
/// prediction.
inline void dposg_iteration(std::span<WorkerState> workers, const GossipMatrix& w, const MixingSchedule& schedule,
                            const Problem& problem, double eta, int minibatch, Rng& topology_rng,
                            const RoundOptions& options = {}) {
  require(eta > 0.0, "dposg_iteration requires eta > 0");
  for (const auto& worker : workers)
    require(worker.state.x.size() == problem.dim(), "worker dimension does not match the problem");
  decentralized_round(
      workers, w, schedule, topology_rng,
      [&](WorkerState& worker, const Vector& anchor) {
        osg_update(worker.state, anchor, problem_sampler(problem, minibatch, worker.rng), eta);
      },
      options);
}

}  // namespace dposg
