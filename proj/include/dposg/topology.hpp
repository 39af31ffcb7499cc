#pragma once

#include "dposg/common.hpp"
#include "dposg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace dposg {

enum class TopologyKind { Ring, Complete, Identity, Custom, RandomTwoNeighbor };

inline const char* to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::Ring: return "ring";
    case TopologyKind::Complete: return "complete";
    case TopologyKind::Identity: return "identity";
    case TopologyKind::Custom: return "custom";
    case TopologyKind::RandomTwoNeighbor: return "random2";
  }
  return "custom";
}

namespace detail {
inline constexpr double kStochasticTol = 1e-12;
inline constexpr double kLeadingEigenTol = 1e-9;
}  // namespace detail

/// Returns the first violated gossip-matrix invariant, or nullopt when
/// `w` is square, entry-wise in [0, 1], symmetric and row-stochastic.
inline std::optional<std::string> find_gossip_violation(const Matrix& w) {
  using detail::kStochasticTol;
  if (w.rows() < 1 || w.rows() != w.cols()) return "matrix must be square with M >= 1";
  if (!w.allFinite()) return "entries must be finite";
  if (w.minCoeff() < -kStochasticTol || w.maxCoeff() > 1.0 + kStochasticTol)
    return "entries must lie in [0, 1]";
  if ((w - w.transpose()).cwiseAbs().maxCoeff() > kStochasticTol) return "matrix must be symmetric";
  const Vector sums = w.rowwise().sum();
  if ((sums.array() - 1.0).abs().maxCoeff() > kStochasticTol) return "row sums must equal 1";
  return std::nullopt;
}

/// Symmetric doubly stochastic M x M mixing matrix. Instances always satisfy
/// the gossip invariants; construction through `from_weights` validates.
class GossipMatrix {
 public:
  static GossipMatrix from_weights(Matrix weights, TopologyKind kind = TopologyKind::Custom) {
    if (auto violation = find_gossip_violation(weights))
      throw InvalidArgument("not a valid gossip matrix: " + *violation);
    return GossipMatrix(std::move(weights), kind);
  }

  int size() const noexcept { return static_cast<int>(weights_.rows()); }
  const Matrix& weights() const noexcept { return weights_; }
  TopologyKind kind() const noexcept { return kind_; }
  double operator()(int i, int j) const { return weights_(i, j); }

  /// Largest number of nonzero off-diagonal entries in any row.
  int max_degree() const noexcept { return max_degree_; }

  /// Nonzero (row, weight) pairs of column j, rows ascending.
  const std::vector<std::pair<int, double>>& column(int j) const { return columns_[j]; }

 private:
  GossipMatrix(Matrix weights, TopologyKind kind) : weights_(std::move(weights)), kind_(kind) {
    const int m = size();
    columns_.resize(m);
    for (int j = 0; j < m; ++j) {
      int degree = 0;
      for (int i = 0; i < m; ++i) {
        if (weights_(i, j) == 0.0) continue;
        columns_[j].emplace_back(i, weights_(i, j));
        if (i != j) ++degree;
      }
      max_degree_ = std::max(max_degree_, degree);
    }
  }

  Matrix weights_;
  TopologyKind kind_;
  std::vector<std::vector<std::pair<int, double>>> columns_;
  int max_degree_ = 0;
};

inline GossipMatrix make_identity(int m) {
  require(m >= 1, "gossip matrix requires M >= 1");
  return GossipMatrix::from_weights(Matrix::Identity(m, m), TopologyKind::Identity);
}

inline GossipMatrix make_complete(int m) {
  require(m >= 1, "gossip matrix requires M >= 1");
  return GossipMatrix::from_weights(Matrix::Constant(m, m, 1.0 / m), TopologyKind::Complete);
}

namespace detail {
// Ring weights over the node order given by `order`: 1/3 on self and on both
// cyclic neighbours. Small rings collapse to the complete graph.
inline Matrix ring_weights(const std::vector<int>& order) {
  const int m = static_cast<int>(order.size());
  if (m <= 2) return Matrix::Constant(m, m, 1.0 / m);
  Matrix w = Matrix::Zero(m, m);
  const double third = 1.0 / 3.0;
  for (int k = 0; k < m; ++k) {
    const int self = order[k];
    w(self, self) = third;
    w(self, order[(k + 1) % m]) = third;
    w(self, order[(k + m - 1) % m]) = third;
  }
  return w;
}
}  // namespace detail

/// Ring where every node averages equally with itself and its two neighbours.
/// M = 2 gives the 1/2 matrix and M = 1 the scalar 1.
inline GossipMatrix make_ring(int m) {
  require(m >= 1, "gossip matrix requires M >= 1");
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  return GossipMatrix::from_weights(detail::ring_weights(order), TopologyKind::Ring);
}

/// One draw of the random two-neighbour scheme: a uniformly random Hamiltonian
/// cycle over the M nodes carrying ring weights.
inline GossipMatrix sample_random_two_neighbor(int m, Rng& rng) {
  if (m < 3) throw InvalidArgument("random two-neighbor mixing requires M >= 3");
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return GossipMatrix::from_weights(detail::ring_weights(order), TopologyKind::RandomTwoNeighbor);
}

struct SpectralInfo {
  std::vector<double> eigenvalues;  // descending
  double rho = 0.0;                 // max(|lambda_2|, |lambda_M|), 0 when M = 1
};

inline SpectralInfo spectral(const GossipMatrix& w) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(w.weights(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw InvalidArgument("not a valid gossip matrix: eigendecomposition failed");
  SpectralInfo info;
  const Vector& ascending = solver.eigenvalues();
  info.eigenvalues.assign(ascending.data(), ascending.data() + ascending.size());
  // Rounding residue of exact zeros, e.g. the complete graph's M - 1 zero eigenvalues.
  for (double& lambda : info.eigenvalues)
    if (std::abs(lambda) < detail::kStochasticTol) lambda = 0.0;
  std::reverse(info.eigenvalues.begin(), info.eigenvalues.end());
  if (std::abs(info.eigenvalues.front() - 1.0) > detail::kLeadingEigenTol)
    throw InvalidArgument("not a valid gossip matrix: leading eigenvalue differs from 1");
  if (info.eigenvalues.size() > 1) {
    info.rho = std::max(std::abs(info.eigenvalues[1]), std::abs(info.eigenvalues.back()));
    info.rho = std::clamp(info.rho, 0.0, 1.0);
  }
  return info;
}

/// How the t communication rounds of one iteration pick their matrices.
struct MixingSchedule {
  enum class Mode { FixedPower, RandomSequence };

  Mode mode = Mode::FixedPower;
  int rounds = 1;

  static MixingSchedule fixed_power(int t) { return make(Mode::FixedPower, t); }
  static MixingSchedule random_sequence(int t) { return make(Mode::RandomSequence, t); }

 private:
  static MixingSchedule make(Mode mode, int t) {
    require(t >= 1, "mixing schedule requires t >= 1");
    return MixingSchedule{mode, t};
  }
};

/// out = x * w, touching only the nonzero weights. Columns of `x` are workers.
inline void mix_once(const Matrix& x, const GossipMatrix& w, Matrix& out) {
  out.resize(x.rows(), x.cols());
  for (int j = 0; j < w.size(); ++j) {
    const auto& col = w.column(j);
    out.col(j) = col.front().second * x.col(col.front().first);
    for (std::size_t k = 1; k < col.size(); ++k) out.col(j) += col[k].second * x.col(col[k].first);
  }
}

/// Applies t communication rounds to the d x M iterate matrix. FixedPower
/// reuses `w` for every round; RandomSequence draws a fresh two-neighbour
/// sample per round from `rng` and ignores `w` beyond its size.
inline Matrix mix(const Matrix& x, const MixingSchedule& schedule, const GossipMatrix& w, Rng& rng) {
  require(x.cols() == w.size(), "mix: iterate matrix has " + std::to_string(x.cols()) +
                                    " columns but the gossip matrix is " +
                                    std::to_string(w.size()) + "x" + std::to_string(w.size()));
  Matrix current = x;
  Matrix next;
  for (int round = 0; round < schedule.rounds; ++round) {
    if (schedule.mode == MixingSchedule::Mode::RandomSequence) {
      mix_once(current, sample_random_two_neighbor(w.size(), rng), next);
    } else {
      mix_once(current, w, next);
    }
    current.swap(next);
  }
  return current;
}

/// max_i || 1/M - W^t e_i ||_2, computed by t successive multiplications.
inline double consensus_distance(const GossipMatrix& w, int t) {
  require(t >= 0, "consensus_distance requires t >= 0");
  const int m = w.size();
  Matrix power = Matrix::Identity(m, m);
  Matrix next;
  for (int round = 0; round < t; ++round) {
    mix_once(power, w, next);
    power.swap(next);
  }
  const Matrix gap = (power.array() - 1.0 / m).matrix();
  return gap.colwise().norm().maxCoeff();
}

/// Smallest t with t >= log_{1/rho}(1 + M sqrt(m M G^2 + sigma^2) / (4 sigma)).
/// A closed gap (rho = 0, e.g. complete averaging) needs a single round.
inline int min_rounds(double rho, int workers, int minibatch, double grad_bound, double sigma) {
  if (!(rho < 1.0)) throw InvalidArgument("spectral gap closed; theory bound undefined");
  require(rho >= 0.0, "min_rounds: rho must be non-negative");
  require(workers >= 1 && minibatch >= 1, "min_rounds: M and m must be >= 1");
  require(grad_bound >= 0.0, "min_rounds: G must be non-negative");
  if (sigma == 0.0) throw InvalidArgument("noiseless regime: bound degenerates, choose t manually");
  require(sigma > 0.0, "min_rounds: sigma must be positive");
  if (rho == 0.0) return 1;
  const double m = workers;
  const double inner = 1.0 + m * std::sqrt(minibatch * m * grad_bound * grad_bound + sigma * sigma) / (4.0 * sigma);
  const double t = std::ceil(std::log(inner) / std::log(1.0 / rho));
  return std::max(1, static_cast<int>(t));
}

/// Plain-text format: "M" on the first line, then M rows of M decimals.
inline void write_text(std::ostream& out, const GossipMatrix& w) {
  const int m = w.size();
  out << m << '\n';
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) out << (j ? " " : "") << w(i, j);
    out << '\n';
  }
  out.precision(old_precision);
}

inline GossipMatrix read_text(std::istream& in) {
  int m = 0;
  if (!(in >> m) || m < 1) throw InvalidArgument("gossip file: expected matrix size M >= 1 on the first line");
  Matrix w(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (!(in >> w(i, j)))
        throw InvalidArgument("gossip file: expected " + std::to_string(m * m) + " entries");
  return GossipMatrix::from_weights(std::move(w), TopologyKind::Custom);
}

/// Messages sent by the busiest node per iteration for t rounds on `w`.
/// Complete averaging is modelled as an all-reduce costing M - 1 per round.
inline std::int64_t busiest_node_messages(const GossipMatrix& w, int t) {
  return static_cast<std::int64_t>(t) * w.max_degree();
}

}  // namespace dposg
