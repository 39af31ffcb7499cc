#pragma once

#include "dposg/common.hpp"
#include "dposg/topology.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

namespace dposg {

/// Constant c in the consensus-driven step-size term.
inline constexpr double kStepSizeConstant = 321.0;

struct PlannerInput {
  double lipschitz = 1.0;   // L
  double grad_bound = 0.0;  // G
  double sigma = 1.0;
  int workers = 1;    // M
  int minibatch = 1;  // m
  double rho = 0.0;
  int rounds = 1;  // t
};

struct EtaPlan {
  double eta = 0.0;
  /// 1/(6 sqrt2 L), (1 - rho^t)/(sqrt(32 c M) L), sqrt(1 - rho^{2t})/(4 m^{1/4} M^{3/4} L)
  std::array<double, 3> terms{};
  /// Index (0-based) of the smallest term.
  std::size_t binding = 0;
};

/// Largest step size admitted by the convergence theorem for these constants.
inline EtaPlan plan_eta(const PlannerInput& p) {
  if (!(p.rho < 1.0)) throw InvalidArgument("spectral gap closed; theory bound undefined");
  require(p.rho >= 0.0, "plan_eta: rho must be non-negative");
  require(p.lipschitz > 0.0, "plan_eta: L must be positive");
  require(p.workers >= 1 && p.minibatch >= 1, "plan_eta: M and m must be >= 1");
  require(p.rounds >= 1, "plan_eta: t must be >= 1");
  const double l = p.lipschitz;
  const double workers = p.workers;
  const double rho_t = std::pow(p.rho, p.rounds);
  EtaPlan plan;
  plan.terms[0] = 1.0 / (6.0 * std::sqrt(2.0) * l);
  plan.terms[1] = (1.0 - rho_t) / (std::sqrt(32.0 * kStepSizeConstant * workers) * l);
  plan.terms[2] = std::sqrt(1.0 - rho_t * rho_t) /
                  (4.0 * std::pow(static_cast<double>(p.minibatch), 0.25) * std::pow(workers, 0.75) * l);
  const auto smallest = std::min_element(plan.terms.begin(), plan.terms.end());
  plan.binding = static_cast<std::size_t>(smallest - plan.terms.begin());
  plan.eta = *smallest;
  return plan;
}

/// Communication rounds per iteration required by the theorem; see min_rounds.
inline int plan_t(const PlannerInput& p) {
  return min_rounds(p.rho, p.workers, p.minibatch, p.grad_bound, p.sigma);
}

}  // namespace dposg
