#pragma once

#include "dposg/common.hpp"
#include "dposg/problems.hpp"
#include "dposg/rng.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace dposg {

template <class Scalar>
using ColumnVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Two-sequence optimistic state: x (anchor), z (query point) and the
/// stochastic gradient drawn at the previous z, reused by the next step.
template <class Scalar = double>
struct BasicOsgState {
  ColumnVector<Scalar> x;
  ColumnVector<Scalar> z;
  ColumnVector<Scalar> g_prev;

  /// x = z = x0 and g_prev = 0; the first z-step is then a pure carry of x0.
  static BasicOsgState from_initial(ColumnVector<Scalar> x0) {
    BasicOsgState state;
    state.g_prev = ColumnVector<Scalar>::Zero(x0.size());
    state.z = x0;
    state.x = std::move(x0);
    return state;
  }
};

using OsgState = BasicOsgState<double>;

/// One optimistic step against `anchor` (x_{k-1}, or its mixed version in the
/// decentralized setting):
///   z_k = anchor - eta g_prev
///   x_k = anchor - eta g(z_k; xi_k)
/// `sample(z)` is called exactly once.
template <class Scalar, class Sampler>
void osg_update(BasicOsgState<Scalar>& state, const ColumnVector<Scalar>& anchor, Sampler&& sample,
                const Scalar& eta) {
  state.z = anchor - eta * state.g_prev;
  ColumnVector<Scalar> fresh = sample(static_cast<const ColumnVector<Scalar>&>(state.z));
  state.x = anchor - eta * fresh;
  state.g_prev = std::move(fresh);
}

template <class Scalar, class Sampler>
BasicOsgState<Scalar> osg_step(BasicOsgState<Scalar> state, Sampler&& sample, const Scalar& eta) {
  const ColumnVector<Scalar> anchor = state.x;
  osg_update(state, anchor, std::forward<Sampler>(sample), eta);
  return state;
}

/// Single-machine OSG step on a problem with minibatch m.
inline OsgState osg_step(OsgState state, const Problem& problem, double eta, int minibatch, Rng& rng) {
  require(eta > 0.0, "osg_step requires eta > 0");
  return osg_step(
      std::move(state), [&](const Vector& z) { return grad_stochastic(problem, z, minibatch, rng).value; }, eta);
}

/// One-line optimistic recursion z_{k+1} = z_k - 2 eta g_k + eta g_{k-1}.
template <class Scalar = double>
struct BasicOneLineState {
  ColumnVector<Scalar> z;
  ColumnVector<Scalar> g_prev;

  static BasicOneLineState from_initial(ColumnVector<Scalar> z0) {
    BasicOneLineState state;
    state.g_prev = ColumnVector<Scalar>::Zero(z0.size());
    state.z = std::move(z0);
    return state;
  }
};

/// Advances the one-line form. Seeded with z = x_0 and g_prev = 0 it visits the
/// same z sequence as the two-sequence form, one step ahead: after k calls it
/// holds z_{k+1}. Equality is exact in exact arithmetic and holds to rounding in
/// floating point.
template <class Scalar, class Sampler>
BasicOneLineState<Scalar> one_line_step(BasicOneLineState<Scalar> state, Sampler&& sample, const Scalar& eta) {
  ColumnVector<Scalar> fresh = sample(static_cast<const ColumnVector<Scalar>&>(state.z));
  const Scalar two_eta = eta + eta;
  state.z = state.z - two_eta * fresh + eta * state.g_prev;
  state.g_prev = std::move(fresh);
  return state;
}

/// Simultaneous gradient descent-ascent, x_k = x_{k-1} - eta g(x_{k-1}; xi).
/// Comparison arm only; z mirrors the query point.
template <class Scalar, class Sampler>
void gda_update(BasicOsgState<Scalar>& state, const ColumnVector<Scalar>& anchor, Sampler&& sample,
                const Scalar& eta) {
  state.z = anchor;
  ColumnVector<Scalar> fresh = sample(static_cast<const ColumnVector<Scalar>&>(state.z));
  state.x = anchor - eta * fresh;
  state.g_prev = std::move(fresh);
}

/// Recorded oracle outputs, replayable in order so that two formulations can
/// consume an identical sample sequence.
template <class Scalar = double>
class SampleTape {
 public:
  void push(ColumnVector<Scalar> value) { values_.push_back(std::move(value)); }
  std::size_t size() const noexcept { return values_.size(); }
  const ColumnVector<Scalar>& operator[](std::size_t i) const { return values_.at(i); }

  /// Records every value returned by `sampler`.
  template <class Sampler>
  auto recorder(Sampler& sampler) {
    return [this, &sampler](const ColumnVector<Scalar>& z) {
      ColumnVector<Scalar> value = sampler(z);
      push(value);
      return value;
    };
  }

  /// Replays from `start`, ignoring the query point. Throws when exhausted.
  auto player(std::size_t start = 0) const {
    return [this, cursor = start](const ColumnVector<Scalar>&) mutable {
      if (cursor >= values_.size()) throw InvalidArgument("sample tape exhausted");
      return values_[cursor++];
    };
  }

 private:
  std::vector<ColumnVector<Scalar>> values_;
};

}  // namespace dposg
