#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dposg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Stacked (u, v) point; the first `dim_u` coordinates are the primal block.
using ParamPoint = Vector;
/// Value of the operator g = [grad_u F, -grad_v F].
using OperatorValue = Vector;

/// Bad user input or a violated precondition. Maps to CLI exit code 2.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite value in some worker state. Maps to CLI exit code 3.
class NumericalAbort : public std::runtime_error {
 public:
  NumericalAbort(std::int64_t iteration, int worker)
      : std::runtime_error("non-finite state at iteration " + std::to_string(iteration) +
                           " on worker " + std::to_string(worker)),
        iteration_(iteration),
        worker_(worker) {}

  std::int64_t iteration() const noexcept { return iteration_; }
  int worker() const noexcept { return worker_; }

 private:
  std::int64_t iteration_;
  int worker_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace dposg
