#pragma once

#include "dposg/common.hpp"
#include "dposg/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace dposg {

/// Constants of the standing assumptions for one problem instance. `G` is the
/// supremum of ||g|| over the ball of radius D/2 unless `grad_bound_global`.
struct ProblemConstants {
  double lipschitz = 1.0;
  double grad_bound = std::numeric_limits<double>::infinity();
  bool grad_bound_global = false;
  double sigma = 0.0;
  double domain_diameter = 2.0;
  std::optional<ParamPoint> minty_point;
};

/// Analytic min-max objective F(u, v) exposing the operator
/// g(x) = [grad_u F, -grad_v F] and its noisy minibatch version.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string name() const = 0;
  /// Human-readable parameter summary for `--describe`.
  virtual std::string parameters() const = 0;

  int dim_u() const noexcept { return dim_u_; }
  int dim_v() const noexcept { return dim_v_; }
  int dim() const noexcept { return dim_u_ + dim_v_; }
  const ProblemConstants& constants() const noexcept { return constants_; }

  double value(const ParamPoint& x) const {
    check_dim(x);
    return evaluate_value(x);
  }

  OperatorValue grad_exact(const ParamPoint& x) const {
    check_dim(x);
    return evaluate_operator(x);
  }

 protected:
  Problem(int dim_u, int dim_v) : dim_u_(dim_u), dim_v_(dim_v) {
    require(dim_u >= 1 && dim_v >= 0, "problem dimensions must satisfy d_u >= 1, d_v >= 0");
  }

  virtual double evaluate_value(const ParamPoint& x) const = 0;
  virtual OperatorValue evaluate_operator(const ParamPoint& x) const = 0;

  ProblemConstants constants_;

 private:
  void check_dim(const ParamPoint& x) const {
    if (x.size() != dim())
      throw InvalidArgument(name() + ": point has dimension " + std::to_string(x.size()) +
                            ", expected " + std::to_string(dim()));
  }

  int dim_u_;
  int dim_v_;
};

using ProblemPtr = std::shared_ptr<const Problem>;

/// F(u, v) = u^T A v.
class BilinearSaddle final : public Problem {
 public:
  explicit BilinearSaddle(Matrix a, double sigma = 0.0, double domain_diameter = 2.0)
      : Problem(static_cast<int>(a.rows()), static_cast<int>(a.cols())), a_(std::move(a)) {
    require(a_.rows() >= 1 && a_.cols() >= 1, "bilinear_saddle: A must be non-empty");
    const double norm = Eigen::JacobiSVD<Matrix>(a_).singularValues()(0);
    require(norm > 0.0, "bilinear_saddle: A must be nonzero");
    constants_.lipschitz = norm;
    constants_.sigma = sigma;
    constants_.domain_diameter = domain_diameter;
    constants_.grad_bound = norm * domain_diameter / 2.0;
    constants_.minty_point = ParamPoint::Zero(dim());
  }

  std::string name() const override { return "bilinear_saddle"; }
  std::string parameters() const override {
    std::ostringstream out;
    out << "A is " << a_.rows() << "x" << a_.cols() << ", ||A||_2 = " << constants_.lipschitz;
    return out.str();
  }
  const Matrix& coupling() const noexcept { return a_; }

 protected:
  double evaluate_value(const ParamPoint& x) const override {
    return x.head(dim_u()).dot(a_ * x.tail(dim_v()));
  }
  OperatorValue evaluate_operator(const ParamPoint& x) const override {
    OperatorValue g(dim());
    g.head(dim_u()) = a_ * x.tail(dim_v());
    g.tail(dim_v()) = -(a_.transpose() * x.head(dim_u()));
    return g;
  }

 private:
  Matrix a_;
};

/// F(u, v) = a/2 ||u||^2 - b/2 ||v||^2 + c u^T v with u, v in R^n.
class QuadraticSaddle final : public Problem {
 public:
  QuadraticSaddle(int n, double a, double b, double c, double sigma = 0.0, double domain_diameter = 2.0)
      : Problem(n, n), a_(a), b_(b), c_(c) {
    // The Jacobian is kron([[a, c], [-c, b]], I_n); its norm is the 2x2 block norm.
    Eigen::Matrix2d block;
    block << a, c, -c, b;
    const double norm = Eigen::JacobiSVD<Eigen::Matrix2d>(block).singularValues()(0);
    require(norm > 0.0, "quadratic_saddle: operator must be nonzero");
    constants_.lipschitz = norm;
    constants_.sigma = sigma;
    constants_.domain_diameter = domain_diameter;
    constants_.grad_bound = norm * domain_diameter / 2.0;
    if (a >= 0.0 && b >= 0.0) constants_.minty_point = ParamPoint::Zero(dim());
  }

  std::string name() const override { return "quadratic_saddle"; }
  std::string parameters() const override {
    std::ostringstream out;
    out << "n = " << dim_u() << ", a = " << a_ << ", b = " << b_ << ", c = " << c_;
    return out.str();
  }

 protected:
  double evaluate_value(const ParamPoint& x) const override {
    const auto u = x.head(dim_u());
    const auto v = x.tail(dim_v());
    return 0.5 * a_ * u.squaredNorm() - 0.5 * b_ * v.squaredNorm() + c_ * u.dot(v);
  }
  OperatorValue evaluate_operator(const ParamPoint& x) const override {
    const auto u = x.head(dim_u());
    const auto v = x.tail(dim_v());
    OperatorValue g(dim());
    g.head(dim_u()) = a_ * u + c_ * v;
    g.tail(dim_v()) = b_ * v - c_ * u;
    return g;
  }

 private:
  double a_, b_, c_;
};

namespace detail {
inline double logistic(double w) {
  return w >= 0.0 ? 1.0 / (1.0 + std::exp(-w)) : std::exp(w) / (1.0 + std::exp(w));
}
}  // namespace detail

/// Dirac GAN: F(theta, psi) = f(theta * psi) with f(w) = log(1 + e^{-w}).
class DiracGan final : public Problem {
 public:
  explicit DiracGan(double sigma = 0.0, double domain_diameter = 2.0) : Problem(1, 1) {
    const double r = domain_diameter / 2.0;
    // |f'| < 1 and 0 < f'' <= 1/4 bound the Jacobian on the ball of radius r.
    constants_.lipschitz = 1.0 + 3.0 * r * r / 8.0;
    constants_.grad_bound = r;
    constants_.sigma = sigma;
    constants_.domain_diameter = domain_diameter;
  }

  std::string name() const override { return "dirac_gan"; }
  std::string parameters() const override { return "f(w) = log(1 + exp(-w))"; }

 protected:
  double evaluate_value(const ParamPoint& x) const override {
    const double w = x(0) * x(1);
    // log(1 + e^{-w}) without overflow
    return w >= 0.0 ? std::log1p(std::exp(-w)) : -w + std::log1p(std::exp(w));
  }
  OperatorValue evaluate_operator(const ParamPoint& x) const override {
    const double theta = x(0);
    const double psi = x(1);
    const double fprime = -detail::logistic(-theta * psi);
    OperatorValue g(2);
    g << psi * fprime, -theta * fprime;
    return g;
  }
};

/// Nonmonotone polynomial saddle on (u, v) in R^2:
///   F(u, v) = a u v + H(u) - H(v),  H(s) = s^6/6 - s^4/2 + s^2/2,
/// so g = [a v + h(u), -a u + h(v)] with h(s) = s (s^2 - 1)^2. h decreases on
/// 1/5 < s^2 < 1, which breaks monotonicity, while s h(s) >= 0 keeps the
/// Minty inequality at x* = 0: <g(x), x> = u h(u) + v h(v) >= 0.
class NonmonotonePolynomialSaddle final : public Problem {
 public:
  explicit NonmonotonePolynomialSaddle(double coupling = 1.0, double sigma = 0.0, double domain_diameter = 2.0)
      : Problem(1, 1), coupling_(coupling) {
    const double r = domain_diameter / 2.0;
    double max_dh = 1.0;
    if (r * r >= 0.6) max_dh = std::max(max_dh, 0.8);
    max_dh = std::max(max_dh, std::abs(dh(r)));
    double max_h = std::abs(h(r));
    max_h = std::max(max_h, h(std::min(r, 1.0 / std::sqrt(5.0))));
    constants_.lipschitz = max_dh + std::abs(coupling);
    constants_.grad_bound = std::abs(coupling) * r + std::sqrt(2.0) * max_h;
    constants_.sigma = sigma;
    constants_.domain_diameter = domain_diameter;
    constants_.minty_point = ParamPoint::Zero(2);
  }

  std::string name() const override { return "nonmonotone_saddle"; }
  std::string parameters() const override {
    std::ostringstream out;
    out << "coupling = " << coupling_;
    return out.str();
  }

 protected:
  double evaluate_value(const ParamPoint& x) const override {
    return coupling_ * x(0) * x(1) + antiderivative(x(0)) - antiderivative(x(1));
  }
  OperatorValue evaluate_operator(const ParamPoint& x) const override {
    OperatorValue g(2);
    g << coupling_ * x(1) + h(x(0)), -coupling_ * x(0) + h(x(1));
    return g;
  }

 private:
  static double h(double s) {
    const double q = s * s - 1.0;
    return s * q * q;
  }
  static double dh(double s) {
    const double s2 = s * s;
    return 5.0 * s2 * s2 - 6.0 * s2 + 1.0;
  }
  static double antiderivative(double s) {
    const double s2 = s * s;
    return s2 * s2 * s2 / 6.0 - s2 * s2 / 2.0 + s2 / 2.0;
  }

  double coupling_;
};

/// Name-keyed numeric parameters; list-valued for matrix entries.
using ProblemParams = std::map<std::string, std::vector<double>>;

namespace detail {
inline double scalar_param(const ProblemParams& params, const std::string& key, double fallback) {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  if (it->second.size() != 1) throw InvalidArgument("problem parameter '" + key + "' expects one value");
  return it->second.front();
}

inline int dimension_param(const ProblemParams& params, const std::string& key, int fallback) {
  const double value = scalar_param(params, key, fallback);
  if (value < 1 || value != std::floor(value))
    throw InvalidArgument("problem parameter '" + key + "' must be a positive integer");
  return static_cast<int>(value);
}

inline void reject_unknown(const ProblemParams& params, const std::vector<std::string>& allowed,
                           const std::string& problem) {
  for (const auto& [key, values] : params) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw InvalidArgument(problem + ": unknown parameter '" + key + "'");
  }
}
}  // namespace detail

inline const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names{"bilinear_saddle", "quadratic_saddle", "dirac_gan",
                                              "nonmonotone_saddle"};
  return names;
}

/// Builds a shipped problem from its name and parameter map. `D` (domain
/// diameter) is accepted by every problem.
inline ProblemPtr make_problem(const std::string& name, const ProblemParams& params, double sigma) {
  require(sigma >= 0.0, "sigma must be non-negative");
  const double diameter = detail::scalar_param(params, "D", 2.0);
  require(diameter > 0.0, "problem parameter 'D' must be positive");
  if (name == "bilinear_saddle") {
    detail::reject_unknown(params, {"dim", "scale", "matrix", "D"}, name);
    const int n = detail::dimension_param(params, "dim", 1);
    Matrix a = detail::scalar_param(params, "scale", 1.0) * Matrix::Identity(n, n);
    if (const auto it = params.find("matrix"); it != params.end()) {
      if (static_cast<int>(it->second.size()) != n * n)
        throw InvalidArgument("bilinear_saddle: 'matrix' needs dim*dim = " + std::to_string(n * n) + " entries");
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = it->second[i * n + j];
    }
    return std::make_shared<BilinearSaddle>(std::move(a), sigma, diameter);
  }
  if (name == "quadratic_saddle") {
    detail::reject_unknown(params, {"dim", "a", "b", "c", "D"}, name);
    return std::make_shared<QuadraticSaddle>(
        detail::dimension_param(params, "dim", 1), detail::scalar_param(params, "a", 1.0),
        detail::scalar_param(params, "b", 1.0), detail::scalar_param(params, "c", 1.0), sigma, diameter);
  }
  if (name == "dirac_gan") {
    detail::reject_unknown(params, {"D"}, name);
    return std::make_shared<DiracGan>(sigma, diameter);
  }
  if (name == "nonmonotone_saddle") {
    detail::reject_unknown(params, {"coupling", "D"}, name);
    return std::make_shared<NonmonotonePolynomialSaddle>(detail::scalar_param(params, "coupling", 1.0), sigma,
                                                         diameter);
  }
  throw InvalidArgument("unknown problem '" + name + "'");
}

/// Forwards to another problem and counts operator evaluations. Used to audit
/// the one-oracle-call-per-step contract.
class CountingProblem final : public Problem {
 public:
  explicit CountingProblem(ProblemPtr inner) : Problem(inner->dim_u(), inner->dim_v()), inner_(std::move(inner)) {
    constants_ = inner_->constants();
  }

  std::string name() const override { return inner_->name(); }
  std::string parameters() const override { return inner_->parameters(); }
  std::int64_t calls() const noexcept { return calls_.load(); }

 protected:
  double evaluate_value(const ParamPoint& x) const override { return inner_->value(x); }
  OperatorValue evaluate_operator(const ParamPoint& x) const override {
    ++calls_;
    return inner_->grad_exact(x);
  }

 private:
  ProblemPtr inner_;
  mutable std::atomic<std::int64_t> calls_{0};
};

inline OperatorValue grad_exact(const Problem& problem, const ParamPoint& x) { return problem.grad_exact(x); }

struct GradientSample {
  OperatorValue value;
  Vector noise;
  int minibatch_size = 1;
};

/// Minibatch estimate of g(x): the exact value plus the mean of m i.i.d.
/// N(0, sigma^2/d I) perturbations, drawn directly as N(0, sigma^2/(d m) I).
/// With sigma = 0 the rng is left untouched.
inline GradientSample grad_stochastic(const Problem& problem, const ParamPoint& x, int minibatch, Rng& rng) {
  require(minibatch >= 1, "minibatch size must be >= 1");
  GradientSample sample;
  sample.minibatch_size = minibatch;
  sample.value = problem.grad_exact(x);
  sample.noise = Vector::Zero(problem.dim());
  const double sigma = problem.constants().sigma;
  if (sigma > 0.0) {
    std::normal_distribution<double> normal(0.0, sigma / std::sqrt(static_cast<double>(problem.dim()) * minibatch));
    for (Eigen::Index i = 0; i < sample.noise.size(); ++i) sample.noise(i) = normal(rng);
    sample.value += sample.noise;
  }
  return sample;
}

enum class CheckStatus { Passed, Failed, NotDeclared };

inline const char* to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::Passed: return "passed";
    case CheckStatus::Failed: return "failed";
    case CheckStatus::NotDeclared: return "not declared";
  }
  return "failed";
}

struct ValidationReport {
  double lipschitz_estimate = 0.0;
  CheckStatus lipschitz = CheckStatus::Passed;
  double max_grad_norm = 0.0;
  CheckStatus grad_bound = CheckStatus::Passed;
  double minty_min = std::numeric_limits<double>::infinity();
  CheckStatus minty = CheckStatus::NotDeclared;

  bool passed() const {
    return lipschitz != CheckStatus::Failed && grad_bound != CheckStatus::Failed && minty != CheckStatus::Failed;
  }
};

/// Uniform point in the Euclidean ball of the given radius.
inline ParamPoint sample_ball(int dim, double radius, Rng& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  ParamPoint x(dim);
  for (int i = 0; i < dim; ++i) x(i) = normal(rng);
  const double norm = x.norm();
  if (norm == 0.0) return x;
  return x * (radius * std::pow(uniform(rng), 1.0 / dim) / norm);
}

/// Probes the Lipschitz, gradient-bound and Minty assumptions on n_probe random
/// pairs inside the ball. Sampling evidence only; one bad probe fails a check.
inline ValidationReport validate_assumptions(const Problem& problem, int n_probe, double radius, Rng& rng) {
  require(n_probe >= 2, "validate_assumptions requires n_probe >= 2");
  require(radius > 0.0, "validate_assumptions requires radius > 0");
  const auto& constants = problem.constants();
  ValidationReport report;
  if (constants.minty_point) report.minty = CheckStatus::Passed;
  for (int probe = 0; probe < n_probe; ++probe) {
    const ParamPoint x1 = sample_ball(problem.dim(), radius, rng);
    const ParamPoint x2 = sample_ball(problem.dim(), radius, rng);
    const OperatorValue g1 = problem.grad_exact(x1);
    const OperatorValue g2 = problem.grad_exact(x2);
    const double distance = (x1 - x2).norm();
    if (distance > 0.0) report.lipschitz_estimate = std::max(report.lipschitz_estimate, (g1 - g2).norm() / distance);
    report.max_grad_norm = std::max({report.max_grad_norm, g1.norm(), g2.norm()});
    if (constants.minty_point) {
      report.minty_min = std::min({report.minty_min, g1.dot(x1 - *constants.minty_point),
                                   g2.dot(x2 - *constants.minty_point)});
    }
  }
  if (report.lipschitz_estimate > constants.lipschitz * (1.0 + 1e-6)) report.lipschitz = CheckStatus::Failed;
  if (report.max_grad_norm > constants.grad_bound * (1.0 + 1e-6) &&
      (constants.grad_bound_global || radius <= constants.domain_diameter / 2.0)) {
    report.grad_bound = CheckStatus::Failed;
  }
  if (constants.minty_point && report.minty_min < -1e-9) report.minty = CheckStatus::Failed;
  return report;
}

/// Multi-line constants summary printed by `run --describe`.
inline std::string describe(const Problem& problem) {
  const auto& c = problem.constants();
  std::ostringstream out;
  out << "problem: " << problem.name() << '\n'
      << "parameters: " << problem.parameters() << '\n'
      << "dimensions: d_u = " << problem.dim_u() << ", d_v = " << problem.dim_v() << '\n'
      << "L (Lipschitz constant of g): " << c.lipschitz << '\n'
      << "G (sup ||g|| on ball of radius D/2 = " << c.domain_diameter / 2.0 << "): " << c.grad_bound << '\n'
      << "sigma (noise std, per-coordinate variance sigma^2/d, divided by m): " << c.sigma << '\n'
      << "minty point: " << (c.minty_point ? "declared at 0" : "not declared") << '\n';
  return out.str();
}

}  // namespace dposg
