#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <string_view>
#include <vector>

namespace thz {

/// Bounded nonlinear least squares: minimize 0.5 * ||r(x)||^2 subject to lower <= x <= upper.
struct LeastSquaresProblem {
  using ResidualFn = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r)>;
  using JacobianFn = std::function<void(const Eigen::VectorXd& x, Eigen::MatrixXd& J)>;

  std::size_t n_params = 0;
  std::size_t n_residuals = 0;
  ResidualFn residual;
  JacobianFn jacobian;  // empty: central finite differences
  Eigen::VectorXd lower;  // empty: unbounded
  Eigen::VectorXd upper;

  void validate() const;
};

struct SolverOptions {
  int max_iter = 200;
  double gtol = 1e-10;
  double xtol = 1e-10;
  double ftol = 1e-10;
  double initial_radius = 0.0;  // <= 0: 100 * ||D x0|| (or 100 when x0 = 0)
};

enum class ConvergenceReason { GradientTol, StepTol, CostTol, MaxIter, NonFinite };

std::string_view to_string(ConvergenceReason r);

struct SolverReport {
  Eigen::VectorXd solution;
  double cost = 0.0;  // 0.5 * ||r||^2
  int iterations = 0;
  ConvergenceReason reason = ConvergenceReason::MaxIter;
  bool success = false;
  std::vector<double> accepted_costs;  // starts with the cost at x0
};

/// Levenberg-style trust-region method. The damped model step is solved exactly
/// through an eigendecomposition of the scaled Gauss-Newton matrix, trial points
/// are projected onto the box, and radii update with ratios 0.25 / 0.75.
SolverReport solve(const LeastSquaresProblem& problem, const Eigen::VectorXd& x0,
                   const SolverOptions& opts = {});

/// Central-difference Jacobian with step h_i = step * max(1, |x_i|).
Eigen::MatrixXd finite_difference_jacobian(const LeastSquaresProblem& problem,
                                           const Eigen::VectorXd& x, double step = 1e-6);

}  // namespace thz
