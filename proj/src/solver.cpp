#include "thz/solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace thz {

std::string_view to_string(ConvergenceReason r) {
  switch (r) {
    case ConvergenceReason::GradientTol: return "gradient-tol";
    case ConvergenceReason::StepTol: return "step-tol";
    case ConvergenceReason::CostTol: return "cost-tol";
    case ConvergenceReason::MaxIter: return "max-iter";
    case ConvergenceReason::NonFinite: return "non-finite";
  }
  return "unknown";
}

void LeastSquaresProblem::validate() const {
  if (n_params == 0) throw std::invalid_argument("least squares: no parameters");
  if (n_residuals < n_params) throw std::invalid_argument("least squares: fewer residuals than parameters");
  if (!residual) throw std::invalid_argument("least squares: missing residual function");
  if (lower.size() != 0 && static_cast<std::size_t>(lower.size()) != n_params)
    throw std::invalid_argument("least squares: lower bound size mismatch");
  if (upper.size() != 0 && static_cast<std::size_t>(upper.size()) != n_params)
    throw std::invalid_argument("least squares: upper bound size mismatch");
  if (lower.size() != 0 && upper.size() != 0 && (lower.array() > upper.array()).any())
    throw std::invalid_argument("least squares: lower bound exceeds upper bound");
}

namespace {

struct Box {
  Eigen::VectorXd lo, hi;

  Box(const LeastSquaresProblem& p) {
    const auto n = static_cast<Eigen::Index>(p.n_params);
    lo = p.lower.size() ? p.lower : Eigen::VectorXd::Constant(n, -INFINITY);
    hi = p.upper.size() ? p.upper : Eigen::VectorXd::Constant(n, INFINITY);
  }
  Eigen::VectorXd project(const Eigen::VectorXd& x) const { return x.cwiseMax(lo).cwiseMin(hi); }
  bool contains(const Eigen::VectorXd& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }
};

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

void evaluate_jacobian(const LeastSquaresProblem& p, const Eigen::VectorXd& x, Eigen::MatrixXd& J) {
  if (p.jacobian) {
    J.resize(static_cast<Eigen::Index>(p.n_residuals), static_cast<Eigen::Index>(p.n_params));
    p.jacobian(x, J);
  } else {
    J = finite_difference_jacobian(p, x);
  }
}

// Gradient norm used for the stopping test, ignoring components that push
// against an active bound.
double scaled_gradient_norm(const Eigen::VectorXd& g, const Eigen::VectorXd& x, const Box& box,
                            const Eigen::VectorXd& col_norms, double rnorm) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (x[i] <= box.lo[i] && g[i] > 0.0) continue;
    if (x[i] >= box.hi[i] && g[i] < 0.0) continue;
    if (col_norms[i] > 0.0) worst = std::max(worst, std::abs(g[i]) / (col_norms[i] * rnorm));
  }
  return worst;
}

// Solves (B + lambda I) p = -g for the smallest lambda >= 0 with ||p|| <= radius,
// B symmetric positive semidefinite.
Eigen::VectorXd damped_step(const Eigen::MatrixXd& B, const Eigen::VectorXd& g, double radius) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(B);
  const Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
  const Eigen::VectorXd gt = eig.eigenvectors().transpose() * g;
  const double lam_max = lam.maxCoeff();
  const double cutoff = lam_max * 1e-14;

  auto step_norm = [&](double lambda) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      const double d = lam[i] + lambda;
      if (d > cutoff) s += (gt[i] / d) * (gt[i] / d);
    }
    return std::sqrt(s);
  };
  auto step_for = [&](double lambda) {
    Eigen::VectorXd c(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      const double d = lam[i] + lambda;
      c[i] = d > cutoff ? -gt[i] / d : 0.0;
    }
    return Eigen::VectorXd(eig.eigenvectors() * c);
  };

  if (step_norm(0.0) <= radius) return step_for(0.0);
  double lo = 0.0;
  double hi = std::max(g.norm() / radius, 1e-300);
  double lambda = hi;
  for (int it = 0; it < 200; ++it) {
    lambda = 0.5 * (lo + hi);
    const double n = step_norm(lambda);
    if (std::abs(n - radius) <= 1e-3 * radius) break;
    if (n > radius) lo = lambda; else hi = lambda;
  }
  if (step_norm(lambda) > radius) lambda = hi;
  return step_for(lambda);
}

}  // namespace

Eigen::MatrixXd finite_difference_jacobian(const LeastSquaresProblem& p, const Eigen::VectorXd& x,
                                           double step) {
  const auto m = static_cast<Eigen::Index>(p.n_residuals);
  const auto n = static_cast<Eigen::Index>(p.n_params);
  Eigen::MatrixXd J(m, n);
  Eigen::VectorXd rp(m), rm(m);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = step * std::max(1.0, std::abs(x[j]));
    // Stay inside the box; at an active bound this becomes a one-sided difference.
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    if (p.upper.size()) xp[j] = std::min(xp[j], p.upper[j]);
    if (p.lower.size()) xm[j] = std::max(xm[j], p.lower[j]);
    if (!(xp[j] > xm[j])) {
      J.col(j).setZero();
      continue;
    }
    p.residual(xp, rp);
    p.residual(xm, rm);
    J.col(j) = (rp - rm) / (xp[j] - xm[j]);
  }
  return J;
}

SolverReport solve(const LeastSquaresProblem& problem, const Eigen::VectorXd& x0,
                   const SolverOptions& opts) {
  problem.validate();
  const auto m = static_cast<Eigen::Index>(problem.n_residuals);
  const Box box(problem);
  if (static_cast<std::size_t>(x0.size()) != problem.n_params)
    throw std::invalid_argument("least squares: x0 has wrong dimension");
  if (!box.contains(x0)) throw std::invalid_argument("least squares: x0 outside bounds");

  SolverReport rep;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd r(m);
  problem.residual(x, r);
  if (!finite(r)) throw std::invalid_argument("least squares: residual not finite at x0");
  double cost = 0.5 * r.squaredNorm();
  rep.accepted_costs.push_back(cost);

  Eigen::MatrixXd J;
  evaluate_jacobian(problem, x, J);
  auto finish = [&](ConvergenceReason reason, bool ok) {
    rep.solution = x;
    rep.cost = cost;
    rep.reason = reason;
    rep.success = ok;
    return rep;
  };
  if (!J.allFinite()) return finish(ConvergenceReason::NonFinite, false);

  Eigen::VectorXd col_norms = J.colwise().norm().transpose();
  Eigen::VectorXd scale = col_norms;
  for (Eigen::Index i = 0; i < scale.size(); ++i)
    if (!(scale[i] > 0.0)) scale[i] = 1.0;

  double radius = opts.initial_radius;
  if (radius <= 0.0) {
    const double dx = scale.cwiseProduct(x).norm();
    radius = dx > 0.0 ? 100.0 * dx : 100.0;
  }

  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    rep.iterations = iter;
    if (cost == 0.0) return finish(ConvergenceReason::GradientTol, true);

    const Eigen::VectorXd g = J.transpose() * r;
    if (scaled_gradient_norm(g, x, box, col_norms, r.norm()) <= opts.gtol)
      return finish(ConvergenceReason::GradientTol, true);

    const Eigen::MatrixXd H = J.transpose() * J;
    const Eigen::VectorXd inv_scale = scale.cwiseInverse();
    const Eigen::MatrixXd B = inv_scale.asDiagonal() * H * inv_scale.asDiagonal();
    const Eigen::VectorXd step_scaled = damped_step(B, inv_scale.cwiseProduct(g), radius);
    const Eigen::VectorXd x_trial = box.project(x + inv_scale.cwiseProduct(step_scaled));
    const Eigen::VectorXd step = x_trial - x;
    const double step_norm = scale.cwiseProduct(step).norm();

    Eigen::VectorXd r_trial(m);
    problem.residual(x_trial, r_trial);
    if (!finite(r_trial)) return finish(ConvergenceReason::NonFinite, false);
    const double cost_trial = 0.5 * r_trial.squaredNorm();

    const double predicted = -(g.dot(step) + 0.5 * step.dot(H * step));
    const double actual = cost - cost_trial;
    const double rho = predicted > 0.0 ? actual / predicted : (actual > 0.0 ? 1.0 : -1.0);

    if (rho < 0.25) {
      radius = 0.25 * std::min(radius, step_norm);
    } else if (rho > 0.75) {
      radius = std::max(radius, 2.0 * step_norm);
    }

    if (rho > 1e-4 && cost_trial < cost) {
      const double cost_old = cost;
      x = x_trial;
      r = r_trial;
      cost = cost_trial;
      rep.accepted_costs.push_back(cost);
      evaluate_jacobian(problem, x, J);
      if (!J.allFinite()) return finish(ConvergenceReason::NonFinite, false);
      col_norms = J.colwise().norm().transpose();
      scale = scale.cwiseMax(col_norms);
      if (actual <= opts.ftol * cost_old && predicted <= opts.ftol * cost_old && rho <= 2.0)
        return finish(ConvergenceReason::CostTol, true);
    }

    const double xnorm = scale.cwiseProduct(x).norm();
    if (radius <= opts.xtol * (xnorm + opts.xtol) || step_norm == 0.0)
      return finish(ConvergenceReason::StepTol, true);
  }
  return finish(ConvergenceReason::MaxIter, false);
}

}  // namespace thz
