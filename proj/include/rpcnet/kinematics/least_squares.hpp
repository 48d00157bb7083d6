#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace rpcnet::kin {

/// Budgets and tolerances of the per-digit optimization. Defaults mirror the
/// settings used for the reference solver: forward finite differences,
/// max 1000 iterations, max 500 function evaluations, 1e-6 step/optimality/
/// constraint tolerances and 1e-1 function tolerance.
struct SolverOptions {
  int max_iterations = 1000;
  int max_function_evals = 500;
  double step_tol = 1e-6;
  double optimality_tol = 1e-6;
  double constraint_tol = 1e-6;
  double function_tol = 1e-1;
};

struct SolverResult {
  Eigen::VectorXd x;
  double cost = 0.0;  // sum of squared residuals
  int iterations = 0;
  int function_evals = 0;
  bool converged = false;
};

/// Box-constrained nonlinear least squares via Levenberg-Marquardt with a
/// forward finite-difference Jacobian and projection onto the bounds.
/// `fn(x, r)` fills the residual vector r (fixed dimension `m`).
template <class ResidualFn>
SolverResult solve_bounded_least_squares(ResidualFn&& fn, Eigen::VectorXd x0,
                                         const Eigen::VectorXd& lo,
                                         const Eigen::VectorXd& hi, int m,
                                         const SolverOptions& opt = {}) {
  const int n = static_cast<int>(x0.size());
  const double fd_step = std::sqrt(std::numeric_limits<double>::epsilon());

  auto clamp = [&](Eigen::VectorXd& x) {
    for (int j = 0; j < n; ++j) x[j] = std::min(std::max(x[j], lo[j]), hi[j]);
  };
  clamp(x0);

  SolverResult res;
  res.x = x0;
  Eigen::VectorXd r(m), r_trial(m), r_fd(m);
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    fn(x, out);
    ++evals;
  };
  eval(res.x, r);
  double f = r.squaredNorm();

  Eigen::MatrixXd jac(m, n);
  double lambda = 1e-3;

  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    res.iterations = iter;
    if (evals + n >= opt.max_function_evals) break;

    // forward-difference Jacobian; flip direction at the upper bound
    for (int j = 0; j < n; ++j) {
      double h = fd_step * (1.0 + std::abs(res.x[j]));
      if (res.x[j] + h > hi[j]) h = -h;
      Eigen::VectorXd xh = res.x;
      xh[j] += h;
      eval(xh, r_fd);
      jac.col(j) = (r_fd - r) / h;
    }

    Eigen::VectorXd g = 2.0 * jac.transpose() * r;  // gradient of f
    // projected-gradient optimality: components pushing into an active bound
    // cannot produce descent
    double pg_inf = 0.0;
    for (int j = 0; j < n; ++j) {
      double gj = g[j];
      if (res.x[j] <= lo[j] + opt.constraint_tol && gj > 0) gj = 0;
      if (res.x[j] >= hi[j] - opt.constraint_tol && gj < 0) gj = 0;
      pg_inf = std::max(pg_inf, std::abs(gj));
    }
    if (pg_inf < opt.optimality_tol) {
      res.converged = true;
      break;
    }

    Eigen::MatrixXd jtj = jac.transpose() * jac;
    Eigen::VectorXd jtr = jac.transpose() * r;

    bool accepted = false;
    while (evals < opt.max_function_evals) {
      Eigen::MatrixXd a = jtj;
      for (int j = 0; j < n; ++j)
        a(j, j) += lambda * std::max(jtj(j, j), 1e-12);
      Eigen::VectorXd step = a.ldlt().solve(-jtr);
      Eigen::VectorXd x_trial = res.x + step;
      clamp(x_trial);
      eval(x_trial, r_trial);
      double f_trial = r_trial.squaredNorm();
      if (f_trial < f) {
        double df = f - f_trial;
        double dx = (x_trial - res.x).lpNorm<Eigen::Infinity>();
        res.x = x_trial;
        r = r_trial;
        f = f_trial;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (df < opt.function_tol || dx < opt.step_tol) res.converged = true;
        break;
      }
      lambda *= 3.0;
      if (lambda > 1e12) break;
    }
    if (!accepted || res.converged) break;
  }

  res.cost = f;
  res.function_evals = evals;
  // starting at (or landing exactly on) a stationary point
  if (!res.converged && f < 1e-18) res.converged = true;
  return res;
}

}  // namespace rpcnet::kin
