#pragma once

#include <Eigen/Dense>

#include <functional>

namespace dbctl::convex {

/// Objective callback. Returns f(x); fills *grad when it can (leaving it
/// empty requests central differences). A non-finite return marks x as
/// outside the domain.
using SmoothObjective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct SmoothOptions {
  int max_iterations = 300;
  double grad_tol = 1e-8;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;
  double fd_step = 1e-6;
};

struct SmoothResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double initial_value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;  // false: iteration budget or line search exhausted
};

Eigen::VectorXd central_difference_gradient(const SmoothObjective& f, const Eigen::VectorXd& x,
                                            double step = 1e-6);

/// BFGS with Armijo backtracking. Throws NumericError if f(x0) is not finite.
SmoothResult minimize_smooth(const SmoothObjective& f, const Eigen::VectorXd& x0,
                             const SmoothOptions& options = SmoothOptions{});

}  // namespace dbctl::convex
