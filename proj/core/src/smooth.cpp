#include "dbctl/smooth.hpp"

#include <cmath>

#include "dbctl/errors.hpp"

namespace dbctl::convex {
namespace {

using Eigen::VectorXd;

double evaluate(const SmoothObjective& f, const VectorXd& x, VectorXd& grad, double fd_step) {
  grad.resize(0);
  const double v = f(x, &grad);
  if (std::isfinite(v) && grad.size() != x.size()) grad = central_difference_gradient(f, x, fd_step);
  return v;
}

}  // namespace

VectorXd central_difference_gradient(const SmoothObjective& f, const VectorXd& x, double step) {
  VectorXd g(x.size());
  VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x(i)));
    probe(i) = x(i) + h;
    const double up = f(probe, nullptr);
    probe(i) = x(i) - h;
    const double down = f(probe, nullptr);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

SmoothResult minimize_smooth(const SmoothObjective& f, const VectorXd& x0,
                             const SmoothOptions& opt) {
  SmoothResult out;
  VectorXd x = x0;
  VectorXd g;
  double fx = evaluate(f, x, g, opt.fd_step);
  if (!std::isfinite(fx)) {
    throw NumericError("objective is undefined at the initial point; draw a new start");
  }
  out.initial_value = fx;
  const Eigen::Index k = x.size();
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(k, k);

  int iter = 0;
  for (; iter < opt.max_iterations; ++iter) {
    if (g.norm() <= opt.grad_tol) {
      out.converged = true;
      break;
    }
    VectorXd d = -H * g;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      H.setIdentity();
      d = -g;
      slope = -g.squaredNorm();
    }
    double t = 1.0;
    VectorXd xn, gn;
    double fn = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < opt.max_backtracks; ++bt) {
      xn = x + t * d;
      fn = evaluate(f, xn, gn, opt.fd_step);
      if (std::isfinite(fn) && fn <= fx + opt.armijo * t * slope) {
        accepted = true;
        break;
      }
      t *= opt.backtrack;
    }
    if (!accepted) {
      if (H.isIdentity()) {
        // Steepest descent cannot make progress: stationary to working precision.
        out.converged = g.norm() <= 1e3 * opt.grad_tol;
        break;
      }
      H.setIdentity();
      continue;
    }
    const VectorXd s = xn - x;
    const VectorXd y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(k, k);
      if (iter == 0) H *= sy / y.squaredNorm();
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) +
          rho * s * s.transpose();
    }
    x = xn;
    g = gn;
    const double prev = fx;
    fx = fn;
    if (std::abs(prev - fx) <= 1e-15 * (1.0 + std::abs(fx)) && g.norm() <= 1e3 * opt.grad_tol) {
      out.converged = true;
      ++iter;
      break;
    }
  }
  out.x = x;
  out.value = fx;
  out.grad_norm = g.norm();
  out.iterations = iter;
  return out;
}

}  // namespace dbctl::convex
