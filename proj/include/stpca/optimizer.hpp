#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>

#include <Eigen/Core>

#include "stpca/errors.hpp"

namespace stpca {

/// Objective callback: returns f(x) and, when grad is non-null, writes the
/// gradient into it. May return +inf to reject infeasible trial points.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct BfgsOptions {
  /// Stop when an accepted step improves f by less than rel_tolerance * |f_old|.
  double rel_tolerance = 1e-10;
  /// Stop when the gradient infinity norm drops to this value.
  double grad_tolerance = 1e-12;
  std::size_t max_iterations = 1000;
  std::size_t max_evaluations = 100000;
  /// Step shrink factor and Armijo constant of the backtracking line search.
  double backtrack = 0.2;
  double armijo = 1e-4;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::string reason;
};

/// Dense-inverse-Hessian BFGS with backtracking line search.
///
/// The inverse Hessian starts at the identity and is reset to it whenever the
/// search direction stops being a descent direction or the line search fails
/// from a non-identity metric. Curvature pairs with s'y <= 0 are skipped.
inline BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x, const BfgsOptions& opt = {}) {
  const Eigen::Index n = x.size();
  BfgsResult res;
  Eigen::VectorXd g(n), g_new(n);
  double fx = f(x, &g);
  res.evaluations = 1;
  if (!std::isfinite(fx) || !g.allFinite()) throw NumericalFailure("BFGS: non-finite objective at the starting point", x);

  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  bool identity_metric = true;

  for (;;) {
    if (g.lpNorm<Eigen::Infinity>() <= opt.grad_tolerance) {
      res.converged = true;
      res.reason = "gradient tolerance";
      break;
    }
    if (res.iterations >= opt.max_iterations) {
      res.reason = "iteration limit";
      break;
    }
    if (res.evaluations >= opt.max_evaluations) {
      res.reason = "evaluation limit";
      break;
    }

    Eigen::VectorXd p = -(h * g);
    double slope = g.dot(p);
    if (!(slope < 0.0)) {
      h.setIdentity();
      identity_metric = true;
      p = -g;
      slope = g.dot(p);
    }

    double step = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    Eigen::VectorXd x_new(n);
    bool accepted = false;
    while (res.evaluations < opt.max_evaluations) {
      x_new = x + step * p;
      if (x_new == x) break;
      f_new = f(x_new, nullptr);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= fx + opt.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= opt.backtrack;
    }

    if (!accepted) {
      if (!identity_metric) {
        h.setIdentity();
        identity_metric = true;
        continue;
      }
      res.converged = true;
      res.reason = "no further descent";
      break;
    }

    f_new = f(x_new, &g_new);
    ++res.evaluations;
    ++res.iterations;
    if (!std::isfinite(f_new) || !g_new.allFinite()) throw NumericalFailure("BFGS: non-finite objective during optimization", x);

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-16 * s.norm() * y.norm()) {
      const Eigen::VectorXd hy = h * y;
      const double yhy = y.dot(hy);
      h += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) - (hy * s.transpose() + s * hy.transpose()) / sy;
      identity_metric = false;
    }

    const double improvement = fx - f_new;
    x = x_new;
    g = g_new;
    fx = f_new;
    if (improvement <= opt.rel_tolerance * std::abs(fx + improvement)) {
      res.converged = true;
      res.reason = "relative tolerance";
      break;
    }
  }

  res.x = std::move(x);
  res.value = fx;
  return res;
}

}  // namespace stpca
