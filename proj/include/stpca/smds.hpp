#pragma once

// Spherical MDS with geodesic stress. A configuration is an n x (d+1) matrix
// whose rows z_i are free vectors; only their directions matter, and the
// sphere point is r z_i / |z_i|.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "stpca/embedding_init.hpp"
#include "stpca/errors.hpp"
#include "stpca/geometry.hpp"
#include "stpca/log.hpp"
#include "stpca/optimizer.hpp"
#include "stpca/parallel.hpp"

namespace stpca {

/// Pairwise cosines used by the stress are clamped to this band.
inline constexpr double stress_cosine_clamp = 1.0 - 1e-12;

enum class RadiusMode { fixed, joint };

struct StressProblem {
  DistanceMatrix torus_distances;
  Eigen::Index d = 0;
  RadiusMode radius_mode = RadiusMode::joint;
  double initial_radius = 1.0;

  void validate() const {
    const Eigen::Index n = torus_distances.size();
    if (d < 1) throw std::invalid_argument("StressProblem: dimension must be >= 1");
    if (n < d + 2) throw std::invalid_argument("StressProblem: need at least d + 2 points");
    if (!(initial_radius > 0.0)) throw std::invalid_argument("StressProblem: initial radius must be positive");
  }
};

struct SmdsOptions {
  /// Relative stress improvement per iteration below which the solver stops.
  double tolerance = 5e-2;
  /// Function-evaluation cap; 0 means 500 * n * (d+1).
  std::size_t max_evaluations = 0;
  std::size_t max_iterations = 100000;
};

struct SmdsSolution {
  Eigen::MatrixXd configuration;  ///< n x (d+1), rows on S^d_{fitted_radius}
  double fitted_radius = 0.0;
  double stress = 0.0;
  double initial_stress = 0.0;
  double initial_radius = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

struct StressEvaluation {
  double value = 0.0;
  Eigen::MatrixXd grad_z;  ///< same shape as z
  double grad_r = 0.0;
};

namespace detail {

inline Eigen::MatrixXd unit_rows(const Eigen::Ref<const Eigen::MatrixXd>& z, Eigen::VectorXd& norms) {
  norms = z.rowwise().norm();
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    if (!(norms[i] > 0.0) || !std::isfinite(norms[i]))
      throw std::invalid_argument("stress: configuration point " + std::to_string(i) + " is at the origin");
  return norms.cwiseInverse().asDiagonal() * z;
}

inline void check_shapes(const Eigen::Ref<const Eigen::MatrixXd>& z, const DistanceMatrix& dist) {
  if (z.rows() != dist.size()) throw std::invalid_argument("stress: configuration and distance matrix sizes differ");
  if (z.rows() < 2) throw std::invalid_argument("stress: need at least two points");
}

// Row sums are accumulated independently and reduced in row order, so the
// value does not depend on the number of worker threads.
inline StressEvaluation evaluate_stress(const Eigen::Ref<const Eigen::MatrixXd>& z, double r, const DistanceMatrix& dist, bool with_gradient) {
  check_shapes(z, dist);
  const Eigen::Index n = z.rows();
  Eigen::VectorXd norms;
  const Eigen::MatrixXd u = unit_rows(z, norms);
  const Eigen::MatrixXd& delta = dist.entries();

  Eigen::VectorXd row_sq(n), row_dr(n);
  Eigen::MatrixXd weights;
  if (with_gradient) weights = Eigen::MatrixXd::Zero(n, n);

  parallel_for(static_cast<std::size_t>(n), [&](std::size_t ii) {
    const auto i = static_cast<Eigen::Index>(ii);
    double sq = 0.0, dr = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double raw = u.row(i).dot(u.row(j));
      const double c = std::clamp(raw, -stress_cosine_clamp, stress_cosine_clamp);
      const double a = std::acos(c);
      const double e = delta(i, j) - r * a;
      sq += e * e;
      if (with_gradient) {
        dr += -2.0 * e * a;
        if (raw == c) weights(i, j) = e * r / std::sqrt(1.0 - c * c);
      }
    }
    row_sq[i] = sq;
    row_dr[i] = dr;
  });

  StressEvaluation out;
  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(n - 1));
  double total = 0.0, total_dr = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    total += row_sq[i];
    total_dr += row_dr[i];
  }
  out.value = total * norm;
  if (with_gradient) {
    out.grad_r = total_dr * norm;
    // d c_ij / d z_i = (u_j - c_ij u_i) / |z_i|; both ordered pairs contribute.
    out.grad_z = weights * u;
    for (Eigen::Index i = 0; i < n; ++i) {
      double wc = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i || weights(i, j) == 0.0) continue;
        wc += weights(i, j) * u.row(i).dot(u.row(j));
      }
      out.grad_z.row(i) = (out.grad_z.row(i) - wc * u.row(i)) * (4.0 * norm / norms[i]);
    }
  }
  return out;
}

}  // namespace detail

/// Normalized geodesic stress (1/(n(n-1))) sum_{i != j} (delta_ij - r arccos(cos_ij))^2.
inline double stress(const Eigen::Ref<const Eigen::MatrixXd>& z, double r, const DistanceMatrix& dist) {
  return detail::evaluate_stress(z, r, dist, false).value;
}

/// Stress with its exact gradient in z and r. Pairs whose cosine hits the
/// clamp contribute nothing to the z-gradient.
inline StressEvaluation stress_gradient(const Eigen::Ref<const Eigen::MatrixXd>& z, double r, const DistanceMatrix& dist) {
  return detail::evaluate_stress(z, r, dist, true);
}

/// Rotates the configuration so that its first point lies on the positive last axis.
inline Eigen::MatrixXd gauge_fix(const Eigen::Ref<const Eigen::MatrixXd>& configuration) {
  if (configuration.rows() < 1) throw std::invalid_argument("gauge_fix: empty configuration");
  const Eigen::VectorXd first = configuration.row(0).transpose();
  const double norm = first.norm();
  if (!(norm > 0.0)) throw std::invalid_argument("gauge_fix: first point is at the origin");
  const Eigen::MatrixXd rot = rotation_matrix_to_north_pole(first / norm);
  Eigen::MatrixXd out = configuration * rot.transpose();
  out.row(0).setZero();
  out(0, out.cols() - 1) = norm;
  return out;
}

/// Minimizes the geodesic stress over (s, z_2, ..., z_n) with z_1 = (0, ..., 0, s),
/// and over the radius as well in joint mode. s is parametrized as exp(u).
inline SmdsSolution solve_smds(const StressProblem& problem, const Eigen::Ref<const Eigen::MatrixXd>& init, const SmdsOptions& options = {}) {
  problem.validate();
  const Eigen::Index n = problem.torus_distances.size();
  const Eigen::Index m = problem.d + 1;
  if (init.rows() != n || init.cols() != m) throw std::invalid_argument("solve_smds: initial configuration has the wrong shape");
  const bool joint = problem.radius_mode == RadiusMode::joint;
  const DistanceMatrix& dist = problem.torus_distances;

  Eigen::MatrixXd start = gauge_fix(init);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = start.row(i).norm();
    if (!(norm > 0.0)) throw std::invalid_argument("solve_smds: initial point at the origin");
    start.row(i) /= norm;
  }

  const Eigen::Index nparam = 1 + (n - 1) * m + (joint ? 1 : 0);
  auto unpack = [&](const Eigen::VectorXd& x, Eigen::MatrixXd& z, double& r) {
    z.resize(n, m);
    z.row(0).setZero();
    z(0, m - 1) = std::exp(x[0]);
    for (Eigen::Index i = 1; i < n; ++i) z.row(i) = x.segment(1 + (i - 1) * m, m).transpose();
    r = joint ? x[nparam - 1] : problem.initial_radius;
  };

  Eigen::VectorXd x0(nparam);
  x0[0] = 0.0;
  for (Eigen::Index i = 1; i < n; ++i) x0.segment(1 + (i - 1) * m, m) = start.row(i).transpose();
  if (joint) x0[nparam - 1] = problem.initial_radius;

  Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) -> double {
    Eigen::MatrixXd z;
    double r = 0.0;
    unpack(x, z, r);
    if (!(r > 0.0)) return std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 1; i < n; ++i)
      if (!(z.row(i).squaredNorm() > 0.0)) return std::numeric_limits<double>::infinity();
    if (!grad) return stress(z, r, dist);
    const StressEvaluation ev = stress_gradient(z, r, dist);
    grad->resize(nparam);
    (*grad)[0] = ev.grad_z(0, m - 1) * z(0, m - 1);
    for (Eigen::Index i = 1; i < n; ++i) grad->segment(1 + (i - 1) * m, m) = ev.grad_z.row(i).transpose();
    if (joint) (*grad)[nparam - 1] = ev.grad_r;
    return ev.value;
  };

  BfgsOptions bopt;
  bopt.rel_tolerance = options.tolerance;
  bopt.grad_tolerance = 0.0;
  bopt.max_iterations = options.max_iterations;
  bopt.max_evaluations = options.max_evaluations > 0 ? options.max_evaluations : static_cast<std::size_t>(500 * n * m);

  SmdsSolution sol;
  sol.initial_radius = problem.initial_radius;
  sol.initial_stress = stress(start, problem.initial_radius, dist);
  if (!std::isfinite(sol.initial_stress)) throw NumericalFailure("solve_smds: non-finite initial stress", x0);

  const BfgsResult res = minimize_bfgs(objective, x0, bopt);
  Eigen::MatrixXd z;
  double r = 0.0;
  unpack(res.x, z, r);

  sol.fitted_radius = r;
  sol.configuration.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i) sol.configuration.row(i) = z.row(i) * (r / z.row(i).norm());
  sol.configuration.row(0).setZero();
  sol.configuration(0, m - 1) = r;
  sol.stress = stress(sol.configuration, r, dist);
  if (!std::isfinite(sol.stress)) throw NumericalFailure("solve_smds: non-finite final stress", res.x);
  sol.iterations = res.iterations;
  sol.evaluations = res.evaluations;
  sol.converged = res.converged;
  logger().debug("smds: stress {:.6f} -> {:.6f}, r {:.4f} -> {:.4f}, {} iterations ({})", sol.initial_stress, sol.stress,
                 problem.initial_radius, r, res.iterations, res.reason);
  return sol;
}

}  // namespace stpca
