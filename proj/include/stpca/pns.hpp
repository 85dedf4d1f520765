#pragma once

// Principal Nested Spheres on the unit sphere S^d.
//
// Scores are stored with column 0 holding the signed angle on the innermost
// circle, measured from the backwards mean, and column k-1 (k = 2..d) holding
// the signed residual of the level-k fit, i.e. the geodesic deviation from the
// subsphere S^{k-1} inside S^k. Positive residuals point away from the
// subsphere center. Residuals are unscaled angles on the level sphere.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "stpca/errors.hpp"
#include "stpca/geometry.hpp"
#include "stpca/log.hpp"
#include "stpca/optimizer.hpp"

namespace stpca {

struct Subsphere {
  Eigen::VectorXd center;       ///< unit vector v in R^{level+1}
  double geodesic_radius = 0.0;  ///< in (0, pi/2] after normalization
  int level = 0;                 ///< dimension k of the sphere S^k being reduced
};

struct PnsLevel {
  Subsphere subsphere;
  Eigen::MatrixXd rotation;  ///< rotation taking the center to the north pole
};

struct PnsModel {
  int d = 0;
  std::vector<PnsLevel> levels;  ///< outermost (level d) first, level 2 last
  double mean_angle = 0.0;       ///< backwards mean on the innermost circle
  Eigen::VectorXd backwards_mean;
  Eigen::MatrixXd scores;  ///< n x d
  Eigen::VectorXd sphere_variances;
  Eigen::VectorXd sphere_proportions;
  bool degenerate = false;
  /// Ambient radius of each nested sphere: entry k is the radius of S^k in S^d
  /// (product of sin r_j over the enclosing levels); entry d is 1.
  Eigen::VectorXd nested_radii;

  const PnsLevel& level(int k) const { return levels.at(static_cast<std::size_t>(d - k)); }
};

struct ScoreVector {
  Eigen::VectorXd xi;
};

struct VarianceDecomposition {
  Eigen::VectorXd variances;
  Eigen::VectorXd proportions;
  bool degenerate = false;
};

struct SubsphereProjection {
  Eigen::VectorXd projection;
  double signed_residual = 0.0;
};

namespace detail {

// Angle between a unit vector and v, robust near 0 and pi.
inline double angle_from(const Eigen::VectorXd& y, const Eigen::VectorXd& v) {
  const double c = v.dot(y);
  return std::atan2((y - c * v).norm(), c);
}

}  // namespace detail

/// Sum of squared deviations of the angles to v from rho.
inline double subsphere_objective(const Eigen::Ref<const Eigen::MatrixXd>& points, const Eigen::VectorXd& v, double rho) {
  double f = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double e = detail::angle_from(points.row(i).transpose(), v) - rho;
    f += e * e;
  }
  return f;
}

/// Least-squares small subsphere {x : angle(x, v) = rho} through points on S^k.
///
/// The radius is profiled out (rho = mean angle), and the center is optimized
/// by BFGS on an unnormalized vector. Starting centers are the
/// smallest-eigenvalue eigenvectors of the raw second-moment matrix and of the
/// centered covariance, each with both signs.
inline Subsphere fit_subsphere(const Eigen::Ref<const Eigen::MatrixXd>& points) {
  const Eigen::Index n = points.rows();
  const Eigen::Index m = points.cols();
  const int k = static_cast<int>(m) - 1;
  if (k < 1) throw std::invalid_argument("fit_subsphere: ambient dimension must be >= 2");
  if (n < k + 2) throw std::invalid_argument("fit_subsphere: need at least k + 2 points");
  double spread = 0.0;
  for (Eigen::Index i = 1; i < n; ++i) spread = std::max(spread, (points.row(i) - points.row(0)).norm());
  if (spread <= 1e-12) throw std::invalid_argument("fit_subsphere: all points coincide");

  auto profile = [&](const Eigen::VectorXd& w, Eigen::VectorXd* grad) -> double {
    const double norm = w.norm();
    if (!(norm > 0.0)) return std::numeric_limits<double>::infinity();
    const Eigen::VectorXd v = w / norm;
    Eigen::VectorXd theta(n);
    for (Eigen::Index i = 0; i < n; ++i) theta[i] = detail::angle_from(points.row(i).transpose(), v);
    const double rho = theta.mean();
    const double f = (theta.array() - rho).square().sum();
    if (grad) {
      grad->setZero(m);
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd y = points.row(i).transpose();
        const double c = v.dot(y);
        const Eigen::VectorXd tangent = y - c * v;
        const double s = tangent.norm();
        if (s < 1e-12) continue;
        *grad -= (2.0 * (theta[i] - rho) / (s * norm)) * tangent;
      }
    }
    return f;
  };

  std::vector<Eigen::VectorXd> starts;
  {
    const Eigen::MatrixXd second = points.transpose() * points;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(second);
    starts.push_back(eig.eigenvectors().col(0));
    starts.push_back(-eig.eigenvectors().col(0));
    const Eigen::MatrixXd centered = points.rowwise() - points.colwise().mean();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ceig(centered.transpose() * centered);
    starts.push_back(ceig.eigenvectors().col(0));
    starts.push_back(-ceig.eigenvectors().col(0));
  }

  BfgsOptions opt;
  opt.rel_tolerance = 1e-10;
  opt.grad_tolerance = 1e-14;
  opt.max_iterations = 200;

  Eigen::VectorXd best_v;
  double best_f = std::numeric_limits<double>::infinity();
  for (const auto& start : starts) {
    const BfgsResult res = minimize_bfgs(profile, start, opt);
    if (res.value < best_f) {
      best_f = res.value;
      best_v = res.x.normalized();
    }
  }
  if (!std::isfinite(best_f)) throw NumericalFailure("fit_subsphere: optimization failed");

  Subsphere s;
  s.level = k;
  s.center = best_v;
  double rho = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) rho += detail::angle_from(points.row(i).transpose(), best_v);
  rho /= static_cast<double>(n);
  if (rho > pi / 2) {
    s.center = -best_v;
    rho = pi - rho;
  }
  s.geodesic_radius = rho;
  return s;
}

namespace detail {

// Direction of the rotated point within the first k coordinates, with a fixed
// meridian for points at the center or its antipode.
inline Eigen::VectorXd meridian_direction(const Eigen::VectorXd& rotated) {
  const Eigen::Index k = rotated.size() - 1;
  Eigen::VectorXd a = rotated.head(k);
  const double s = a.norm();
  if (s < 1e-12) {
    a.setZero();
    a[0] = 1.0;
    return a;
  }
  return a / s;
}

}  // namespace detail

/// Nearest point of the subsphere to y, moving along the great circle through
/// the center, and the signed residual angle(y, v) - r.
inline SubsphereProjection project_to_subsphere(const Eigen::VectorXd& y, const Subsphere& s, const Eigen::MatrixXd& rotation) {
  const Eigen::VectorXd q = rotation * y;
  const Eigen::Index k = q.size() - 1;
  const double sin_part = q.head(k).norm();
  const double theta = std::atan2(sin_part, q[k]);
  SubsphereProjection out;
  Eigen::VectorXd proj(k + 1);
  proj.head(k) = std::sin(s.geodesic_radius) * detail::meridian_direction(q);
  proj[k] = std::cos(s.geodesic_radius);
  out.projection = rotation.transpose() * proj;
  out.signed_residual = theta - s.geodesic_radius;
  if (sin_part < 1e-12) out.signed_residual = std::abs(out.signed_residual);
  return out;
}

inline SubsphereProjection project_to_subsphere(const Eigen::VectorXd& y, const Subsphere& s) {
  return project_to_subsphere(y, s, rotation_matrix_to_north_pole(s.center));
}

/// Maps points of S^k onto the unit S^{k-1} through the subsphere: rotate the
/// center to the pole, project, and rescale the first k coordinates by 1/sin r.
inline Eigen::MatrixXd descend(const Eigen::Ref<const Eigen::MatrixXd>& points, const Subsphere& s, const Eigen::MatrixXd& rotation) {
  if (std::sin(s.geodesic_radius) < 1e-6)
    throw DegenerateSubsphere("descend: subsphere at level " + std::to_string(s.level) + " has collapsed to a point");
  const Eigen::Index k = points.cols() - 1;
  Eigen::MatrixXd out(points.rows(), k);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Eigen::VectorXd q = rotation * points.row(i).transpose();
    out.row(i) = detail::meridian_direction(q).transpose();
  }
  return out;
}

inline Eigen::MatrixXd descend(const Eigen::Ref<const Eigen::MatrixXd>& points, const Subsphere& s) {
  return descend(points, s, rotation_matrix_to_north_pole(s.center));
}

/// Inverse of one descent step: lifts a unit point of S^{k-1} back to S^k at
/// signed residual xi from the subsphere.
inline Eigen::VectorXd ascend(const Eigen::VectorXd& inner, double xi, const PnsLevel& lvl) {
  const double theta = lvl.subsphere.geodesic_radius + xi;
  Eigen::VectorXd q(inner.size() + 1);
  q.head(inner.size()) = std::sin(theta) * inner;
  q[inner.size()] = std::cos(theta);
  return lvl.rotation.transpose() * q;
}

/// h: unit point of S^d to its score vector.
inline ScoreVector pns_forward(const Eigen::VectorXd& y, const PnsModel& model) {
  if (y.size() != model.d + 1) throw std::invalid_argument("pns_forward: dimension mismatch");
  ScoreVector out;
  out.xi.resize(model.d);
  Eigen::VectorXd cur = y.normalized();
  for (const PnsLevel& lvl : model.levels) {
    const Eigen::VectorXd q = lvl.rotation * cur;
    const Eigen::Index k = q.size() - 1;
    const double sin_part = q.head(k).norm();
    double residual = std::atan2(sin_part, q[k]) - lvl.subsphere.geodesic_radius;
    if (sin_part < 1e-12) residual = std::abs(residual);
    out.xi[lvl.subsphere.level - 1] = residual;
    cur = detail::meridian_direction(q);
  }
  out.xi[0] = wrap_angle(std::atan2(cur[1], cur[0]) - model.mean_angle);
  return out;
}

namespace detail {

// h~ without the domain check; fitted residuals can exceed a right angle.
inline Eigen::VectorXd lift_scores(const Eigen::VectorXd& xi, const PnsModel& model) {
  const double phi = model.mean_angle + xi[0];
  Eigen::VectorXd cur(2);
  cur << std::cos(phi), std::sin(phi);
  for (auto it = model.levels.rbegin(); it != model.levels.rend(); ++it) cur = ascend(cur, xi[it->subsphere.level - 1], *it);
  return cur;
}

}  // namespace detail

/// h~: score vector to unit point of S^d. Rejects scores outside
/// E = [-pi, pi) x [-pi/2, pi/2]^{d-1}.
inline Eigen::VectorXd pns_inverse(const ScoreVector& score, const PnsModel& model) {
  const Eigen::VectorXd& xi = score.xi;
  if (xi.size() != model.d) throw std::invalid_argument("pns_inverse: score dimension mismatch");
  constexpr double slack = 1e-12;
  if (!std::isfinite(xi[0]) || xi[0] < -pi - slack || xi[0] > pi + slack)
    throw std::invalid_argument("pns_inverse: first score outside [-pi, pi)");
  for (Eigen::Index k = 1; k < xi.size(); ++k)
    if (!std::isfinite(xi[k]) || std::abs(xi[k]) > pi / 2 + slack)
      throw std::invalid_argument("pns_inverse: score " + std::to_string(k + 1) + " outside [-pi/2, pi/2]");
  return detail::lift_scores(xi, model);
}

/// Per-component variances sum_i dist(y_i^(k-1), y_i^(k))^2 on the unit
/// sphere, where y^(k) is the projection onto the k-dimensional nested sphere
/// and y^(0) the backwards mean.
inline VarianceDecomposition sphere_variance_decomposition(const PnsModel& model, const Eigen::Ref<const Eigen::MatrixXd>& points) {
  const int d = model.d;
  VarianceDecomposition out;
  out.variances = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Eigen::VectorXd y = points.row(i).transpose().normalized();
    const ScoreVector full = pns_forward(y, model);
    Eigen::VectorXd prev = model.backwards_mean;
    for (int k = 1; k <= d; ++k) {
      Eigen::VectorXd cur;
      if (k == d) {
        cur = y;
      } else {
        ScoreVector partial{Eigen::VectorXd::Zero(d)};
        partial.xi.head(k) = full.xi.head(k);
        cur = detail::lift_scores(partial.xi, model);
      }
      const double dist = sphere_distance(prev, cur, 1.0);
      out.variances[k - 1] += dist * dist;
      prev = cur;
    }
  }
  const double total = out.variances.sum();
  out.degenerate = !(total > 0.0);
  out.proportions = out.degenerate ? Eigen::VectorXd::Zero(d) : Eigen::VectorXd(out.variances / total);
  return out;
}

/// Fits the nested sequence S^{d-1} > ... > S^1 > {mean} to unit points of S^d
/// (rows of an n x (d+1) matrix) and computes scores and variances.
inline PnsModel fit_pns(const Eigen::Ref<const Eigen::MatrixXd>& points) {
  const Eigen::Index n = points.rows();
  const int d = static_cast<int>(points.cols()) - 1;
  if (d < 1) throw std::invalid_argument("fit_pns: points must live in R^{d+1} with d >= 1");
  if (n < d + 2) throw std::invalid_argument("fit_pns: need at least d + 2 points");
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::abs(points.row(i).norm() - 1.0) > 1e-9) throw std::invalid_argument("fit_pns: point " + std::to_string(i) + " is not unit length");

  PnsModel model;
  model.d = d;
  model.scores.resize(n, d);
  model.nested_radii = Eigen::VectorXd::Ones(d + 1);

  Eigen::MatrixXd cur = points;
  for (int k = d; k >= 2; --k) {
    PnsLevel lvl;
    lvl.subsphere = fit_subsphere(cur);
    lvl.rotation = rotation_matrix_to_north_pole(lvl.subsphere.center);
    for (Eigen::Index i = 0; i < n; ++i)
      model.scores(i, k - 1) = project_to_subsphere(cur.row(i).transpose(), lvl.subsphere, lvl.rotation).signed_residual;
    cur = descend(cur, lvl.subsphere, lvl.rotation);
    model.nested_radii[k - 1] = model.nested_radii[k] * std::sin(lvl.subsphere.geodesic_radius);
    logger().debug("pns: level {} center radius {:.6f}", k, lvl.subsphere.geodesic_radius);
    model.levels.push_back(std::move(lvl));
  }

  std::vector<double> angles(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) angles[static_cast<std::size_t>(i)] = std::atan2(cur(i, 1), cur(i, 0));
  model.mean_angle = frechet_mean_circle(angles);
  for (Eigen::Index i = 0; i < n; ++i) model.scores(i, 0) = wrap_angle(angles[static_cast<std::size_t>(i)] - model.mean_angle);
  model.backwards_mean = pns_inverse(ScoreVector{Eigen::VectorXd::Zero(d)}, model);

  for (Eigen::Index i = 0; i < n; ++i)
    for (int k = 1; k < d; ++k)
      if (std::abs(model.scores(i, k)) > pi / 2)
        logger().warn("pns: point {} lies more than a right angle from the level-{} subsphere", i, k + 1);

  const VarianceDecomposition var = sphere_variance_decomposition(model, points);
  model.sphere_variances = var.variances;
  model.sphere_proportions = var.proportions;
  model.degenerate = var.degenerate;
  return model;
}

}  // namespace stpca
