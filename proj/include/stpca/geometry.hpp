#pragma once

// Metric substrate: wrapping and geodesic distances on the flat torus
// [-pi, pi)^d and on spheres of radius r, rotations to the north pole, and
// seeded samplers for both spaces.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace stpca {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

using Rng = std::mt19937_64;

/// Maps a single angle into [-pi, pi).
inline double wrap_angle(double a) {
  double w = a - two_pi * std::floor((a + pi) / two_pi);
  // floor can land one ulp off for inputs just below an odd multiple of pi
  if (w >= pi) w -= two_pi;
  if (w < -pi) w += two_pi;
  return w;
}

/// Signed shortest displacement from b to a on the circle, in [-pi, pi].
/// A difference of exactly half a turn is reported as +pi.
inline double angle_diff(double a, double b) {
  double w = wrap_angle(a - b);
  return w == -pi ? pi : w;
}

class TorusPoint {
public:
  TorusPoint() = default;

  /// Wraps every coordinate into [-pi, pi). Throws on empty or non-finite input.
  explicit TorusPoint(const Eigen::Ref<const Eigen::VectorXd>& angles) : angles_(angles) {
    if (angles_.size() < 1) throw std::invalid_argument("TorusPoint: dimension must be >= 1");
    for (Eigen::Index i = 0; i < angles_.size(); ++i) {
      if (!std::isfinite(angles_[i]))
        throw std::invalid_argument("TorusPoint: non-finite angle at index " + std::to_string(i));
      angles_[i] = wrap_angle(angles_[i]);
    }
  }

  TorusPoint(std::initializer_list<double> angles)
      : TorusPoint(Eigen::Map<const Eigen::VectorXd>(angles.begin(), static_cast<Eigen::Index>(angles.size()))) {}

  const Eigen::VectorXd& angles() const noexcept { return angles_; }
  Eigen::Index dim() const noexcept { return angles_.size(); }
  double operator[](Eigen::Index i) const { return angles_[i]; }

private:
  Eigen::VectorXd angles_;
};

inline TorusPoint wrap(const Eigen::Ref<const Eigen::VectorXd>& angles) { return TorusPoint(angles); }

/// Wraps every entry of a matrix of angles (rows are points).
inline Eigen::MatrixXd wrap_rows(Eigen::MatrixXd angles) {
  for (Eigen::Index i = 0; i < angles.size(); ++i) {
    if (!std::isfinite(angles.data()[i])) throw std::invalid_argument("wrap_rows: non-finite angle");
    angles.data()[i] = wrap_angle(angles.data()[i]);
  }
  return angles;
}

class SpherePoint {
public:
  SpherePoint() = default;

  /// Cartesian point that must already satisfy |‖coords‖ - radius| <= 1e-9 radius.
  SpherePoint(const Eigen::Ref<const Eigen::VectorXd>& coords, double radius) : coords_(coords), radius_(radius) {
    if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("SpherePoint: radius must be positive");
    if (coords_.size() < 2) throw std::invalid_argument("SpherePoint: ambient dimension must be >= 2");
    if (std::abs(coords_.norm() - radius) > 1e-9 * radius)
      throw std::invalid_argument("SpherePoint: coordinates are not on the sphere of the given radius");
  }

  /// Radial projection of a nonzero vector onto the sphere of the given radius.
  static SpherePoint project(const Eigen::Ref<const Eigen::VectorXd>& v, double radius) {
    const double norm = v.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw std::invalid_argument("SpherePoint::project: zero or non-finite vector");
    return SpherePoint(Eigen::VectorXd(v * (radius / norm)), radius);
  }

  const Eigen::VectorXd& coords() const noexcept { return coords_; }
  double radius() const noexcept { return radius_; }
  /// Intrinsic dimension d of S^d.
  Eigen::Index dim() const noexcept { return coords_.size() - 1; }
  Eigen::VectorXd unit() const { return coords_ / radius_; }

private:
  Eigen::VectorXd coords_;
  double radius_ = 1.0;
};

struct RotationToPole {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd source;
};

inline double circle_distance(double phi, double psi) {
  double a = std::fmod(std::abs(phi - psi), two_pi);
  return std::min(a, two_pi - a);
}

inline double torus_distance(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("torus_distance: dimension mismatch");
  double sum = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double c = circle_distance(x[k], y[k]);
    sum += c * c;
  }
  return std::sqrt(sum);
}

inline double torus_distance(const TorusPoint& x, const TorusPoint& y) { return torus_distance(x.angles(), y.angles()); }

inline double clamp_cosine(double c) { return std::clamp(c, -1.0, 1.0); }

/// Geodesic distance r * arccos(x'y / r^2) between two points on S^d_r,
/// evaluated as 2 r atan2(|u - v|, |u + v|) on the unit vectors, which stays
/// accurate for nearly coincident and nearly antipodal pairs.
inline double sphere_distance(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y, double r) {
  if (x.size() != y.size()) throw std::invalid_argument("sphere_distance: dimension mismatch");
  return 2.0 * r * std::atan2((x - y).norm() / r, (x + y).norm() / r);
}

inline double sphere_distance(const SpherePoint& x, const SpherePoint& y) {
  if (std::abs(x.radius() - y.radius()) > 1e-9 * std::max(x.radius(), y.radius()))
    throw std::invalid_argument("sphere_distance: radius mismatch");
  return sphere_distance(x.coords(), y.coords(), x.radius());
}

/// Proper rotation M with M v = e_last for a unit vector v.
///
/// Away from the antipode the rotation acts in the plane spanned by v and the
/// pole. Within 1e-12 of the south pole that plane is ill-defined, so we use
/// the Householder reflection sending v to the pole composed with a sign flip
/// of the first axis (det +1, orthogonal by construction).
inline Eigen::MatrixXd rotation_matrix_to_north_pole(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const Eigen::Index m = v.size();
  if (m < 2) throw std::invalid_argument("rotation_to_north_pole: ambient dimension must be >= 2");
  if (std::abs(v.norm() - 1.0) > 1e-9) throw std::invalid_argument("rotation_to_north_pole: vector is not unit length");
  Eigen::VectorXd pole = Eigen::VectorXd::Zero(m);
  pole[m - 1] = 1.0;
  const double c = v[m - 1];
  if ((v - pole).norm() <= 1e-15) return Eigen::MatrixXd::Identity(m, m);
  if ((v + pole).norm() <= 1e-12) {
    Eigen::VectorXd u = v - pole;
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(m, m) - 2.0 * u * u.transpose() / u.squaredNorm();
    h.row(0) *= -1.0;
    return h;
  }
  Eigen::VectorXd w = pole - v * c;
  w.normalize();
  const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  // R v = cos(a) v + sin(a) w = pole, with cos(a) = c
  Eigen::MatrixXd vw = v * w.transpose();
  return Eigen::MatrixXd::Identity(m, m) + s * (vw.transpose() - vw) + (c - 1.0) * (v * v.transpose() + w * w.transpose());
}

inline RotationToPole rotation_to_north_pole(const SpherePoint& v) {
  Eigen::VectorXd unit = v.unit();
  return {rotation_matrix_to_north_pole(unit), unit};
}

/// n x d matrix of i.i.d. uniform angles in [-pi, pi).
inline Eigen::MatrixXd sample_uniform_torus(Eigen::Index n, Eigen::Index d, Rng& rng) {
  if (n < 1 || d < 1) throw std::invalid_argument("sample_uniform_torus: n and d must be >= 1");
  std::uniform_real_distribution<double> unif(-pi, pi);
  Eigen::MatrixXd out(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) out(i, k) = unif(rng);
  return out;
}

/// n x (d+1) matrix of i.i.d. uniform points on S^d_r (normalized Gaussians).
inline Eigen::MatrixXd sample_uniform_sphere(Eigen::Index n, Eigen::Index d, double r, Rng& rng) {
  if (n < 1 || d < 1) throw std::invalid_argument("sample_uniform_sphere: n and d must be >= 1");
  if (!(r > 0.0)) throw std::invalid_argument("sample_uniform_sphere: radius must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(n, d + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    double norm = 0.0;
    do {
      for (Eigen::Index k = 0; k <= d; ++k) out(i, k) = normal(rng);
      norm = out.row(i).norm();
    } while (norm == 0.0);
    out.row(i) *= r / norm;
  }
  return out;
}

/// Factor B with B B' = sigma for a symmetric positive semidefinite sigma.
/// Uses pivoted LDL'; negative pivots down to -1e-10 (relative to the largest
/// diagonal entry) are treated as zero.
inline Eigen::MatrixXd psd_factor(const Eigen::Ref<const Eigen::MatrixXd>& sigma) {
  const Eigen::Index d = sigma.rows();
  if (sigma.cols() != d) throw std::invalid_argument("covariance must be square");
  if (!sigma.allFinite()) throw std::invalid_argument("covariance has non-finite entries");
  const double scale = std::max(1.0, sigma.diagonal().cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("covariance is not symmetric");
  Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
  if (ldlt.info() != Eigen::Success) throw std::invalid_argument("covariance factorization failed");
  Eigen::VectorXd diag = ldlt.vectorD();
  if (diag.minCoeff() < -1e-10 * scale) throw std::invalid_argument("covariance is not positive semidefinite");
  diag = diag.cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd l = ldlt.matrixL();
  Eigen::MatrixXd b = ldlt.transpositionsP().transpose() * (l * diag.asDiagonal());
  return b;
}

/// n draws of N(mu, sigma) wrapped coordinatewise into [-pi, pi).
inline Eigen::MatrixXd sample_wrapped_normal(Eigen::Index n, const TorusPoint& mu, const Eigen::Ref<const Eigen::MatrixXd>& sigma, Rng& rng) {
  const Eigen::Index d = mu.dim();
  if (sigma.rows() != d) throw std::invalid_argument("sample_wrapped_normal: covariance dimension mismatch");
  const Eigen::MatrixXd b = psd_factor(sigma);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(n, d);
  Eigen::VectorXd z(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) z[k] = normal(rng);
    Eigen::VectorXd x = mu.angles() + b * z;
    for (Eigen::Index k = 0; k < d; ++k) out(i, k) = wrap_angle(x[k]);
  }
  return out;
}

/// Weighted Fréchet objective sum_i w_i * dist(theta, theta_i)^2 on the circle.
inline double circle_frechet_objective(double theta, const std::vector<double>& angles, const std::vector<double>& weights) {
  double f = 0.0;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double c = circle_distance(theta, angles[i]);
    f += weights[i] * c * c;
  }
  return f;
}

/// Global minimizer of the (weighted) Fréchet objective on S^1.
///
/// The objective is piecewise quadratic; its global minimum is the Euclidean
/// mean of the sample unwrapped at some cut between cyclically consecutive
/// angles. Every cut is tried and the best candidate kept (ties go to the
/// smallest angle).
inline double frechet_mean_circle(const std::vector<double>& angles, std::optional<std::vector<double>> weights = std::nullopt) {
  const std::size_t n = angles.size();
  if (n == 0) throw std::invalid_argument("frechet_mean_circle: empty input");
  std::vector<double> w = weights.value_or(std::vector<double>(n, 1.0));
  if (w.size() != n) throw std::invalid_argument("frechet_mean_circle: weight count mismatch");
  double wsum = 0.0;
  for (double wi : w) {
    if (!(wi >= 0.0)) throw std::invalid_argument("frechet_mean_circle: negative weight");
    wsum += wi;
  }
  if (!(wsum > 0.0)) throw std::invalid_argument("frechet_mean_circle: weights sum to zero");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::vector<double> wrapped(n);
  for (std::size_t i = 0; i < n; ++i) wrapped[i] = wrap_angle(angles[i]);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return wrapped[a] < wrapped[b]; });

  // Running weighted sums over the sorted sample; cut k lifts the first k angles by 2pi.
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += w[i] * wrapped[i];

  double best_theta = 0.0;
  double best_value = std::numeric_limits<double>::infinity();
  double lifted = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) lifted += w[order[k - 1]];
    const double candidate = wrap_angle((total + two_pi * lifted) / wsum);
    const double value = circle_frechet_objective(candidate, wrapped, w);
    const double tol = k == 0 ? 0.0 : 1e-12 * std::max(1.0, std::abs(best_value));
    if (k == 0 || value < best_value - tol || (std::abs(value - best_value) <= tol && candidate < best_theta)) {
      best_value = std::min(value, best_value);
      best_theta = candidate;
    }
  }
  return best_theta;
}

}  // namespace stpca
