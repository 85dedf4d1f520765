#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "stpca/errors.hpp"
#include "stpca/geometry.hpp"
#include "stpca/log.hpp"
#include "stpca/parallel.hpp"

namespace stpca {

enum class DistanceSource { torus, sphere, generic };

/// Symmetric, nonnegative, zero-diagonal matrix of pairwise distances.
class DistanceMatrix {
public:
  DistanceMatrix() = default;

  explicit DistanceMatrix(Eigen::MatrixXd entries, DistanceSource source = DistanceSource::generic)
      : entries_(std::move(entries)), source_(source) {
    const Eigen::Index n = entries_.rows();
    if (entries_.cols() != n) throw std::invalid_argument("DistanceMatrix: matrix must be square");
    if (!entries_.allFinite()) throw std::invalid_argument("DistanceMatrix: non-finite entry");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (entries_(i, i) != 0.0) throw std::invalid_argument("DistanceMatrix: nonzero diagonal");
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (entries_(i, j) < 0.0) throw std::invalid_argument("DistanceMatrix: negative entry");
        if (entries_(i, j) != entries_(j, i)) throw std::invalid_argument("DistanceMatrix: not symmetric");
      }
    }
  }

  const Eigen::MatrixXd& entries() const noexcept { return entries_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }
  Eigen::Index size() const noexcept { return entries_.rows(); }
  DistanceSource source() const noexcept { return source_; }

  /// The n(n-1)/2 entries above the diagonal, row by row.
  std::vector<double> upper_triangle() const {
    std::vector<double> out;
    const Eigen::Index n = size();
    out.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) out.push_back(entries_(i, j));
    return out;
  }

private:
  Eigen::MatrixXd entries_;
  DistanceSource source_ = DistanceSource::generic;
};

struct EmbeddabilityReport {
  bool feasible_bound = false;
  double gram_min_eigenvalue = 0.0;
  bool psd = false;
  /// rank(G) - 1; empty when rank(G) = 1 (embedding dimension undefined).
  std::optional<int> intrinsic_dim;
  int gram_rank = 0;
  double radius_tested = 0.0;
};

/// Pairwise torus distances between the rows of an n x d angle matrix.
inline DistanceMatrix pairwise_torus_distances(const Eigen::Ref<const Eigen::MatrixXd>& points) {
  const Eigen::Index n = points.rows();
  if (n < 2) throw std::invalid_argument("pairwise_torus_distances: need at least two points");
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t ii) {
    const auto i = static_cast<Eigen::Index>(ii);
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = torus_distance(points.row(i).transpose(), points.row(j).transpose());
  });
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(j, i) = d(i, j);
  return DistanceMatrix(std::move(d), DistanceSource::torus);
}

inline DistanceMatrix pairwise_torus_distances(const std::vector<TorusPoint>& points) {
  if (points.empty()) throw std::invalid_argument("pairwise_torus_distances: empty input");
  const Eigen::Index d = points.front().dim();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(points.size()), d);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].dim() != d) throw std::invalid_argument("pairwise_torus_distances: dimension mismatch");
    m.row(static_cast<Eigen::Index>(i)) = points[i].angles().transpose();
  }
  return pairwise_torus_distances(m);
}

/// Pairwise geodesic distances between the rows of an n x (d+1) matrix of points on S^d_r.
inline DistanceMatrix pairwise_sphere_distances(const Eigen::Ref<const Eigen::MatrixXd>& points, double r) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = sphere_distance(points.row(i).transpose(), points.row(j).transpose(), r);
  return DistanceMatrix(std::move(d), DistanceSource::sphere);
}

/// Schoenberg-type spherical embeddability diagnostics for a distance matrix at radius r.
inline EmbeddabilityReport check_spherical_embeddability(const DistanceMatrix& dist, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("check_spherical_embeddability: radius must be positive");
  EmbeddabilityReport rep;
  rep.radius_tested = r;
  const Eigen::MatrixXd& d = dist.entries();
  rep.feasible_bound = d.size() == 0 || d.maxCoeff() <= pi * r;
  const Eigen::MatrixXd gram = (d / r).array().cos().matrix();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& values = eig.eigenvalues();
  rep.gram_min_eigenvalue = values.minCoeff();
  const double tol = 1e-8 * gram.cwiseAbs().maxCoeff();
  rep.psd = rep.gram_min_eigenvalue >= -tol;
  const double rank_tol = 1e-8 * values.cwiseAbs().maxCoeff();
  rep.gram_rank = static_cast<int>((values.array() > rank_tol).count());
  if (rep.gram_rank > 1) rep.intrinsic_dim = rep.gram_rank - 1;
  return rep;
}

/// Torgerson classical MDS: n x p coordinates from the top-p eigenpairs of
/// -1/2 J D^2 J. Negative eigenvalues are clamped to zero; each eigenvector is
/// signed so that its largest-magnitude entry is positive.
inline Eigen::MatrixXd classical_mds(const DistanceMatrix& dist, Eigen::Index p) {
  const Eigen::Index n = dist.size();
  if (p < 1 || p > n - 1) throw std::invalid_argument("classical_mds: target dimension must be in [1, n-1]");
  const Eigen::MatrixXd sq = dist.entries().array().square().matrix();
  // Double centering without forming J explicitly.
  const Eigen::VectorXd row_mean = sq.rowwise().mean();
  const double grand_mean = row_mean.mean();
  Eigen::MatrixXd b(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) b(i, j) = -0.5 * (sq(i, j) - row_mean[i] - row_mean[j] + grand_mean);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
  if (eig.info() != Eigen::Success) throw NumericalFailure("classical_mds: eigendecomposition failed");
  Eigen::MatrixXd out(n, p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const Eigen::Index col = n - 1 - k;  // eigenvalues are ascending
    Eigen::VectorXd v = eig.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    out.col(k) = v * std::sqrt(std::max(0.0, eig.eigenvalues()[col]));
  }
  return out;
}

/// Radial projection of each row onto S^d_r. Rows within 1e-12 of the origin
/// are replaced by a random unit direction drawn from rng.
inline Eigen::MatrixXd project_to_sphere(const Eigen::Ref<const Eigen::MatrixXd>& points, double r, Rng& rng) {
  if (!(r > 0.0)) throw std::invalid_argument("project_to_sphere: radius must be positive");
  Eigen::MatrixXd out(points.rows(), points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double norm = points.row(i).norm();
    if (norm <= 1e-12) {
      logger().info("project_to_sphere: point {} is at the origin, using a random direction", i);
      out.row(i) = sample_uniform_sphere(1, points.cols() - 1, r, rng).row(0);
    } else {
      out.row(i) = points.row(i) * (r / norm);
    }
  }
  return out;
}

}  // namespace stpca
