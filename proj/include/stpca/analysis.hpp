#pragma once

// Diagnostics for first scores: circular kernel density estimation with
// mode clustering, Watson's U^2 test of uniformity, and a linear fit for
// curves on the torus.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "stpca/geometry.hpp"
#include "stpca/parallel.hpp"

namespace stpca {

/// Wrapped Gaussian kernel density estimate on the circle, with the kernel
/// truncated at three windings on either side.
class CircularKde {
public:
  static constexpr int windings = 3;
  static constexpr double max_bandwidth = pi;

  CircularKde(std::vector<double> angles, double bandwidth) : sample_(std::move(angles)), bandwidth_(bandwidth) {
    if (sample_.size() < 2) throw std::invalid_argument("circular_kde: need at least two angles");
    if (!(bandwidth_ > 0.0) || bandwidth_ > max_bandwidth) throw std::invalid_argument("circular_kde: bandwidth must be in (0, pi]");
    for (double& a : sample_) {
      if (!std::isfinite(a)) throw std::invalid_argument("circular_kde: non-finite angle");
      a = wrap_angle(a);
    }
  }

  const std::vector<double>& sample() const noexcept { return sample_; }
  double bandwidth() const noexcept { return bandwidth_; }

  double density(double theta) const { return evaluate(theta, false); }
  double derivative(double theta) const { return evaluate(theta, true); }

private:
  double evaluate(double theta, bool derivative) const {
    const double h = bandwidth_;
    const double norm = 1.0 / (std::sqrt(two_pi) * h * static_cast<double>(sample_.size()));
    double sum = 0.0;
    for (double a : sample_) {
      const double base = angle_diff(theta, a);
      for (int k = -windings; k <= windings; ++k) {
        const double x = (base + two_pi * k) / h;
        const double g = std::exp(-0.5 * x * x);
        sum += derivative ? -x / h * g : g;
      }
    }
    return sum * norm;
  }

  std::vector<double> sample_;
  double bandwidth_;
};

/// Circular standard deviation sqrt(-2 log R), infinite for a balanced sample.
inline double circular_sd(const std::vector<double>& angles) {
  double c = 0.0, s = 0.0;
  for (double a : angles) {
    c += std::cos(a);
    s += std::sin(a);
  }
  const double rbar = std::hypot(c, s) / static_cast<double>(angles.size());
  if (!(rbar > 0.0)) return std::numeric_limits<double>::infinity();
  return std::sqrt(-2.0 * std::log(std::min(rbar, 1.0)));
}

/// Default bandwidth sigma_c * n^(-1/7), capped at pi/2. A sample with zero
/// circular spread falls back to the cap divided by n^(1/7) as well.
inline double default_bandwidth(const std::vector<double>& angles) {
  const double n = static_cast<double>(angles.size());
  double sd = circular_sd(angles);
  if (!(sd > 0.0)) sd = 1e-3;
  return std::min(sd * std::pow(n, -1.0 / 7.0), pi / 2);
}

inline CircularKde circular_kde(const std::vector<double>& angles, std::optional<double> bandwidth = std::nullopt) {
  if (angles.size() < 2) throw std::invalid_argument("circular_kde: need at least two angles");
  return CircularKde(angles, bandwidth ? *bandwidth : default_bandwidth(angles));
}

struct ClusterAssignment {
  std::vector<int> labels;
  std::vector<double> modes;            ///< ascending in [-pi, pi)
  std::vector<double> basin_boundaries;  ///< antimodes, ascending in [-pi, pi)
  bool degenerate = false;
};

namespace detail {

// Bisection for a sign change of the density derivative on [a, b] (b may exceed pi).
inline double refine_critical_point(const CircularKde& kde, double a, double b) {
  double fa = kde.derivative(a);
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (a + b);
    const double fm = kde.derivative(mid);
    if ((fa > 0.0) == (fm > 0.0)) {
      a = mid;
      fa = fm;
    } else {
      b = mid;
    }
  }
  return wrap_angle(0.5 * (a + b));
}

}  // namespace detail

/// Clusters the KDE sample by the basins of attraction of the density modes.
/// Critical points are located on a circular grid and refined by bisection
/// on the derivative; basins are the arcs between consecutive antimodes.
inline ClusterAssignment mode_cluster(const CircularKde& kde, int grid = 2048) {
  if (grid < 8) throw std::invalid_argument("mode_cluster: grid must have at least 8 points");
  const std::size_t g = static_cast<std::size_t>(grid);
  const double step = two_pi / grid;
  std::vector<double> f(g);
  parallel_for(g, [&](std::size_t j) { f[j] = kde.density(-pi + step * static_cast<double>(j)); });

  ClusterAssignment out;
  const std::size_t n = kde.sample().size();
  out.labels.assign(n, 0);
  const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
  if (*hi - *lo < 1e-12) {
    out.degenerate = true;
    return out;
  }

  for (std::size_t j = 0; j < g; ++j) {
    const double prev = f[(j + g - 1) % g];
    const double next = f[(j + 1) % g];
    const double a = -pi + step * (static_cast<double>(j) - 1.0);
    const double b = -pi + step * (static_cast<double>(j) + 1.0);
    if (f[j] > prev && f[j] >= next) out.modes.push_back(detail::refine_critical_point(kde, a, b));
    if (f[j] < prev && f[j] <= next) out.basin_boundaries.push_back(detail::refine_critical_point(kde, a, b));
  }
  std::sort(out.modes.begin(), out.modes.end());
  std::sort(out.basin_boundaries.begin(), out.basin_boundaries.end());
  if (out.modes.size() <= 1) return out;

  // Each arc (b_k, b_{k+1}) holds exactly one mode; label points by the arc they fall in.
  const auto& bounds = out.basin_boundaries;
  auto mode_index = [&](double theta) {
    auto it = std::upper_bound(bounds.begin(), bounds.end(), theta);
    const double start = it == bounds.begin() ? bounds.back() : *(it - 1);
    const double end = it == bounds.end() ? bounds.front() : *it;
    double arc = end - start;
    if (arc <= 0.0) arc += two_pi;
    for (std::size_t m = 0; m < out.modes.size(); ++m) {
      double offset = out.modes[m] - start;
      if (offset < 0.0) offset += two_pi;
      if (offset <= arc) return static_cast<int>(m);
    }
    return 0;
  };
  for (std::size_t i = 0; i < n; ++i) out.labels[i] = mode_index(kde.sample()[i]);
  return out;
}

/// Fraction of points whose label matches the ground truth under the best
/// one-to-one relabeling (exhaustive over permutations of the smaller label set).
inline double classification_rate(const std::vector<int>& labels, const std::vector<int>& truth) {
  if (labels.size() != truth.size() || labels.empty()) throw std::invalid_argument("classification_rate: length mismatch");
  const int a = *std::max_element(labels.begin(), labels.end()) + 1;
  const int b = *std::max_element(truth.begin(), truth.end()) + 1;
  if (*std::min_element(labels.begin(), labels.end()) < 0 || *std::min_element(truth.begin(), truth.end()) < 0)
    throw std::invalid_argument("classification_rate: labels must be nonnegative");
  const int k = std::max(a, b);
  if (k > 9) throw std::invalid_argument("classification_rate: too many clusters for exhaustive matching");
  std::vector<std::vector<int>> confusion(static_cast<std::size_t>(k), std::vector<int>(static_cast<std::size_t>(k), 0));
  for (std::size_t i = 0; i < labels.size(); ++i) ++confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(truth[i])];
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  int best = 0;
  do {
    int hits = 0;
    for (int l = 0; l < k; ++l) hits += confusion[static_cast<std::size_t>(l)][static_cast<std::size_t>(perm[static_cast<std::size_t>(l)])];
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(labels.size());
}

struct UniformityTest {
  double statistic = 0.0;
  double p_value = 0.0;
};

/// Upper tail of the asymptotic null distribution of U^2, 10-term series.
/// For small U^2 the alternating series does not converge in 10 terms, so the
/// equivalent theta-function form of the distribution function is used there.
inline double watson_p_value(double u2) {
  if (!(u2 > 0.0)) return 1.0;
  const double x = pi * std::sqrt(u2);
  double sum = 0.0;
  if (x < 1.0) {
    for (int k = 1; k <= 10; ++k) {
      const double j = 2.0 * k - 1.0;
      sum += std::exp(-j * j * pi * pi / (8.0 * x * x));
    }
    return std::clamp(1.0 - std::sqrt(two_pi) / x * sum, 0.0, 1.0);
  }
  for (int k = 1; k <= 10; ++k) sum += (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * pi * pi * u2);
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// Watson's U^2 test of circular uniformity.
inline UniformityTest watson_uniformity_test(const std::vector<double>& angles) {
  const std::size_t n = angles.size();
  if (n < 10) throw std::invalid_argument("watson_uniformity_test: need at least 10 angles");
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(angles[i])) throw std::invalid_argument("watson_uniformity_test: non-finite angle");
    u[i] = (wrap_angle(angles[i]) + pi) / two_pi;
  }
  std::sort(u.begin(), u.end());
  const double nn = static_cast<double>(n);
  double ss = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = u[i] - (2.0 * static_cast<double>(i) + 1.0) / (2.0 * nn);
    ss += e * e;
    mean += u[i];
  }
  mean /= nn;
  UniformityTest out;
  out.statistic = ss - nn * (mean - 0.5) * (mean - 0.5) + 1.0 / (12.0 * nn);
  out.p_value = watson_p_value(out.statistic);
  return out;
}

struct TorusLineFit {
  Eigen::VectorXd center;
  Eigen::VectorXd direction;
  double r_squared = 0.0;
  Eigen::MatrixXd unwrapped;
};

/// Straight-line fit to an ordered sequence of torus points: the sequence is
/// unwrapped coordinatewise along shorter arcs, then the total-least-squares
/// line is fitted and R^2 is the share of variance along it.
inline TorusLineFit torus_linear_fit(const Eigen::Ref<const Eigen::MatrixXd>& samples) {
  const Eigen::Index m = samples.rows();
  const Eigen::Index d = samples.cols();
  if (m < 2 || d < 1) throw std::invalid_argument("torus_linear_fit: need at least two points");
  TorusLineFit fit;
  fit.unwrapped.resize(m, d);
  fit.unwrapped.row(0) = samples.row(0);
  for (Eigen::Index j = 1; j < m; ++j)
    for (Eigen::Index k = 0; k < d; ++k) fit.unwrapped(j, k) = fit.unwrapped(j - 1, k) + angle_diff(samples(j, k), samples(j - 1, k));
  fit.center = fit.unwrapped.colwise().mean().transpose();
  const Eigen::MatrixXd centered = fit.unwrapped.rowwise() - fit.center.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(centered.transpose() * centered);
  const double total = eig.eigenvalues().sum();
  fit.direction = eig.eigenvectors().col(d - 1);
  fit.r_squared = total > 0.0 ? eig.eigenvalues()[d - 1] / total : 1.0;
  return fit;
}

}  // namespace stpca
