#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "stpca/geometry.hpp"

namespace testing_support {

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
inline double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

/// Central finite-difference gradient.
inline Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd a = x, b = x;
    a[k] += h;
    b[k] -= h;
    g[k] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

/// Relative agreement per coordinate, with the gradient scale as the floor.
inline double max_relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  const double scale = std::max(1e-8, numeric.cwiseAbs().maxCoeff());
  double worst = 0.0;
  for (Eigen::Index k = 0; k < analytic.size(); ++k)
    worst = std::max(worst, std::abs(analytic[k] - numeric[k]) / std::max(std::abs(numeric[k]), scale));
  return worst;
}

inline double naive_circle_distance(double a, double b) {
  const double diff = std::abs(a - b);
  return std::min(diff, 2.0 * stpca::pi - diff);
}

inline double naive_torus_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double c = naive_circle_distance(x[k], y[k]);
    s += c * c;
  }
  return std::sqrt(s);
}

inline double naive_sphere_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double r) {
  double dot = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) dot += x[k] * y[k];
  return r * std::acos(std::max(-1.0, std::min(1.0, dot / (r * r))));
}

}  // namespace testing_support
