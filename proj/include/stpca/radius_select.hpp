#pragma once

// Data-independent choice of the sphere radius: the r minimizing the expected
// 1-Wasserstein distance between the pairwise-distance distributions of
// uniform samples on T^d and on S^d_r.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "stpca/embedding_init.hpp"
#include "stpca/errors.hpp"
#include "stpca/geometry.hpp"
#include "stpca/parallel.hpp"

namespace stpca {

struct RadiusSelectionConfig {
  int d = 2;
  int n = 100;  ///< points per Monte Carlo replicate
  int replicates = 100;
  std::uint64_t seed = 1;
  /// Explicit per-replicate seeds; when empty, replicate m is seeded from (seed, m).
  std::vector<std::uint64_t> replicate_seeds;
  /// Search bracket; non-positive values mean the default [0.5 sqrt(d), 2 sqrt(d)].
  double r_lo = 0.0;
  double r_hi = 0.0;
  double tolerance = 1e-3;

  std::pair<double, double> bracket() const {
    const double root = std::sqrt(static_cast<double>(d));
    return {r_lo > 0.0 ? r_lo : 0.5 * root, r_hi > 0.0 ? r_hi : 2.0 * root};
  }

  void validate() const {
    if (d < 1) throw std::invalid_argument("RadiusSelectionConfig: d must be >= 1");
    if (n < 2) throw std::invalid_argument("RadiusSelectionConfig: n must be >= 2");
    if (replicates < 1) throw std::invalid_argument("RadiusSelectionConfig: at least one replicate is required");
    if (!replicate_seeds.empty() && replicate_seeds.size() != static_cast<std::size_t>(replicates))
      throw std::invalid_argument("RadiusSelectionConfig: replicate seed count does not match replicates");
    auto [lo, hi] = bracket();
    if (!(lo > 0.0 && lo < hi)) throw std::invalid_argument("RadiusSelectionConfig: invalid search interval");
    if (!(tolerance > 0.0)) throw std::invalid_argument("RadiusSelectionConfig: tolerance must be positive");
  }
};

struct RadiusEstimate {
  double r_star = 0.0;
  double objective_value = 0.0;
  std::vector<std::pair<double, double>> evaluations;  ///< (r, estimated expectation), in evaluation order
};

/// W1 between two equal-size empirical samples: mean absolute difference of order statistics.
inline double wasserstein_1_sorted(std::vector<double> a, std::vector<double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("wasserstein_1_sorted: length mismatch");
  if (a.empty()) throw std::invalid_argument("wasserstein_1_sorted: empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return sum / static_cast<double>(a.size());
}

/// Monte Carlo estimate of E[W1] as a function of r with common random numbers:
/// every replicate's samples are drawn once and the sphere distances are taken
/// on the unit sphere, so evaluating at r only rescales them.
class ExpectedWasserstein {
public:
  explicit ExpectedWasserstein(const RadiusSelectionConfig& cfg) {
    cfg.validate();
    torus_.resize(static_cast<std::size_t>(cfg.replicates));
    sphere_.resize(static_cast<std::size_t>(cfg.replicates));
    parallel_for(static_cast<std::size_t>(cfg.replicates), [&](std::size_t m) {
      Rng rng = replicate_rng(cfg, m);
      const Eigen::MatrixXd t = sample_uniform_torus(cfg.n, cfg.d, rng);
      const Eigen::MatrixXd s = sample_uniform_sphere(cfg.n, cfg.d, 1.0, rng);
      torus_[m] = pairwise_torus_distances(t).upper_triangle();
      sphere_[m] = pairwise_sphere_distances(s, 1.0).upper_triangle();
      std::sort(torus_[m].begin(), torus_[m].end());
      std::sort(sphere_[m].begin(), sphere_[m].end());
    });
  }

  static Rng replicate_rng(const RadiusSelectionConfig& cfg, std::size_t m) {
    if (!cfg.replicate_seeds.empty()) {
      std::seed_seq seq{static_cast<std::uint32_t>(cfg.replicate_seeds[m]), static_cast<std::uint32_t>(cfg.replicate_seeds[m] >> 32)};
      return Rng(seq);
    }
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), static_cast<std::uint32_t>(m)};
    return Rng(seq);
  }

  double operator()(double r) const {
    if (!(r > 0.0)) throw std::invalid_argument("expected_wasserstein: radius must be positive");
    double total = 0.0;
    for (std::size_t m = 0; m < torus_.size(); ++m) {
      const auto& t = torus_[m];
      const auto& s = sphere_[m];
      double sum = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i) sum += std::abs(t[i] - r * s[i]);
      total += sum / static_cast<double>(t.size());
    }
    return total / static_cast<double>(torus_.size());
  }

  /// Mean of all torus pairwise distances across replicates (the r -> 0 limit).
  double torus_mean_distance() const {
    double total = 0.0;
    for (const auto& t : torus_) {
      double sum = 0.0;
      for (double v : t) sum += v;
      total += sum / static_cast<double>(t.size());
    }
    return total / static_cast<double>(torus_.size());
  }

private:
  std::vector<std::vector<double>> torus_;
  std::vector<std::vector<double>> sphere_;
};

inline double expected_wasserstein(double r, const RadiusSelectionConfig& cfg) { return ExpectedWasserstein(cfg)(r); }

/// Golden-section search for r* over the configured bracket.
inline RadiusEstimate select_radius(const RadiusSelectionConfig& cfg) {
  const ExpectedWasserstein objective(cfg);
  RadiusEstimate est;
  auto eval = [&](double r) {
    const double v = objective(r);
    if (!std::isfinite(v)) throw NumericalFailure("select_radius: non-finite objective");
    est.evaluations.emplace_back(r, v);
    return v;
  };

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto [a, b] = cfg.bracket();
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = eval(c), fd = eval(d);
  while (b - a > cfg.tolerance) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = eval(d);
    }
  }
  est.r_star = 0.5 * (a + b);
  est.objective_value = eval(est.r_star);
  return est;
}

/// True when the trace, ordered by r, decreases to a single minimum and then increases.
inline bool trace_is_unimodal(std::vector<std::pair<double, double>> trace) {
  std::sort(trace.begin(), trace.end());
  std::size_t i = 1;
  while (i < trace.size() && trace[i].second <= trace[i - 1].second) ++i;
  while (i < trace.size() && trace[i].second >= trace[i - 1].second) ++i;
  return i >= trace.size();
}

}  // namespace stpca
