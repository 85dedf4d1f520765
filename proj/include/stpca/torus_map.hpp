#pragma once

// Maps between the torus and the fitted sphere that reuse the SMDS stress
// kernel with a single free point, the principal curve obtained by predicting
// the innermost nested circle back onto the torus, and the torus variance
// decomposition.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "stpca/errors.hpp"
#include "stpca/geometry.hpp"
#include "stpca/log.hpp"
#include "stpca/optimizer.hpp"
#include "stpca/parallel.hpp"
#include "stpca/pns.hpp"
#include "stpca/smds.hpp"

namespace stpca {

/// Index-aligned torus data x_i and their fitted sphere images y_i on S^d_r.
class PairedConfiguration {
public:
  PairedConfiguration() = default;

  PairedConfiguration(Eigen::MatrixXd torus_points, Eigen::MatrixXd sphere_points, double radius)
      : torus_(std::move(torus_points)), sphere_(std::move(sphere_points)), radius_(radius) {
    if (torus_.rows() != sphere_.rows()) throw std::invalid_argument("PairedConfiguration: point counts differ");
    if (torus_.rows() < 1) throw std::invalid_argument("PairedConfiguration: empty configuration");
    if (sphere_.cols() != torus_.cols() + 1) throw std::invalid_argument("PairedConfiguration: sphere dimension must be d + 1");
    if (!(radius_ > 0.0)) throw std::invalid_argument("PairedConfiguration: radius must be positive");
    torus_ = wrap_rows(std::move(torus_));
  }

  const Eigen::MatrixXd& torus_points() const noexcept { return torus_; }
  const Eigen::MatrixXd& sphere_points() const noexcept { return sphere_; }
  double radius() const noexcept { return radius_; }
  Eigen::Index size() const noexcept { return torus_.rows(); }
  Eigen::Index dim() const noexcept { return torus_.cols(); }

private:
  Eigen::MatrixXd torus_;
  Eigen::MatrixXd sphere_;
  double radius_ = 1.0;
};

/// (1/n) sum_i (dist_T(x, x_i) - dist_S(y, y_i))^2 for one torus point and one sphere point.
inline double paired_stress(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const PairedConfiguration& paired) {
  double f = 0.0;
  const double r = paired.radius();
  for (Eigen::Index i = 0; i < paired.size(); ++i) {
    const double e = torus_distance(x, paired.torus_points().row(i).transpose()) - sphere_distance(y, paired.sphere_points().row(i).transpose(), r);
    f += e * e;
  }
  return f / static_cast<double>(paired.size());
}

/// Prediction objective in the torus angles x (unwrapped is fine) given the
/// sphere distances s_i = dist_S(y, y_i). At the cut locus a half-turn
/// difference contributes +pi; coincident points contribute a zero subgradient.
inline double prediction_objective(const Eigen::VectorXd& x, const Eigen::VectorXd& sphere_dist, const PairedConfiguration& paired, Eigen::VectorXd* grad) {
  const Eigen::Index n = paired.size();
  const Eigen::Index d = paired.dim();
  double f = 0.0;
  if (grad) grad->setZero(d);
  Eigen::VectorXd diff(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) diff[k] = angle_diff(x[k], paired.torus_points()(i, k));
    const double dt = diff.norm();
    const double e = dt - sphere_dist[i];
    f += e * e;
    if (grad && dt > 0.0) *grad += (2.0 * e / dt) * diff;
  }
  f /= static_cast<double>(n);
  if (grad) *grad /= static_cast<double>(n);
  return f;
}

/// Interpolation objective in an unnormalized sphere direction z, given the
/// torus distances t_i = dist_T(x, x_i). Cosines are clamped like the SMDS stress.
inline double interpolation_objective(const Eigen::VectorXd& z, const Eigen::VectorXd& torus_dist, const PairedConfiguration& paired, Eigen::VectorXd* grad) {
  const Eigen::Index n = paired.size();
  const double r = paired.radius();
  const double norm = z.norm();
  if (!(norm > 0.0)) return std::numeric_limits<double>::infinity();
  const Eigen::VectorXd u = z / norm;
  double f = 0.0;
  if (grad) grad->setZero(z.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd ui = paired.sphere_points().row(i).transpose() / r;
    const double raw = u.dot(ui);
    const double c = std::clamp(raw, -stress_cosine_clamp, stress_cosine_clamp);
    const double e = torus_dist[i] - r * std::acos(c);
    f += e * e;
    if (grad && raw == c) *grad += (2.0 * e * r / std::sqrt(1.0 - c * c) / norm) * (ui - c * u);
  }
  f /= static_cast<double>(n);
  if (grad) *grad /= static_cast<double>(n);
  return f;
}

struct PredictOptions {
  int restarts = 3;
  BfgsOptions bfgs{1e-13, 1e-12, 500, 20000, 0.2, 1e-4};
};

struct Prediction {
  TorusPoint x;
  double objective = 0.0;
  bool from_init = false;  ///< the winning local solve started at the supplied init
};

namespace detail {

inline std::vector<Eigen::Index> nearest_sphere_indices(const Eigen::VectorXd& y, const PairedConfiguration& paired, std::size_t count, Eigen::VectorXd& dist) {
  const Eigen::Index n = paired.size();
  dist.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) dist[i] = sphere_distance(y, paired.sphere_points().row(i).transpose(), paired.radius());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  count = std::min(count, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                    [&](Eigen::Index a, Eigen::Index b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });
  order.resize(count);
  return order;
}

}  // namespace detail

/// T~(y): the torus point whose distances to the x_i best match the sphere
/// distances of y to the y_i. Local solves start at the x_i of the 1 + restarts
/// nearest y_i, plus the supplied init when given; the best is returned.
inline Prediction predict(const Eigen::VectorXd& y, const PairedConfiguration& paired, const std::optional<TorusPoint>& init = std::nullopt, const PredictOptions& opt = {}) {
  if (y.size() != paired.dim() + 1) throw std::invalid_argument("predict: sphere point dimension mismatch");
  if (std::abs(y.norm() - paired.radius()) > 1e-6 * paired.radius())
    throw std::invalid_argument("predict: point is not on the sphere of the fitted radius");
  Eigen::VectorXd sdist;
  const auto nearest = detail::nearest_sphere_indices(y, paired, static_cast<std::size_t>(1 + std::max(0, opt.restarts)), sdist);

  std::vector<std::pair<Eigen::VectorXd, bool>> starts;
  if (init) {
    if (init->dim() != paired.dim()) throw std::invalid_argument("predict: init dimension mismatch");
    starts.emplace_back(init->angles(), true);
  }
  for (Eigen::Index i : nearest) starts.emplace_back(paired.torus_points().row(i).transpose(), false);

  Objective obj = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) { return prediction_objective(x, sdist, paired, g); };
  Prediction best;
  best.objective = std::numeric_limits<double>::infinity();
  for (const auto& [start, warm] : starts) {
    const BfgsResult res = minimize_bfgs(obj, start, opt.bfgs);
    if (!std::isfinite(res.value)) throw NumericalFailure("predict: non-finite objective", res.x);
    // strict improvement required, so the supplied init wins ties
    if (res.value < best.objective) {
      best.objective = res.value;
      best.x = TorusPoint(res.x);
      best.from_init = warm;
    }
  }
  return best;
}

struct Interpolation {
  SpherePoint y;
  double objective = 0.0;
};

/// T^(x): the point of S^d_r whose distances to the y_i best match the torus
/// distances of x to the x_i, started from the y_i of the nearest x_i.
inline Interpolation interpolate(const TorusPoint& x, const PairedConfiguration& paired, const BfgsOptions& bopt = {1e-13, 1e-12, 500, 20000, 0.2, 1e-4}) {
  if (x.dim() != paired.dim()) throw std::invalid_argument("interpolate: torus point dimension mismatch");
  const Eigen::Index n = paired.size();
  Eigen::VectorXd tdist(n);
  Eigen::Index nearest = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    tdist[i] = torus_distance(x.angles(), paired.torus_points().row(i).transpose());
    if (tdist[i] < tdist[nearest]) nearest = i;
  }
  Objective obj = [&](const Eigen::VectorXd& z, Eigen::VectorXd* g) { return interpolation_objective(z, tdist, paired, g); };
  const Eigen::VectorXd start = paired.sphere_points().row(nearest).transpose() / paired.radius();
  const BfgsResult res = minimize_bfgs(obj, start, bopt);
  if (!std::isfinite(res.value)) throw NumericalFailure("interpolate: non-finite objective", res.x);
  Interpolation out{SpherePoint::project(res.x, paired.radius()), 0.0};
  out.objective = interpolation_objective(out.y.coords() / paired.radius(), tdist, paired, nullptr);
  return out;
}

/// Point at fraction t along the shorter arc, per coordinate, from a to b.
inline Eigen::VectorXd torus_segment_point(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double t) {
  Eigen::VectorXd out(a.size());
  for (Eigen::Index k = 0; k < a.size(); ++k) out[k] = wrap_angle(a[k] + t * angle_diff(b[k], a[k]));
  return out;
}

struct PrincipalCurve {
  Eigen::VectorXd grid;           ///< m first-score values, equispaced in [-pi, pi)
  Eigen::MatrixXd sphere_points;  ///< m x (d+1) points psi_j on S^d_r
  Eigen::MatrixXd samples;        ///< m x d predictions T~(psi_j)
  Eigen::VectorXd objectives;
  std::vector<bool> warm_start_used;
  bool closed = false;
  int discontinuities = 0;

  /// Piecewise-linear torus curve with `per_segment` points per segment,
  /// including the closing segment when the curve is closed.
  Eigen::MatrixXd densify(int per_segment) const {
    if (per_segment < 1) throw std::invalid_argument("densify: per_segment must be >= 1");
    const Eigen::Index m = samples.rows();
    const Eigen::Index segments = closed ? m : m - 1;
    Eigen::MatrixXd out(segments * per_segment + (closed ? 0 : 1), samples.cols());
    Eigen::Index row = 0;
    for (Eigen::Index j = 0; j < segments; ++j) {
      const Eigen::VectorXd a = samples.row(j).transpose();
      const Eigen::VectorXd b = samples.row((j + 1) % m).transpose();
      for (int s = 0; s < per_segment; ++s) out.row(row++) = torus_segment_point(a, b, static_cast<double>(s) / per_segment).transpose();
    }
    if (!closed) out.row(row) = samples.row(m - 1);
    return out;
  }
};

/// Linear-interpolation percentile (type 7) of a nonempty sample.
inline double percentile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct CurveOptions {
  int m = 100;
  PredictOptions predict;
};

/// Predicts an equispaced grid on the innermost nested circle back onto the
/// torus, warm-starting each prediction from the previous one.
inline PrincipalCurve principal_curve(const PnsModel& model, const PairedConfiguration& paired, const CurveOptions& opt = {}) {
  if (opt.m < 2) throw std::invalid_argument("principal_curve: grid size must be >= 2");
  if (model.d != paired.dim()) throw std::invalid_argument("principal_curve: model and configuration dimensions differ");
  const int m = opt.m;
  const int d = model.d;
  PrincipalCurve curve;
  curve.grid.resize(m);
  curve.sphere_points.resize(m, d + 1);
  curve.samples.resize(m, d);
  curve.objectives.resize(m);
  curve.warm_start_used.assign(static_cast<std::size_t>(m), false);

  std::optional<TorusPoint> previous;
  for (int j = 0; j < m; ++j) {
    curve.grid[j] = -pi + two_pi * j / m;
    ScoreVector xi{Eigen::VectorXd::Zero(d)};
    xi.xi[0] = curve.grid[j];
    const Eigen::VectorXd psi = pns_inverse(xi, model) * paired.radius();
    curve.sphere_points.row(j) = psi.transpose();
    const Prediction p = predict(psi, paired, previous, opt.predict);
    curve.samples.row(j) = p.x.angles().transpose();
    curve.objectives[j] = p.objective;
    curve.warm_start_used[static_cast<std::size_t>(j)] = p.from_init;
    previous = p.x;
  }

  std::vector<double> gaps;
  const double jump = std::sqrt(static_cast<double>(d)) * pi / 4.0;
  for (int j = 0; j + 1 < m; ++j) {
    gaps.push_back(torus_distance(curve.samples.row(j).transpose(), curve.samples.row(j + 1).transpose()));
    if (gaps.back() > jump) {
      ++curve.discontinuities;
      logger().warn("principal curve: jump of {:.3f} between samples {} and {}", gaps.back(), j, j + 1);
    }
  }
  const double closing = torus_distance(curve.samples.row(m - 1).transpose(), curve.samples.row(0).transpose());
  curve.closed = closing <= percentile(gaps, 0.95);
  return curve;
}

struct TorusVarianceTable {
  Eigen::VectorXd variances;
  Eigen::VectorXd proportions;
  bool degenerate = false;
  /// projections[k] is the n x d matrix of predicted projections x^_i^(k), k = 0..d.
  std::vector<Eigen::MatrixXd> projections;
};

/// Torus variance decomposition: var^(k) = sum_i dist_T(x^_i^(k-1), x^_i^(k))^2
/// with x^_i^(k) = T~(r y_i^(k)). The prediction of the backwards mean is
/// computed once and shared by all points.
inline TorusVarianceTable torus_variance(const PnsModel& model, const PairedConfiguration& paired, const PredictOptions& opt = {}) {
  const int d = model.d;
  const Eigen::Index n = paired.size();
  if (d != paired.dim()) throw std::invalid_argument("torus_variance: model and configuration dimensions differ");
  const double r = paired.radius();

  TorusVarianceTable table;
  table.projections.assign(static_cast<std::size_t>(d + 1), Eigen::MatrixXd(n, d));
  const Prediction mean_pred = predict(model.backwards_mean * r, paired, std::nullopt, opt);
  for (Eigen::Index i = 0; i < n; ++i) table.projections[0].row(i) = mean_pred.x.angles().transpose();

  parallel_for(static_cast<std::size_t>(n), [&](std::size_t ii) {
    const auto i = static_cast<Eigen::Index>(ii);
    const Eigen::VectorXd y = paired.sphere_points().row(i).transpose();
    const ScoreVector full = pns_forward(y / r, model);
    for (int k = 1; k <= d; ++k) {
      Eigen::VectorXd yk;
      if (k == d) {
        yk = y;
      } else {
        ScoreVector partial{Eigen::VectorXd::Zero(d)};
        partial.xi.head(k) = full.xi.head(k);
        yk = detail::lift_scores(partial.xi, model) * r;
      }
      table.projections[static_cast<std::size_t>(k)].row(i) = predict(yk, paired, std::nullopt, opt).x.angles().transpose();
    }
  });

  table.variances = Eigen::VectorXd::Zero(d);
  for (int k = 1; k <= d; ++k)
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dist = torus_distance(table.projections[static_cast<std::size_t>(k - 1)].row(i).transpose(),
                                         table.projections[static_cast<std::size_t>(k)].row(i).transpose());
      table.variances[k - 1] += dist * dist;
    }
  const double total = table.variances.sum();
  table.degenerate = !(total > 0.0);
  table.proportions = table.degenerate ? Eigen::VectorXd::Zero(d) : Eigen::VectorXd(table.variances / total);
  return table;
}

}  // namespace stpca
