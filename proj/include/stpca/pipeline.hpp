#pragma once

// End-to-end fitting: radius selection, classical-MDS initialization, SMDS,
// PNS on the fitted sphere, principal curve and torus variance. Also the
// simulation scenarios used as reference fixtures.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "stpca/embedding_init.hpp"
#include "stpca/errors.hpp"
#include "stpca/geometry.hpp"
#include "stpca/log.hpp"
#include "stpca/pns.hpp"
#include "stpca/radius_select.hpp"
#include "stpca/smds.hpp"
#include "stpca/torus_map.hpp"

namespace stpca {

enum class AngleUnit { radians, degrees };

struct RunConfig {
  std::uint64_t seed = 1;
  struct Radius {
    bool automatic = true;  ///< select r* by expected W1; otherwise use `value`
    double value = 0.0;
    int replicates = 100;
    int n_mc = 100;
    double r_lo = 0.0;
    double r_hi = 0.0;
    double tolerance = 1e-3;
  } radius;
  struct Smds {
    double tolerance = 5e-2;
    std::size_t max_evaluations = 0;
    bool joint_radius = true;
  } smds;
  struct Curve {
    int m = 100;
    int restarts = 3;
  } curve;
  struct Io {
    std::string input;
    std::string output_dir = ".";
    char delimiter = ',';
    bool header = false;
    AngleUnit angle_unit = AngleUnit::radians;
    int lag = 0;
  } io;

  void validate() const {
    if (!radius.automatic && !(radius.value > 0.0)) throw std::invalid_argument("config: a fixed radius must be positive");
    if (radius.replicates < 1 || radius.n_mc < 2) throw std::invalid_argument("config: invalid Monte Carlo sizes");
    if (!(radius.tolerance > 0.0)) throw std::invalid_argument("config: radius tolerance must be positive");
    if (!(smds.tolerance > 0.0)) throw std::invalid_argument("config: smds tolerance must be positive");
    if (curve.m < 2) throw std::invalid_argument("config: curve grid size must be >= 2");
    if (curve.restarts < 0) throw std::invalid_argument("config: restarts must be >= 0");
    if (io.lag < 0) throw std::invalid_argument("config: lag must be >= 0");
  }

  RadiusSelectionConfig radius_selection(int d) const {
    RadiusSelectionConfig rc;
    rc.d = d;
    rc.n = radius.n_mc;
    rc.replicates = radius.replicates;
    rc.seed = seed;
    rc.r_lo = radius.r_lo;
    rc.r_hi = radius.r_hi;
    rc.tolerance = radius.tolerance;
    return rc;
  }
};

struct TorusModel {
  int d = 0;
  Eigen::Index n = 0;
  std::uint64_t seed = 0;
  std::optional<double> r_star;
  double r_init = 0.0;
  double r_hat = 0.0;
  SmdsSolution smds;
  Eigen::MatrixXd torus_points;  ///< n x d wrapped input
  PnsModel pns;
  PrincipalCurve curve;
  TorusVarianceTable torus_var;
  RunConfig config;

  PairedConfiguration paired() const { return PairedConfiguration(torus_points, smds.configuration, r_hat); }
};

namespace detail {

template <typename F>
auto run_stage(const char* stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const DegenerateSubsphere& e) {
    throw DegenerateSubsphere(std::string(stage) + ": " + e.what(), e.last_iterate());
  } catch (const NumericalFailure& e) {
    throw NumericalFailure(std::string(stage) + ": " + e.what(), e.last_iterate());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string(stage) + ": " + e.what());
  }
}

}  // namespace detail

/// Runs the full pipeline on an n x d matrix of angles in radians.
inline TorusModel fit_model(const Eigen::Ref<const Eigen::MatrixXd>& angles, const RunConfig& cfg) {
  cfg.validate();
  if (!angles.allFinite()) throw std::invalid_argument("fit: non-finite angle");
  TorusModel model;
  model.config = cfg;
  model.seed = cfg.seed;
  model.d = static_cast<int>(angles.cols());
  model.n = angles.rows();
  model.torus_points = wrap_rows(angles);
  const int d = model.d;
  if (d < 1) throw std::invalid_argument("fit: need at least one angle column");
  if (model.n < d + 2) throw std::invalid_argument("fit: need at least d + 2 observations");

  if (cfg.radius.automatic) {
    model.r_star = detail::run_stage("radius", [&] { return select_radius(cfg.radius_selection(d)).r_star; });
    model.r_init = *model.r_star;
  } else {
    model.r_init = cfg.radius.value;
  }
  logger().info("fit: n = {}, d = {}, initial radius {:.6f}", model.n, d, model.r_init);

  model.smds = detail::run_stage("smds", [&] {
    const DistanceMatrix dist = pairwise_torus_distances(model.torus_points);
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), 0x5eedu};
    Rng rng(seq);
    const Eigen::MatrixXd init = project_to_sphere(classical_mds(dist, d + 1), model.r_init, rng);
    StressProblem problem{dist, d, cfg.smds.joint_radius ? RadiusMode::joint : RadiusMode::fixed, model.r_init};
    SmdsOptions opt;
    opt.tolerance = cfg.smds.tolerance;
    opt.max_evaluations = cfg.smds.max_evaluations;
    return solve_smds(problem, init, opt);
  });
  model.r_hat = model.smds.fitted_radius;
  logger().info("fit: stress {:.6f}, fitted radius {:.6f}", model.smds.stress, model.r_hat);

  model.pns = detail::run_stage("pns", [&] {
    const Eigen::MatrixXd unit = model.smds.configuration / model.r_hat;
    return fit_pns(unit);
  });

  const PairedConfiguration paired = model.paired();
  PredictOptions popt;
  popt.restarts = cfg.curve.restarts;
  model.curve = detail::run_stage("curve", [&] {
    CurveOptions copt;
    copt.m = cfg.curve.m;
    copt.predict = popt;
    return principal_curve(model.pns, paired, copt);
  });
  model.torus_var = detail::run_stage("torus-variance", [&] { return torus_variance(model.pns, paired, popt); });
  return model;
}

struct Simulation {
  Eigen::MatrixXd points;
  std::vector<int> labels;
};

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"t2-clusters", "t3-clusters", "t2-wrapped"};
  return names;
}

/// Reference scenarios. Cluster scenarios draw equal-size isotropic wrapped
/// normal clusters with standard deviation `cluster_sd` per coordinate.
inline Simulation simulate(const std::string& scenario, std::uint64_t seed, double cluster_sd = 0.4) {
  if (!(cluster_sd >= 0.0)) throw std::invalid_argument("simulate: cluster standard deviation must be >= 0");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  Rng rng(seq);
  Simulation sim;
  auto clusters = [&](const std::vector<std::vector<double>>& means, Eigen::Index per_cluster) {
    const auto dim = static_cast<Eigen::Index>(means.front().size());
    const Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(dim, dim) * (cluster_sd * cluster_sd);
    sim.points.resize(per_cluster * static_cast<Eigen::Index>(means.size()), dim);
    for (std::size_t c = 0; c < means.size(); ++c) {
      const TorusPoint mu(Eigen::Map<const Eigen::VectorXd>(means[c].data(), dim));
      sim.points.middleRows(static_cast<Eigen::Index>(c) * per_cluster, per_cluster) = sample_wrapped_normal(per_cluster, mu, sigma, rng);
      sim.labels.insert(sim.labels.end(), static_cast<std::size_t>(per_cluster), static_cast<int>(c));
    }
  };
  if (scenario == "t2-clusters") {
    clusters({{-1.0, -2.0}, {3.0, 0.5}, {-0.8, 2.5}}, 100);
  } else if (scenario == "t3-clusters") {
    clusters({{-1.0, -2.0, 0.0}, {1.0, 1.0, -1.0}, {0.0, -1.0, 3.0}}, 100);
  } else if (scenario == "t2-wrapped") {
    Eigen::Matrix2d sigma;
    sigma << 2.0, 2.0, 2.0, 3.0;
    sim.points = sample_wrapped_normal(500, TorusPoint{-1.0, 0.0}, sigma, rng);
    sim.labels.assign(500, 0);
  } else {
    throw std::invalid_argument("unknown scenario '" + scenario + "'");
  }
  return sim;
}

}  // namespace stpca
