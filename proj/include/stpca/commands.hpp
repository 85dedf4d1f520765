#pragma once

// Implementations of the command-line subcommands. Each writes its artifacts
// and returns normally, or throws ParseError / std::invalid_argument for bad
// input and NumericalFailure for solver breakdowns.

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stpca/analysis.hpp"
#include "stpca/embedding_init.hpp"
#include "stpca/io.hpp"
#include "stpca/pipeline.hpp"
#include "stpca/radius_select.hpp"
#include "stpca/torus_map.hpp"

namespace stpca {

struct FitArtifacts {
  std::filesystem::path model, scores, curve, variance, embedding;
};

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

inline void write_curve_csv(std::ostream& out, const PrincipalCurve& curve) {
  const Eigen::Index m = curve.samples.rows();
  const Eigen::Index d = curve.samples.cols();
  out << "j,xi";
  for (Eigen::Index k = 1; k <= d; ++k) out << ",theta" << k;
  out << ",objective,warm_start_used\n";
  for (Eigen::Index j = 0; j < m; ++j) {
    out << j + 1 << ',' << format_double(curve.grid[j]);
    for (Eigen::Index k = 0; k < d; ++k) out << ',' << format_double(curve.samples(j, k));
    out << ',' << format_double(curve.objectives[j]) << ',' << (curve.warm_start_used[static_cast<std::size_t>(j)] ? 1 : 0) << '\n';
  }
}

inline void write_variance_csv(std::ostream& out, const TorusModel& m) {
  out << "component,sphere_variance,sphere_proportion,torus_variance,torus_proportion\n";
  for (int k = 0; k < m.d; ++k)
    out << k + 1 << ',' << format_double(m.pns.sphere_variances[k]) << ',' << format_double(m.pns.sphere_proportions[k]) << ','
        << format_double(m.torus_var.variances[k]) << ',' << format_double(m.torus_var.proportions[k]) << '\n';
}

/// fit: reads the input CSV named in the config, runs the pipeline and writes
/// model.json, scores.csv, curve.csv, variance.csv and embedding.csv.
inline FitArtifacts cmd_fit(const RunConfig& cfg, TorusModel* model_out = nullptr) {
  CsvOptions csv{cfg.io.delimiter, cfg.io.header, cfg.io.angle_unit, cfg.io.lag};
  const Eigen::MatrixXd angles = read_angles_file(cfg.io.input, csv);
  const TorusModel model = fit_model(angles, cfg);

  const std::filesystem::path dir(cfg.io.output_dir);
  std::filesystem::create_directories(dir);
  FitArtifacts paths{dir / "model.json", dir / "scores.csv", dir / "curve.csv", dir / "variance.csv", dir / "embedding.csv"};
  save_model(model, paths.model.string());
  {
    auto out = open_output(paths.scores);
    write_table(out, numbered_columns("xi", model.d), model.pns.scores);
  }
  {
    auto out = open_output(paths.curve);
    write_curve_csv(out, model.curve);
  }
  {
    auto out = open_output(paths.variance);
    write_variance_csv(out, model);
  }
  {
    auto out = open_output(paths.embedding);
    write_table(out, numbered_columns("y", model.d + 1), model.smds.configuration);
  }
  if (model_out) *model_out = model;
  return paths;
}

/// simulate: writes the scenario angles (and optionally labels) as CSV.
inline void cmd_simulate(const std::string& scenario, std::uint64_t seed, std::ostream& out, double cluster_sd = 0.4, std::ostream* labels = nullptr) {
  const Simulation sim = simulate(scenario, seed, cluster_sd);
  write_table(out, {}, sim.points);
  if (labels)
    for (int l : sim.labels) *labels << l << '\n';
}

enum class PredictInput { scores, sphere };

/// predict: one torus row per input row with the final objective. Score rows
/// go through the inverse PNS map and are lifted to the fitted radius.
inline void cmd_predict(const TorusModel& model, const Eigen::Ref<const Eigen::MatrixXd>& input, PredictInput kind, std::ostream& out) {
  const int d = model.d;
  const Eigen::Index expected = kind == PredictInput::scores ? d : d + 1;
  if (input.cols() != expected)
    throw std::invalid_argument("predict: expected " + std::to_string(expected) + " columns, got " + std::to_string(input.cols()));
  const PairedConfiguration paired = model.paired();
  PredictOptions popt;
  popt.restarts = model.config.curve.restarts;
  Eigen::MatrixXd result(input.rows(), d + 1);
  for (Eigen::Index i = 0; i < input.rows(); ++i) {
    Eigen::VectorXd y;
    try {
      if (kind == PredictInput::scores) {
        y = pns_inverse(ScoreVector{input.row(i).transpose()}, model.pns) * model.r_hat;
      } else {
        y = input.row(i).transpose();
        if (!(y.norm() > 0.0)) throw std::invalid_argument("point at the origin");
        y *= model.r_hat / y.norm();
      }
    } catch (const std::invalid_argument& e) {
      throw ParseError(std::string("predict: ") + e.what(), static_cast<std::size_t>(i + 1));
    }
    const Prediction p = predict(y, paired, std::nullopt, popt);
    result.row(i).head(d) = p.x.angles().transpose();
    result(i, d) = p.objective;
  }
  auto header = numbered_columns("theta", d);
  header.push_back("objective");
  write_table(out, header, result);
}

/// radius: r* with its objective and the evaluation trace.
inline RadiusEstimate cmd_radius(const RadiusSelectionConfig& cfg, std::ostream& report, std::ostream& trace) {
  const RadiusEstimate est = select_radius(cfg);
  report << "r_star=" << format_double(est.r_star) << '\n'
         << "objective=" << format_double(est.objective_value) << '\n'
         << "unimodal=" << (trace_is_unimodal(est.evaluations) ? "true" : "false") << '\n';
  trace << "r,expected_w1\n";
  for (const auto& [r, v] : est.evaluations) trace << format_double(r) << ',' << format_double(v) << '\n';
  return est;
}

inline nlohmann::json embeddability_to_json(const EmbeddabilityReport& rep) {
  return nlohmann::json{{"radius", rep.radius_tested},
                        {"feasible_bound", rep.feasible_bound},
                        {"gram_min_eigenvalue", rep.gram_min_eigenvalue},
                        {"psd", rep.psd},
                        {"gram_rank", rep.gram_rank},
                        {"intrinsic_dim", rep.intrinsic_dim ? nlohmann::json(*rep.intrinsic_dim) : nlohmann::json(nullptr)}};
}

/// embed-check: spherical embeddability of the torus distances of the input at radius r.
inline EmbeddabilityReport cmd_embed_check(const Eigen::Ref<const Eigen::MatrixXd>& angles, double r, std::ostream& out) {
  const EmbeddabilityReport rep = check_spherical_embeddability(pairwise_torus_distances(angles), r);
  out << embeddability_to_json(rep).dump(2) << '\n';
  return rep;
}

/// cluster: KDE mode clustering of one score column.
inline ClusterAssignment cmd_cluster(const std::vector<double>& angles, std::optional<double> bandwidth, int grid, std::ostream& labels, std::ostream& summary) {
  const CircularKde kde = circular_kde(angles, bandwidth);
  const ClusterAssignment cl = mode_cluster(kde, grid);
  labels << "label\n";
  for (int l : cl.labels) labels << l << '\n';
  summary << nlohmann::json{{"bandwidth", kde.bandwidth()},
                            {"modes", cl.modes},
                            {"antimodes", cl.basin_boundaries},
                            {"degenerate", cl.degenerate}}
                 .dump(2)
          << '\n';
  return cl;
}

/// uniformity: Watson U^2 statistic and p-value.
inline UniformityTest cmd_uniformity(const std::vector<double>& angles, std::ostream& out) {
  const UniformityTest t = watson_uniformity_test(angles);
  out << "statistic=" << format_double(t.statistic) << '\n' << "p_value=" << format_double(t.p_value) << '\n';
  return t;
}

}  // namespace stpca
