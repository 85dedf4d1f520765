#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stpca/commands.hpp"
#include "stpca/log.hpp"
#include "stpca/parallel.hpp"

namespace {

constexpr int exit_input_error = 2;
constexpr int exit_numerical_failure = 3;

std::vector<double> column_of(const Eigen::MatrixXd& m, int column) {
  if (column < 1 || column > m.cols()) throw std::invalid_argument("column " + std::to_string(column) + " is out of range");
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, column - 1);
  return out;
}

char delimiter_from(const std::string& s) {
  if (s == "tab" || s == "\\t") return '\t';
  if (s.size() != 1) throw std::invalid_argument("delimiter must be a single character");
  return s.front();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spherically projected torus PCA"};
  app.require_subcommand(1);

  unsigned threads = 0;
  app.add_option("--threads", threads, "Maximum worker threads (0 = hardware concurrency)");

  std::string input, output_dir = ".", delimiter = ",", angle_unit = "radians";
  bool header = false;
  int lag = 0;
  auto add_input_options = [&](CLI::App* cmd, bool required) {
    auto* opt = cmd->add_option("--input", input, "Input CSV");
    if (required) opt->required();
    cmd->add_option("--delimiter", delimiter, "Field delimiter (single character or 'tab')");
    cmd->add_flag("--header", header, "Input has a header row");
  };

  // fit
  stpca::RunConfig cfg;
  std::string radius_mode = "auto";
  std::optional<double> radius;
  bool fixed_sphere = false;
  auto* fit = app.add_subcommand("fit", "Fit the model to an angle CSV");
  add_input_options(fit, true);
  fit->add_option("--output-dir", output_dir, "Directory for model.json and CSV artifacts");
  fit->add_option("--seed", cfg.seed, "Random seed");
  fit->add_option("--radius-mode", radius_mode, "Initial radius: auto (Wasserstein selection) or fixed")->check(CLI::IsMember({"auto", "fixed"}));
  fit->add_option("--radius", radius, "Initial radius when --radius-mode fixed")->check(CLI::PositiveNumber);
  fit->add_flag("--fixed-sphere", fixed_sphere, "Keep the radius fixed during SMDS instead of optimizing it");
  fit->add_option("--tolerance", cfg.smds.tolerance, "SMDS relative improvement tolerance")->check(CLI::PositiveNumber);
  fit->add_option("--max-evals", cfg.smds.max_evaluations, "SMDS evaluation cap (0 = automatic)");
  fit->add_option("--grid-m", cfg.curve.m, "Principal curve grid size")->check(CLI::Range(2, 1000000));
  fit->add_option("--restarts", cfg.curve.restarts, "Extra prediction restarts")->check(CLI::NonNegativeNumber);
  fit->add_option("--mc-replicates", cfg.radius.replicates, "Monte Carlo replicates for radius selection")->check(CLI::PositiveNumber);
  fit->add_option("--mc-n", cfg.radius.n_mc, "Points per Monte Carlo replicate")->check(CLI::Range(2, 1000000));
  fit->add_option("--lag", lag, "Expand a single series into lagged tuples of length lag + 1")->check(CLI::NonNegativeNumber);
  fit->add_option("--angle-unit", angle_unit, "radians or degrees")->check(CLI::IsMember({"radians", "degrees"}));

  // simulate
  std::string scenario, output;
  std::string labels_path;
  std::uint64_t seed = 1;
  double cluster_sd = 0.4;
  auto* sim = app.add_subcommand("simulate", "Write a reference scenario as CSV");
  sim->add_option("--scenario", scenario, "t2-clusters, t3-clusters or t2-wrapped")->required();
  sim->add_option("--seed", seed, "Random seed");
  sim->add_option("--output", output, "Output CSV (default: stdout)");
  sim->add_option("--labels", labels_path, "Also write cluster labels to this file");
  sim->add_option("--cluster-sd", cluster_sd, "Per-coordinate standard deviation of cluster scenarios")->check(CLI::NonNegativeNumber);

  // predict
  std::string model_path, kind = "scores";
  auto* pred = app.add_subcommand("predict", "Map scores or sphere points back to the torus");
  pred->add_option("--model", model_path, "model.json from fit")->required();
  add_input_options(pred, true);
  pred->add_option("--kind", kind, "Input rows are scores or sphere points")->check(CLI::IsMember({"scores", "sphere"}));
  pred->add_option("--output", output, "Output CSV (default: stdout)");

  // radius
  stpca::RadiusSelectionConfig rcfg;
  std::string trace_path;
  auto* rad = app.add_subcommand("radius", "Select the sphere radius for a torus dimension");
  rad->add_option("--dim", rcfg.d, "Torus dimension")->check(CLI::PositiveNumber);
  rad->add_option("--seed", rcfg.seed, "Random seed");
  rad->add_option("--mc-replicates", rcfg.replicates, "Monte Carlo replicates")->check(CLI::PositiveNumber);
  rad->add_option("--mc-n", rcfg.n, "Points per replicate")->check(CLI::Range(2, 1000000));
  rad->add_option("--tolerance", rcfg.tolerance, "Search tolerance")->check(CLI::PositiveNumber);
  rad->add_option("--trace", trace_path, "Write the evaluation trace CSV here (default: stdout)");

  // embed-check
  double check_radius = 1.0;
  auto* emb = app.add_subcommand("embed-check", "Spherical embeddability of torus distances");
  add_input_options(emb, true);
  emb->add_option("--radius", check_radius, "Sphere radius")->required()->check(CLI::PositiveNumber);
  emb->add_option("--angle-unit", angle_unit, "radians or degrees")->check(CLI::IsMember({"radians", "degrees"}));

  // cluster
  std::optional<double> bandwidth;
  int grid = 2048, column = 1;
  auto* clu = app.add_subcommand("cluster", "Mode clustering of a score column");
  add_input_options(clu, true);
  clu->add_option("--column", column, "1-based column to cluster");
  clu->add_option("--bandwidth", bandwidth, "Kernel bandwidth in radians")->check(CLI::PositiveNumber);
  clu->add_option("--grid", grid, "Density grid size")->check(CLI::Range(8, 10000000));
  clu->add_option("--output-dir", output_dir, "Directory for labels.csv and modes.json");

  // uniformity
  auto* uni = app.add_subcommand("uniformity", "Watson U^2 test of circular uniformity");
  add_input_options(uni, true);
  uni->add_option("--column", column, "1-based column to test");
  uni->add_option("--angle-unit", angle_unit, "radians or degrees")->check(CLI::IsMember({"radians", "degrees"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_input_error;
  }

  try {
    stpca::set_max_threads(threads);
    const stpca::AngleUnit unit = angle_unit == "degrees" ? stpca::AngleUnit::degrees : stpca::AngleUnit::radians;
    stpca::CsvOptions csv{delimiter_from(delimiter), header, unit, lag};
    auto open = [](const std::string& path) {
      std::ofstream out(path);
      if (!out) throw std::runtime_error("cannot write '" + path + "'");
      return out;
    };

    if (*fit) {
      cfg.io = {input, output_dir, csv.delimiter, header, unit, lag};
      cfg.radius.automatic = radius_mode == "auto";
      if (!cfg.radius.automatic) {
        if (!radius) throw std::invalid_argument("--radius-mode fixed requires --radius");
        cfg.radius.value = *radius;
      } else if (radius) {
        throw std::invalid_argument("--radius is only used with --radius-mode fixed");
      }
      cfg.smds.joint_radius = !fixed_sphere;
      stpca::TorusModel model;
      const auto paths = stpca::cmd_fit(cfg, &model);
      std::cout << "r_hat=" << stpca::format_double(model.r_hat) << '\n'
                << "stress=" << stpca::format_double(model.smds.stress) << '\n'
                << "model=" << paths.model.string() << '\n';
    } else if (*sim) {
      std::ofstream file, labels;
      if (!output.empty()) file = open(output);
      if (!labels_path.empty()) labels = open(labels_path);
      stpca::cmd_simulate(scenario, seed, output.empty() ? std::cout : file, cluster_sd, labels_path.empty() ? nullptr : &labels);
    } else if (*pred) {
      const stpca::TorusModel model = stpca::load_model(model_path);
      const Eigen::MatrixXd rows = [&] {
        std::ifstream in(input);
        if (!in) throw stpca::ParseError("cannot open '" + input + "'");
        return stpca::read_table(in, csv.delimiter, header).values;
      }();
      std::ofstream file;
      if (!output.empty()) file = open(output);
      stpca::cmd_predict(model, rows, kind == "scores" ? stpca::PredictInput::scores : stpca::PredictInput::sphere, output.empty() ? std::cout : file);
    } else if (*rad) {
      std::ofstream file;
      if (!trace_path.empty()) file = open(trace_path);
      stpca::cmd_radius(rcfg, std::cout, trace_path.empty() ? std::cout : file);
    } else if (*emb) {
      stpca::cmd_embed_check(stpca::read_angles_file(input, csv), check_radius, std::cout);
    } else if (*clu) {
      const Eigen::MatrixXd scores = stpca::read_angles_file(input, csv);
      std::filesystem::create_directories(output_dir);
      auto labels = open((std::filesystem::path(output_dir) / "labels.csv").string());
      auto summary = open((std::filesystem::path(output_dir) / "modes.json").string());
      const auto cl = stpca::cmd_cluster(column_of(scores, column), bandwidth, grid, labels, summary);
      std::cout << "clusters=" << std::max<std::size_t>(1, cl.modes.size()) << '\n';
    } else if (*uni) {
      stpca::cmd_uniformity(column_of(stpca::read_angles_file(input, csv), column), std::cout);
    }
  } catch (const stpca::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_input_error;
  } catch (const stpca::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return exit_numerical_failure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_input_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
