#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "stpca/commands.hpp"

using namespace stpca;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("stpca_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + STPCA_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

RunConfig quick_config(const fs::path& input, const fs::path& out) {
  RunConfig cfg;
  cfg.seed = 5;
  cfg.radius.automatic = false;
  cfg.radius.value = 1.5;
  cfg.curve.m = 20;
  cfg.io.input = input.string();
  cfg.io.output_dir = out.string();
  return cfg;
}

fs::path small_input(const fs::path& dir) {
  const fs::path p = dir / "angles.csv";
  std::ofstream out(p);
  cmd_simulate("t2-clusters", 3, out);
  return p;
}

}  // namespace

TEST(Csv, RoundTripIsExact) {
  Rng rng(91);
  const Eigen::MatrixXd a = sample_uniform_torus(50, 3, rng);
  std::stringstream ss;
  write_table(ss, numbered_columns("theta", 3), a);
  CsvOptions opt;
  opt.header = true;
  const Eigen::MatrixXd b = read_angles(ss, opt);
  EXPECT_EQ(a, b);
}

TEST(Csv, FormatDoubleRoundTrips) {
  for (double v : {0.1, -pi, 1e-300, 123456.789, 2.0 / 3.0}) EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(Csv, DegreesAndDelimiter) {
  std::stringstream ss("90;180\n-90;270\n");
  CsvOptions opt;
  opt.delimiter = ';';
  opt.angle_unit = AngleUnit::degrees;
  const Eigen::MatrixXd a = read_angles(ss, opt);
  EXPECT_NEAR(a(0, 0), pi / 2, 1e-15);
  EXPECT_NEAR(a(0, 1), -pi, 1e-15);
  EXPECT_NEAR(a(1, 1), -pi / 2, 1e-15);
}

TEST(Csv, LaggedSeries) {
  std::stringstream ss("0.1\n0.2\n0.3\n0.4\n");
  CsvOptions opt;
  opt.lag = 2;
  const Eigen::MatrixXd a = read_angles(ss, opt);
  ASSERT_EQ(a.rows(), 2);
  ASSERT_EQ(a.cols(), 3);
  EXPECT_EQ(a(1, 0), 0.2);
  EXPECT_EQ(a(1, 2), 0.4);
  std::stringstream two("0.1,0.2\n0.3,0.4\n");
  EXPECT_THROW(read_angles(two, opt), ParseError);
}

TEST(Csv, ParseErrorsCarryPosition) {
  std::stringstream bad("1,2\n\n3,x\n");
  try {
    read_table(bad);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3u);
    EXPECT_EQ(e.column(), 2u);
    EXPECT_NE(std::string(e.what()).find("row 3, column 2"), std::string::npos);
  }
  std::stringstream ragged("1,2\n3\n");
  EXPECT_THROW(read_table(ragged), ParseError);
  std::stringstream nan("1,nan\n");
  EXPECT_THROW(read_table(nan), ParseError);
  std::stringstream empty("");
  EXPECT_THROW(read_table(empty), ParseError);
  std::stringstream header_only("a,b\n");
  EXPECT_THROW(read_table(header_only, ',', true), ParseError);
}

TEST(Simulate, ShapesAndDeterminism) {
  for (const auto& [name, rows, cols] : {std::tuple{"t2-clusters", 300, 2}, {"t3-clusters", 300, 3}, {"t2-wrapped", 500, 2}}) {
    const Simulation s = simulate(name, 4);
    EXPECT_EQ(s.points.rows(), rows);
    EXPECT_EQ(s.points.cols(), cols);
    EXPECT_EQ(s.labels.size(), static_cast<std::size_t>(rows));
    EXPECT_GE(s.points.minCoeff(), -pi);
    EXPECT_LT(s.points.maxCoeff(), pi);
    std::stringstream a, b;
    cmd_simulate(name, 4, a);
    cmd_simulate(name, 4, b);
    EXPECT_EQ(a.str(), b.str());
  }
  EXPECT_THROW(simulate("nope", 1), std::invalid_argument);
}

TEST(ModelJson, RoundTripIsBitExact) {
  const fs::path dir = temp_dir("json");
  TorusModel model;
  cmd_fit(quick_config(small_input(dir), dir / "out"), &model);
  const TorusModel back = load_model((dir / "out" / "model.json").string());
  EXPECT_EQ(back.d, model.d);
  EXPECT_EQ(back.r_hat, model.r_hat);
  EXPECT_EQ(back.smds.configuration, model.smds.configuration);
  EXPECT_EQ(back.pns.scores, model.pns.scores);
  EXPECT_EQ(back.pns.mean_angle, model.pns.mean_angle);
  for (std::size_t k = 0; k < model.pns.levels.size(); ++k) {
    EXPECT_EQ(back.pns.levels[k].rotation, model.pns.levels[k].rotation);
    EXPECT_EQ(back.pns.levels[k].subsphere.center, model.pns.levels[k].subsphere.center);
  }
  EXPECT_EQ(back.curve.samples, model.curve.samples);
  EXPECT_EQ(back.torus_var.projections.size(), model.torus_var.projections.size());
  EXPECT_EQ(back.torus_var.projections.back(), model.torus_var.projections.back());
  EXPECT_EQ(model_to_json(back).dump(), model_to_json(model).dump());
  fs::remove_all(dir);
}

TEST(ModelJson, RejectsBadFiles) {
  const fs::path dir = temp_dir("badjson");
  write_file(dir / "a.json", "{not json");
  EXPECT_THROW(load_model((dir / "a.json").string()), ParseError);
  write_file(dir / "b.json", "{\"schema\": 99}");
  EXPECT_THROW(load_model((dir / "b.json").string()), ParseError);
  EXPECT_THROW(load_model((dir / "missing.json").string()), ParseError);
  fs::remove_all(dir);
}

TEST(Fit, ArtifactsAreReproducible) {
  const fs::path dir = temp_dir("repro");
  const fs::path input = small_input(dir);
  cmd_fit(quick_config(input, dir / "a"));
  cmd_fit(quick_config(input, dir / "b"));
  for (const char* f : {"scores.csv", "curve.csv", "variance.csv", "embedding.csv"}) EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  const std::string scores = slurp(dir / "a" / "scores.csv");
  EXPECT_EQ(scores.substr(0, scores.find('\n')), "xi1,xi2");
  fs::remove_all(dir);
}

TEST(Predict, ZeroScoreGivesMeanProjection) {
  const fs::path dir = temp_dir("predict");
  TorusModel model;
  cmd_fit(quick_config(small_input(dir), dir / "out"), &model);
  std::stringstream out;
  cmd_predict(model, Eigen::RowVector2d::Zero(), PredictInput::scores, out);
  std::stringstream in(out.str());
  const Table t = read_table(in, ',', true);
  EXPECT_EQ(t.header, (std::vector<std::string>{"theta1", "theta2", "objective"}));
  for (int k = 0; k < 2; ++k) EXPECT_NEAR(circle_distance(t.values(0, k), model.torus_var.projections[0](0, k)), 0.0, 1e-8);
  std::stringstream sink;
  try {
    cmd_predict(model, (Eigen::MatrixXd(2, 2) << 0, 0, 0, 3).finished(), PredictInput::scores, sink);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
  }
  EXPECT_THROW(cmd_predict(model, Eigen::RowVector3d::Zero(), PredictInput::scores, sink), std::invalid_argument);
  fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = temp_dir("cli");
  const fs::path input = dir / "in.csv";
  EXPECT_EQ(run_cli("simulate --scenario t2-clusters --seed 2 --output " + input.string()), 0);
  EXPECT_EQ(run_cli("simulate --scenario bogus"), 2);
  write_file(dir / "empty.csv", "");
  EXPECT_EQ(run_cli("fit --input " + (dir / "empty.csv").string() + " --output-dir " + (dir / "o").string()), 2);
  write_file(dir / "bad.csv", "1,2\n3,abc\n");
  EXPECT_EQ(run_cli("fit --input " + (dir / "bad.csv").string() + " --output-dir " + (dir / "o").string()), 2);
  EXPECT_EQ(run_cli("fit --input " + (dir / "missing.csv").string()), 2);
  EXPECT_EQ(run_cli("fit --input " + input.string() + " --radius-mode fixed"), 2);
  EXPECT_EQ(run_cli("no-such-command"), 2);
  EXPECT_EQ(run_cli("uniformity --input " + input.string() + " --column 1"), 0);
  EXPECT_EQ(run_cli("embed-check --input " + input.string() + " --radius 1.5"), 0);
  EXPECT_EQ(run_cli("fit --input " + input.string() + " --output-dir " + (dir / "o").string() +
                    " --radius-mode fixed --radius 1.5 --grid-m 10"),
            0);
  EXPECT_TRUE(fs::exists(dir / "o" / "model.json"));
  write_file(dir / "scores.csv", "0,0\n0.5,0.1\n");
  EXPECT_EQ(run_cli("predict --model " + (dir / "o" / "model.json").string() + " --input " + (dir / "scores.csv").string() +
                    " --output " + (dir / "pred.csv").string()),
            0);
  EXPECT_EQ(slurp(dir / "pred.csv").substr(0, 24), "theta1,theta2,objective\n");
  fs::remove_all(dir);
}
