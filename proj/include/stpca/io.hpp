#pragma once

// CSV ingestion and export of angle tables, and JSON (de)serialization of
// fitted models.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "stpca/errors.hpp"
#include "stpca/geometry.hpp"
#include "stpca/pipeline.hpp"

namespace stpca {

inline constexpr int model_schema = 1;
inline constexpr const char* library_version = "0.1.0";

struct CsvOptions {
  char delimiter = ',';
  bool header = false;
  AngleUnit angle_unit = AngleUnit::radians;
  int lag = 0;  ///< with lag k, a single series is expanded to rows (t_i, ..., t_{i+k})
};

struct Table {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(delim, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

/// Reads a numeric table. Blank lines are skipped; rows and columns in error
/// messages are 1-based file positions.
inline Table read_table(std::istream& in, char delimiter = ',', bool header = false) {
  Table table;
  std::vector<double> data;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t lineno = 0;
  bool header_pending = header;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line, delimiter);
    if (header_pending) {
      for (auto f : fields) table.header.emplace_back(f);
      cols = fields.size();
      header_pending = false;
      continue;
    }
    if (cols == 0) cols = fields.size();
    if (fields.size() != cols)
      throw ParseError("expected " + std::to_string(cols) + " fields, found " + std::to_string(fields.size()), lineno, std::min(fields.size(), cols) + 1);
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string_view f = fields[c];
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size()) throw ParseError("not a number: '" + std::string(f) + "'", lineno, c + 1);
      if (!std::isfinite(v)) throw ParseError("non-finite value", lineno, c + 1);
      data.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw ParseError("no data rows");
  table.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = data[r * cols + c];
  return table;
}

/// Reads angles (one column per torus coordinate), converting units once and
/// wrapping to [-pi, pi).
inline Eigen::MatrixXd read_angles(std::istream& in, const CsvOptions& opt = {}) {
  if (opt.lag < 0) throw std::invalid_argument("read_angles: lag must be >= 0");
  Eigen::MatrixXd a = read_table(in, opt.delimiter, opt.header).values;
  if (opt.angle_unit == AngleUnit::degrees) a *= pi / 180.0;
  if (opt.lag > 0) {
    if (a.cols() != 1) throw ParseError("lagged ingestion needs a single column series");
    const Eigen::Index n = a.rows() - opt.lag;
    if (n < 1) throw ParseError("series is shorter than the lag");
    Eigen::MatrixXd lagged(n, opt.lag + 1);
    for (Eigen::Index i = 0; i < n; ++i)
      for (int k = 0; k <= opt.lag; ++k) lagged(i, k) = a(i + k, 0);
    a = std::move(lagged);
  }
  return wrap_rows(std::move(a));
}

inline Eigen::MatrixXd read_angles_file(const std::string& path, const CsvOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_angles(in, opt);
}

/// Shortest decimal text that reads back to the same double (17 significant digits at most).
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void write_table(std::ostream& out, const std::vector<std::string>& header, const Eigen::Ref<const Eigen::MatrixXd>& values, char delimiter = ',') {
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? std::string(1, delimiter) : "") << header[c];
  if (!header.empty()) out << '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) out << (c ? std::string(1, delimiter) : "") << format_double(values(r, c));
    out << '\n';
  }
}

inline std::vector<std::string> numbered_columns(const std::string& prefix, Eigen::Index count) {
  std::vector<std::string> out;
  for (Eigen::Index k = 1; k <= count; ++k) out.push_back(prefix + std::to_string(k));
  return out;
}

// ---- JSON ----

namespace detail {

using nlohmann::json;

inline json to_json_vector(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline json to_json_matrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index cols_if_empty = 0) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : cols_if_empty;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw std::invalid_argument("model: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

inline json config_to_json(const RunConfig& c) {
  return json{{"seed", c.seed},
              {"radius",
               {{"mode", c.radius.automatic ? "auto" : "fixed"},
                {"value", c.radius.value},
                {"M", c.radius.replicates},
                {"n_mc", c.radius.n_mc},
                {"bracket", {c.radius.r_lo, c.radius.r_hi}},
                {"tolerance", c.radius.tolerance}}},
              {"smds", {{"tolerance", c.smds.tolerance}, {"max_evals", c.smds.max_evaluations}, {"joint_radius", c.smds.joint_radius}}},
              {"curve", {{"m", c.curve.m}, {"restarts", c.curve.restarts}}},
              {"io",
               {{"input", c.io.input},
                {"output_dir", c.io.output_dir},
                {"delimiter", std::string(1, c.io.delimiter)},
                {"header", c.io.header},
                {"angle_unit", c.io.angle_unit == AngleUnit::degrees ? "degrees" : "radians"},
                {"lag", c.io.lag}}}};
}

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto& r = j.at("radius");
  c.radius.automatic = r.at("mode").get<std::string>() == "auto";
  c.radius.value = r.at("value").get<double>();
  c.radius.replicates = r.at("M").get<int>();
  c.radius.n_mc = r.at("n_mc").get<int>();
  c.radius.r_lo = r.at("bracket").at(0).get<double>();
  c.radius.r_hi = r.at("bracket").at(1).get<double>();
  c.radius.tolerance = r.at("tolerance").get<double>();
  const auto& s = j.at("smds");
  c.smds.tolerance = s.at("tolerance").get<double>();
  c.smds.max_evaluations = s.at("max_evals").get<std::size_t>();
  c.smds.joint_radius = s.at("joint_radius").get<bool>();
  c.curve.m = j.at("curve").at("m").get<int>();
  c.curve.restarts = j.at("curve").at("restarts").get<int>();
  const auto& io = j.at("io");
  c.io.input = io.at("input").get<std::string>();
  c.io.output_dir = io.at("output_dir").get<std::string>();
  const auto delim = io.at("delimiter").get<std::string>();
  c.io.delimiter = delim.empty() ? ',' : delim.front();
  c.io.header = io.at("header").get<bool>();
  c.io.angle_unit = io.at("angle_unit").get<std::string>() == "degrees" ? AngleUnit::degrees : AngleUnit::radians;
  c.io.lag = io.at("lag").get<int>();
  return c;
}

}  // namespace detail

inline nlohmann::json model_to_json(const TorusModel& m) {
  using detail::to_json_matrix;
  using detail::to_json_vector;
  using nlohmann::json;
  json levels = json::array();
  for (const auto& lvl : m.pns.levels)
    levels.push_back({{"level", lvl.subsphere.level},
                      {"center", to_json_vector(lvl.subsphere.center)},
                      {"geodesic_radius", lvl.subsphere.geodesic_radius},
                      {"rotation", to_json_matrix(lvl.rotation)}});
  json projections = json::array();
  for (const auto& p : m.torus_var.projections) projections.push_back(to_json_matrix(p));
  return json{
      {"schema", model_schema},
      {"version", library_version},
      {"d", m.d},
      {"n", m.n},
      {"seed", m.seed},
      {"r_star", m.r_star ? json(*m.r_star) : json(nullptr)},
      {"r_init", m.r_init},
      {"r_hat", m.r_hat},
      {"smds",
       {{"stress", m.smds.stress},
        {"initial_stress", m.smds.initial_stress},
        {"initial_radius", m.smds.initial_radius},
        {"iterations", m.smds.iterations},
        {"evaluations", m.smds.evaluations},
        {"converged", m.smds.converged}}},
      {"torus_points", to_json_matrix(m.torus_points)},
      {"sphere_points", to_json_matrix(m.smds.configuration)},
      {"pns",
       {{"levels", levels},
        {"mean_angle", m.pns.mean_angle},
        {"backwards_mean", to_json_vector(m.pns.backwards_mean)},
        {"scores", to_json_matrix(m.pns.scores)},
        {"sphere_variances", to_json_vector(m.pns.sphere_variances)},
        {"sphere_proportions", to_json_vector(m.pns.sphere_proportions)},
        {"degenerate", m.pns.degenerate},
        {"nested_radii", to_json_vector(m.pns.nested_radii)}}},
      {"curve",
       {{"m", m.curve.grid.size()},
        {"closed", m.curve.closed},
        {"discontinuities", m.curve.discontinuities},
        {"grid", to_json_vector(m.curve.grid)},
        {"sphere_points", to_json_matrix(m.curve.sphere_points)},
        {"samples", to_json_matrix(m.curve.samples)},
        {"objectives", to_json_vector(m.curve.objectives)},
        {"warm_start_used", m.curve.warm_start_used}}},
      {"torus_variance",
       {{"variances", to_json_vector(m.torus_var.variances)},
        {"proportions", to_json_vector(m.torus_var.proportions)},
        {"degenerate", m.torus_var.degenerate},
        {"projections", projections}}},
      {"config", detail::config_to_json(m.config)},
  };
}

inline TorusModel model_from_json(const nlohmann::json& j) {
  using detail::matrix_from_json;
  using detail::vector_from_json;
  if (!j.contains("schema") || j.at("schema").get<int>() != model_schema) throw std::invalid_argument("model: unsupported schema");
  TorusModel m;
  m.d = j.at("d").get<int>();
  m.n = j.at("n").get<Eigen::Index>();
  m.seed = j.at("seed").get<std::uint64_t>();
  if (!j.at("r_star").is_null()) m.r_star = j.at("r_star").get<double>();
  m.r_init = j.at("r_init").get<double>();
  m.r_hat = j.at("r_hat").get<double>();
  const auto& s = j.at("smds");
  m.smds.stress = s.at("stress").get<double>();
  m.smds.initial_stress = s.at("initial_stress").get<double>();
  m.smds.initial_radius = s.at("initial_radius").get<double>();
  m.smds.iterations = s.at("iterations").get<std::size_t>();
  m.smds.evaluations = s.at("evaluations").get<std::size_t>();
  m.smds.converged = s.at("converged").get<bool>();
  m.smds.fitted_radius = m.r_hat;
  m.torus_points = matrix_from_json(j.at("torus_points"), m.d);
  m.smds.configuration = matrix_from_json(j.at("sphere_points"), m.d + 1);

  const auto& p = j.at("pns");
  m.pns.d = m.d;
  for (const auto& lvl : p.at("levels")) {
    PnsLevel level;
    level.subsphere.level = lvl.at("level").get<int>();
    level.subsphere.center = vector_from_json(lvl.at("center"));
    level.subsphere.geodesic_radius = lvl.at("geodesic_radius").get<double>();
    level.rotation = matrix_from_json(lvl.at("rotation"));
    m.pns.levels.push_back(std::move(level));
  }
  m.pns.mean_angle = p.at("mean_angle").get<double>();
  m.pns.backwards_mean = vector_from_json(p.at("backwards_mean"));
  m.pns.scores = matrix_from_json(p.at("scores"), m.d);
  m.pns.sphere_variances = vector_from_json(p.at("sphere_variances"));
  m.pns.sphere_proportions = vector_from_json(p.at("sphere_proportions"));
  m.pns.degenerate = p.at("degenerate").get<bool>();
  m.pns.nested_radii = vector_from_json(p.at("nested_radii"));

  const auto& c = j.at("curve");
  m.curve.closed = c.at("closed").get<bool>();
  m.curve.discontinuities = c.at("discontinuities").get<int>();
  m.curve.grid = vector_from_json(c.at("grid"));
  m.curve.sphere_points = matrix_from_json(c.at("sphere_points"), m.d + 1);
  m.curve.samples = matrix_from_json(c.at("samples"), m.d);
  m.curve.objectives = vector_from_json(c.at("objectives"));
  m.curve.warm_start_used = c.at("warm_start_used").get<std::vector<bool>>();

  const auto& t = j.at("torus_variance");
  m.torus_var.variances = vector_from_json(t.at("variances"));
  m.torus_var.proportions = vector_from_json(t.at("proportions"));
  m.torus_var.degenerate = t.at("degenerate").get<bool>();
  for (const auto& proj : t.at("projections")) m.torus_var.projections.push_back(matrix_from_json(proj, m.d));

  m.config = detail::config_from_json(j.at("config"));
  if (m.torus_points.rows() != m.n || m.torus_points.cols() != m.d || m.smds.configuration.rows() != m.n)
    throw std::invalid_argument("model: inconsistent dimensions");
  if (static_cast<int>(m.pns.levels.size()) != std::max(0, m.d - 1)) throw std::invalid_argument("model: wrong number of PNS levels");
  return m;
}

inline void save_model(const TorusModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << model_to_json(m).dump(2) << '\n';
}

inline TorusModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("model is not valid JSON: ") + e.what());
  }
  try {
    return model_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("malformed model: ") + e.what());
  }
}

}  // namespace stpca
