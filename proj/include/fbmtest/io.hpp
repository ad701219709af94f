// CSV and JSON persistence for series, critical surfaces and power tables.
//
// Dialect: comma separated, '.' decimal point, '#'-prefixed metadata lines,
// doubles written in shortest round-trip form.
#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fbmtest/power.hpp"
#include "fbmtest/testkit.hpp"

namespace fbmtest::io {

class CsvError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool try_parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s == "nan") {
    out = std::numeric_limits<double>::quiet_NaN();
    return true;
  }
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

/// Reads a numeric CSV into columns. '#' lines and blank lines are skipped;
/// a non-numeric first data row is treated as a column-name header.
inline std::vector<std::vector<double>> read_numeric_columns(std::istream& in) {
  std::vector<std::vector<double>> cols;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto fields = split(view);
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t i = 0; i < fields.size(); ++i) numeric = numeric && try_parse_double(fields[i], row[i]);
    const bool header_allowed = first;
    first = false;
    if (!numeric) {
      if (header_allowed) continue;
      throw CsvError("line " + std::to_string(lineno) + ": non-numeric field");
    }
    if (cols.empty()) cols.resize(row.size());
    if (row.size() != cols.size()) {
      throw CsvError("line " + std::to_string(lineno) + ": expected " + std::to_string(cols.size()) +
                     " fields, found " + std::to_string(row.size()));
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (!std::isfinite(row[i])) throw CsvError("line " + std::to_string(lineno) + ": non-finite value");
      cols[i].push_back(row[i]);
    }
  }
  if (cols.empty() || cols.front().empty()) throw CsvError("no numeric data rows");
  return cols;
}

inline std::vector<std::vector<double>> read_numeric_columns(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path.string());
  return read_numeric_columns(in);
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

/// Columns of equal length, one '#' metadata line first.
inline void write_columns(std::ostream& out, const std::string& metadata,
                          const std::vector<std::vector<double>>& cols) {
  out << "# " << metadata << '\n';
  const std::size_t rows = cols.empty() ? 0 : cols.front().size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out << ',';
      out << format_double(cols[c][r]);
    }
    out << '\n';
  }
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path.string());
  return nlohmann::json::parse(in);
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".json");
  return p;
}

// ---------------------------------------------------------------------------
// Critical surfaces
// ---------------------------------------------------------------------------

inline constexpr std::string_view kSurfaceHeader = "H,sigma,q_lower,q_upper,error";

inline std::string sanitize_field(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

inline void write_surface_row(std::ostream& out, const SurfaceNode& node) {
  out << format_double(node.hurst) << ',' << format_double(node.sigma) << ',' << format_double(node.q_lower)
      << ',' << format_double(node.q_upper) << ',' << sanitize_field(node.error) << '\n';
}

inline void write_surface_csv(std::ostream& out, const CriticalSurface& surface) {
  out << kSurfaceHeader << '\n';
  for (const auto& node : surface.nodes) write_surface_row(out, node);
}

/// Accepts the four-column form (no error column) as well.
inline std::vector<SurfaceNode> read_surface_csv(std::istream& in) {
  std::vector<SurfaceNode> nodes;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (!header_seen) {
      if (!view.starts_with("H,sigma,q_lower,q_upper")) {
        throw CsvError("surface CSV must start with header H,sigma,q_lower,q_upper");
      }
      header_seen = true;
      continue;
    }
    const auto fields = split(view);
    if (fields.size() < 4 || fields.size() > 5) throw CsvError("line " + std::to_string(lineno) + ": bad field count");
    SurfaceNode node;
    double* targets[4] = {&node.hurst, &node.sigma, &node.q_lower, &node.q_upper};
    for (int i = 0; i < 4; ++i) {
      if (!try_parse_double(fields[static_cast<std::size_t>(i)], *targets[i])) {
        throw CsvError("line " + std::to_string(lineno) + ": non-numeric field");
      }
    }
    if (fields.size() == 5) node.error = std::string(trim(fields[4]));
    nodes.push_back(std::move(node));
  }
  if (!header_seen) throw CsvError("surface CSV has no header");
  return nodes;
}

inline std::vector<SurfaceNode> read_surface_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path.string());
  return read_surface_csv(in);
}

inline nlohmann::json surface_sidecar(const CriticalSurface& s) {
  nlohmann::json j;
  j["n"] = s.n;
  j["a"] = s.level;
  j["k"] = s.lag;
  j["mode"] = s.mode.name();
  j["seed"] = s.mode.seed;
  if (!s.mode.is_analytic()) j["m"] = s.mode.replications;
  return j;
}

// ---------------------------------------------------------------------------
// Power tables
// ---------------------------------------------------------------------------

inline constexpr std::string_view kPowerHeader = "param,power,se,m";

inline void write_power_csv(std::ostream& out, const PowerCurve& curve) {
  out << kPowerHeader << '\n';
  for (const auto& p : curve.points) {
    out << format_double(p.param) << ',' << format_double(p.power) << ',' << format_double(p.se) << ',' << p.m
        << '\n';
  }
}

inline std::vector<PowerPoint> read_power_csv(std::istream& in) {
  std::vector<PowerPoint> points;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (!header_seen) {
      if (view != kPowerHeader) throw CsvError("power CSV must start with header param,power,se,m");
      header_seen = true;
      continue;
    }
    const auto fields = split(view);
    if (fields.size() != 4) throw CsvError("power CSV row must have 4 fields");
    PowerPoint p;
    double m = 0.0;
    if (!try_parse_double(fields[0], p.param) || !try_parse_double(fields[1], p.power) ||
        !try_parse_double(fields[2], p.se) || !try_parse_double(fields[3], m)) {
      throw CsvError("power CSV: non-numeric field");
    }
    p.m = static_cast<std::size_t>(m);
    p.rejections = static_cast<std::size_t>(std::llround(p.power * m));
    points.push_back(p);
  }
  return points;
}

inline nlohmann::json power_sidecar(const PowerStudyConfig& cfg, std::size_t lag) {
  nlohmann::json j;
  j["null"] = {{"hurst", cfg.null_model.hurst}, {"sigma", cfg.null_model.sigma}};
  j["family"] = to_string(cfg.family);
  j["grid"] = cfg.grid;
  if (cfg.family == AlternativeFamily::NoisyFbm) j["alternative_sigma"] = cfg.sigma_for_alternative();
  j["n"] = cfg.n;
  j["m"] = cfg.replications;
  j["a"] = cfg.level;
  j["k"] = lag;
  j["seed"] = cfg.seed;
  j["method"] = to_string(cfg.method);
  j["mode"] = cfg.mode.name();
  return j;
}

}  // namespace fbmtest::io
