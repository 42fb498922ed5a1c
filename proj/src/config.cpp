#include "ecal/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ecal {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

struct Binder {
  std::string key;
  std::string doc;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out;
  in >> out;
  if (in.fail() || !in.eof()) throw std::runtime_error("bad value for " + key + ": '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::runtime_error("bad boolean for " + key + ": '" + value + "'");
}

std::string format_double(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

const std::vector<Binder>& binders() {
  static const std::vector<Binder> list = {
      {"geometry.width", "sensor width, pixels",
       [](PipelineConfig& c, const std::string& v) { c.geometry.width = parse_number<int>("geometry.width", v); },
       [](const PipelineConfig& c) { return std::to_string(c.geometry.width); }},
      {"geometry.height", "sensor height, pixels",
       [](PipelineConfig& c, const std::string& v) { c.geometry.height = parse_number<int>("geometry.height", v); },
       [](const PipelineConfig& c) { return std::to_string(c.geometry.height); }},
      {"window.min_events", "minimum events per spatiotemporal window",
       [](PipelineConfig& c, const std::string& v) { c.window.min_events = parse_number<std::size_t>("window.min_events", v); },
       [](const PipelineConfig& c) { return std::to_string(c.window.min_events); }},
      {"window.step_us", "anchor spacing between windows, microseconds",
       [](PipelineConfig& c, const std::string& v) { c.window.step_us = parse_number<std::int64_t>("window.step_us", v); },
       [](const PipelineConfig& c) { return std::to_string(c.window.step_us); }},
      {"clustering.eps_s", "spatial neighborhood radius, normalized",
       [](PipelineConfig& c, const std::string& v) { c.cluster.eps_s = parse_number<double>("clustering.eps_s", v); },
       [](const PipelineConfig& c) { return format_double(c.cluster.eps_s); }},
      {"clustering.eps_t", "temporal neighborhood half-height, normalized",
       [](PipelineConfig& c, const std::string& v) { c.cluster.eps_t = parse_number<double>("clustering.eps_t", v); },
       [](const PipelineConfig& c) { return format_double(c.cluster.eps_t); }},
      {"clustering.min_pts", "DBSCAN core threshold (neighbors incl. self)",
       [](PipelineConfig& c, const std::string& v) { c.cluster.min_pts = parse_number<int>("clustering.min_pts", v); },
       [](const PipelineConfig& c) { return std::to_string(c.cluster.min_pts); }},
      {"erwls.max_iters", "cylinder fit iteration cap",
       [](PipelineConfig& c, const std::string& v) { c.erwls.max_iters = parse_number<int>("erwls.max_iters", v); },
       [](const PipelineConfig& c) { return std::to_string(c.erwls.max_iters); }},
      {"erwls.min_cluster_size", "smallest cluster worth fitting",
       [](PipelineConfig& c, const std::string& v) { c.erwls.min_cluster_size = parse_number<std::size_t>("erwls.min_cluster_size", v); },
       [](const PipelineConfig& c) { return std::to_string(c.erwls.min_cluster_size); }},
      {"grid.rows", "pattern rows",
       [](PipelineConfig& c, const std::string& v) { c.pattern.rows = parse_number<int>("grid.rows", v); },
       [](const PipelineConfig& c) { return std::to_string(c.pattern.rows); }},
      {"grid.cols", "pattern columns",
       [](PipelineConfig& c, const std::string& v) { c.pattern.cols = parse_number<int>("grid.cols", v); },
       [](const PipelineConfig& c) { return std::to_string(c.pattern.cols); }},
      {"grid.diagonal_spacing_mm", "diagonal circle spacing, millimeters",
       [](PipelineConfig& c, const std::string& v) { c.pattern.diagonal_spacing_mm = parse_number<double>("grid.diagonal_spacing_mm", v); },
       [](const PipelineConfig& c) { return format_double(c.pattern.diagonal_spacing_mm); }},
      {"grid.delta_max", "max surplus candidates after radius pruning",
       [](PipelineConfig& c, const std::string& v) { c.select.delta_max = parse_number<int>("grid.delta_max", v); },
       [](const PipelineConfig& c) { return std::to_string(c.select.delta_max); }},
      {"grid.max_combinations", "subset enumeration budget per window",
       [](PipelineConfig& c, const std::string& v) { c.select.max_combinations = parse_number<std::uint64_t>("grid.max_combinations", v); },
       [](const PipelineConfig& c) { return std::to_string(c.select.max_combinations); }},
      {"grid.exhaustive_threshold", "subset count below which pruning is skipped",
       [](PipelineConfig& c, const std::string& v) { c.select.exhaustive_threshold = parse_number<std::uint64_t>("grid.exhaustive_threshold", v); },
       [](const PipelineConfig& c) { return std::to_string(c.select.exhaustive_threshold); }},
      {"grid.radius_gate_mads", "radius prune threshold, MADs",
       [](PipelineConfig& c, const std::string& v) { c.select.radius_gate_mads = parse_number<double>("grid.radius_gate_mads", v); },
       [](const PipelineConfig& c) { return format_double(c.select.radius_gate_mads); }},
      {"calibration.min_views", "minimum detections before optimizing",
       [](PipelineConfig& c, const std::string& v) { c.calib.min_views = parse_number<int>("calibration.min_views", v); },
       [](const PipelineConfig& c) { return std::to_string(c.calib.min_views); }},
      {"calibration.thin_every", "keep every k-th detection",
       [](PipelineConfig& c, const std::string& v) { c.calib.thin_every = parse_number<int>("calibration.thin_every", v); },
       [](const PipelineConfig& c) { return std::to_string(c.calib.thin_every); }},
      {"calibration.tangential", "optimize tangential coefficients p1, p2",
       [](PipelineConfig& c, const std::string& v) { c.calib.tangential = parse_bool("calibration.tangential", v); },
       [](const PipelineConfig& c) { return c.calib.tangential ? "true" : "false"; }},
      {"calibration.pixel_unit_distortion", "apply distortion on pixel offsets instead of focal-normalized",
       [](PipelineConfig& c, const std::string& v) { c.calib.pixel_unit_distortion = parse_bool("calibration.pixel_unit_distortion", v); },
       [](const PipelineConfig& c) { return c.calib.pixel_unit_distortion ? "true" : "false"; }},
  };
  return list;
}

}  // namespace

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  ConfigMap map;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line.substr(0, line.find('#')));
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(lineno) + " is not key=value: '" + line + "'");
    }
    map[trim(stripped.substr(0, eq))] = trim(stripped.substr(eq + 1));
  }
  return map;
}

void apply_override(ConfigMap& map, const std::string& entry) {
  const auto eq = entry.find('=');
  if (eq == std::string::npos || eq == 0) throw std::runtime_error("override is not key=value: '" + entry + "'");
  map[trim(entry.substr(0, eq))] = trim(entry.substr(eq + 1));
}

PipelineConfig pipeline_config_from(const ConfigMap& map) {
  PipelineConfig config;
  for (const auto& [key, value] : map) {
    bool found = false;
    for (const auto& binder : binders()) {
      if (binder.key == key) {
        binder.set(config, value);
        found = true;
        break;
      }
    }
    if (!found) throw std::runtime_error("unknown config key: '" + key + "'");
  }
  if (config.cluster.eps_s <= 0 || config.cluster.eps_t <= 0 || config.cluster.min_pts < 1) {
    throw std::runtime_error("clustering parameters must be positive");
  }
  if (config.pattern.rows < 1 || config.pattern.cols < 1 || config.pattern.diagonal_spacing_mm <= 0) {
    throw std::runtime_error("invalid pattern spec");
  }
  if (config.window.step_us <= 0 || config.window.min_events < 1) {
    throw std::runtime_error("invalid window settings");
  }
  return config;
}

ConfigMap config_echo(const PipelineConfig& config) {
  ConfigMap map;
  for (const auto& binder : binders()) map[binder.key] = binder.get(config);
  return map;
}

std::string config_reference() {
  const PipelineConfig defaults;
  std::ostringstream out;
  for (const auto& binder : binders()) {
    out << binder.key << " = " << binder.get(defaults) << "  # " << binder.doc << '\n';
  }
  return out.str();
}

}  // namespace ecal
