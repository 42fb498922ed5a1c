#include "ecal/report_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace ecal {

namespace {

using nlohmann::json;

json vec3(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }
json vec2(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }

Eigen::Vector3d to_vec3(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
Eigen::Vector2d to_vec2(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json stats_to_json(const RunStatistics& s) {
  return json{{"possible", s.possible},
              {"windows_built", s.windows_built},
              {"successes", s.successes},
              {"success_rate", s.success_rate()},
              {"failed_no_clusters", s.failed_no_clusters},
              {"failed_too_few_candidates", s.failed_too_few_candidates},
              {"failed_selection", s.failed_selection},
              {"failed_ordering", s.failed_ordering},
              {"timings_s",
               {{"clustering", s.timings.clustering_s},
                {"fitting", s.timings.fitting_s},
                {"grid", s.timings.grid_s},
                {"calibration", s.timings.calibration_s},
                {"total", s.timings.total_s}}}};
}

RunStatistics stats_from_json(const json& j) {
  RunStatistics s;
  s.possible = j.value("possible", std::int64_t{0});
  s.windows_built = j.value("windows_built", std::int64_t{0});
  s.successes = j.value("successes", std::int64_t{0});
  s.failed_no_clusters = j.value("failed_no_clusters", std::int64_t{0});
  s.failed_too_few_candidates = j.value("failed_too_few_candidates", std::int64_t{0});
  s.failed_selection = j.value("failed_selection", std::int64_t{0});
  s.failed_ordering = j.value("failed_ordering", std::int64_t{0});
  if (j.contains("timings_s")) {
    const json& t = j["timings_s"];
    s.timings.clustering_s = t.value("clustering", 0.0);
    s.timings.fitting_s = t.value("fitting", 0.0);
    s.timings.grid_s = t.value("grid", 0.0);
    s.timings.calibration_s = t.value("calibration", 0.0);
    s.timings.total_s = t.value("total", 0.0);
  }
  return s;
}

}  // namespace

void write_report_file(const std::string& path, const CalibrationReport& report, const RunStatistics& stats,
                       const ConfigMap& config_echo) {
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["intrinsics"] = {{"fx", report.intrinsics.fx},
                     {"fy", report.intrinsics.fy},
                     {"u0", report.intrinsics.u0},
                     {"v0", report.intrinsics.v0}};
  j["distortion"] = {{"k1", report.distortion.k1},
                     {"k2", report.distortion.k2},
                     {"k3", report.distortion.k3},
                     {"p1", report.distortion.p1},
                     {"p2", report.distortion.p2}};
  j["zeta_r_px"] = report.zeta_r;
  j["detections"] = report.detections;
  j["warnings"] = report.warnings;
  json views = json::array();
  for (std::size_t i = 0; i < report.poses.size(); ++i) {
    views.push_back({{"t_ref_us", report.view_t_ref_us[i]},
                     {"axis_angle", vec3(report.poses[i].axis_angle)},
                     {"translation_mm", vec3(report.poses[i].translation)},
                     {"rms_px", report.per_view_rms[i]}});
  }
  j["views"] = views;
  json residuals = json::array();
  for (const auto& r : report.residuals) residuals.push_back({r.view, r.point, r.du, r.dv});
  j["residuals"] = residuals;
  j["statistics"] = stats_to_json(stats);
  j["config"] = config_echo;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report file: " + path);
  out << j.dump(2) << '\n';
}

LoadedReport read_report_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("report is not valid JSON: " + std::string(e.what()));
  }
  if (!j.contains("schema_version") || j["schema_version"].get<int>() != kReportSchemaVersion) {
    throw std::runtime_error("report schema mismatch (expected version " + std::to_string(kReportSchemaVersion) + ")");
  }

  LoadedReport loaded;
  CalibrationReport& r = loaded.report;
  const json& ji = j.at("intrinsics");
  r.intrinsics = {ji.at("fx"), ji.at("fy"), ji.at("u0"), ji.at("v0")};
  const json& jd = j.at("distortion");
  r.distortion = {jd.at("k1"), jd.at("k2"), jd.at("k3"), jd.at("p1"), jd.at("p2")};
  r.zeta_r = j.at("zeta_r_px");
  r.detections = j.at("detections");
  r.warnings = j.value("warnings", std::vector<std::string>{});
  for (const json& v : j.at("views")) {
    r.view_t_ref_us.push_back(v.at("t_ref_us").get<std::int64_t>());
    r.poses.push_back({to_vec3(v.at("axis_angle")), to_vec3(v.at("translation_mm"))});
    r.per_view_rms.push_back(v.at("rms_px").get<double>());
  }
  for (const json& res : j.at("residuals")) {
    r.residuals.push_back({res.at(0).get<int>(), res.at(1).get<int>(), res.at(2).get<double>(), res.at(3).get<double>()});
  }
  loaded.stats = stats_from_json(j.value("statistics", json::object()));
  const json config = j.value("config", json::object());
  for (const auto& [key, value] : config.items()) {
    loaded.config[key] = value.get<std::string>();
  }
  return loaded;
}

std::string render_report_text(const LoadedReport& loaded) {
  const CalibrationReport& r = loaded.report;
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "Calibration report\n";
  out << "==================\n";
  out << "views used:          " << r.detections << '\n';
  out << "reprojection RMS:    " << r.zeta_r << " px\n";
  out << "fx, fy:              " << r.intrinsics.fx << ", " << r.intrinsics.fy << " px\n";
  out << "principal point:     (" << r.intrinsics.u0 << ", " << r.intrinsics.v0 << ") px\n";
  out << std::setprecision(6);
  out << "radial k1 k2 k3:     " << r.distortion.k1 << "  " << r.distortion.k2 << "  " << r.distortion.k3 << '\n';
  out << "tangential p1 p2:    " << r.distortion.p1 << "  " << r.distortion.p2 << '\n';
  out << std::setprecision(2);
  out << "detection success:   " << loaded.stats.successes << " / " << loaded.stats.possible << " ("
      << 100.0 * loaded.stats.success_rate() << " %)\n";
  const StageTimings& t = loaded.stats.timings;
  out << "stage times [s]:     clustering " << t.clustering_s << ", fitting " << t.fitting_s << ", grid " << t.grid_s
      << ", calibration " << t.calibration_s << ", total " << t.total_s << '\n';
  for (const auto& w : r.warnings) out << "warning: " << w << '\n';
  if (!r.per_view_rms.empty()) {
    out << "\nper-view RMS [px]:\n" << std::setprecision(4);
    for (std::size_t i = 0; i < r.per_view_rms.size(); ++i) {
      out << "  view " << i << "  t_ref " << r.view_t_ref_us[i] << " us  rms " << r.per_view_rms[i] << '\n';
    }
  }
  return out.str();
}

void write_residuals_csv(const std::string& path, const CalibrationReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write residual csv: " + path);
  out << "view,point,du_px,dv_px\n";
  out << std::setprecision(12);
  for (const auto& r : report.residuals) out << r.view << ',' << r.point << ',' << r.du << ',' << r.dv << '\n';
}

void write_ground_truth_file(const std::string& path, const SimOutput& sim) {
  json j;
  j["schema_version"] = kReportSchemaVersion;
  json windows = json::array();
  for (const auto& w : sim.windows) {
    json centers = json::array();
    for (const auto& c : w.centers) centers.push_back(vec2(c));
    windows.push_back({{"t_ref_us", w.t_ref_us},
                       {"visible", w.visible},
                       {"centers", centers},
                       {"axis_angle", vec3(w.pose.axis_angle)},
                       {"translation_mm", vec3(w.pose.translation)}});
  }
  j["windows"] = windows;
  j["labels"] = sim.labels;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write ground-truth file: " + path);
  out << j.dump() << '\n';
}

GroundTruthData read_ground_truth_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ground-truth file: " + path);
  json j;
  in >> j;
  GroundTruthData data;
  for (const json& w : j.at("windows")) {
    SimWindowTruth truth;
    truth.t_ref_us = w.at("t_ref_us").get<std::int64_t>();
    truth.visible = w.at("visible").get<bool>();
    for (const json& c : w.at("centers")) truth.centers.push_back(to_vec2(c));
    truth.pose.axis_angle = to_vec3(w.at("axis_angle"));
    truth.pose.translation = to_vec3(w.at("translation_mm"));
    data.windows.push_back(std::move(truth));
  }
  data.labels = j.value("labels", std::vector<int>{});
  return data;
}

std::vector<PoseErrorRow> pose_errors(const CalibrationReport& report, const GroundTruthData& truth,
                                      std::int64_t window_step_us) {
  std::vector<PoseErrorRow> rows;
  for (std::size_t i = 0; i < report.poses.size(); ++i) {
    const std::int64_t t = report.view_t_ref_us[i];
    const SimWindowTruth* best = nullptr;
    std::int64_t best_dt = window_step_us / 2;
    for (const auto& w : truth.windows) {
      if (!w.visible) continue;
      const std::int64_t dt = std::abs(w.t_ref_us - t);
      if (dt <= best_dt) {
        best_dt = dt;
        best = &w;
      }
    }
    if (!best) continue;
    PoseErrorRow row;
    row.t_ref_us = t;
    row.translation_err_mm = (report.poses[i].translation - best->pose.translation).norm();
    const Eigen::Matrix3d rel = report.poses[i].rotation() * best->pose.rotation().transpose();
    row.rotation_err_deg = std::abs(Eigen::AngleAxisd(rel).angle()) * 180.0 / std::numbers::pi;
    rows.push_back(row);
  }
  return rows;
}

std::string render_pose_errors(const std::vector<PoseErrorRow>& rows) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "pose error vs ground truth (" << rows.size() << " matched views)\n";
  double t_sum = 0.0, r_sum = 0.0;
  for (const auto& row : rows) {
    out << "  t_ref " << row.t_ref_us << " us  translation " << row.translation_err_mm << " mm  rotation "
        << row.rotation_err_deg << " deg\n";
    t_sum += row.translation_err_mm;
    r_sum += row.rotation_err_deg;
  }
  if (!rows.empty()) {
    out << "mean abs translation error: " << t_sum / rows.size() << " mm\n";
    out << "mean abs rotation error:    " << r_sum / rows.size() << " deg\n";
  }
  return out.str();
}

void write_pose_errors_csv(const std::string& path, const std::vector<PoseErrorRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write pose error csv: " + path);
  out << "t_ref_us,translation_err_mm,rotation_err_deg\n";
  out << std::setprecision(12);
  for (const auto& row : rows) out << row.t_ref_us << ',' << row.translation_err_mm << ',' << row.rotation_err_deg << '\n';
}

}  // namespace ecal
