#pragma once

#include <string>
#include <vector>

#include "ecal/config.hpp"
#include "ecal/simulator.hpp"

namespace ecal {

inline constexpr int kReportSchemaVersion = 1;

struct LoadedReport {
  CalibrationReport report;
  RunStatistics stats;
  ConfigMap config;
};

void write_report_file(const std::string& path, const CalibrationReport& report, const RunStatistics& stats,
                       const ConfigMap& config_echo);
LoadedReport read_report_file(const std::string& path);  // throws on schema mismatch

std::string render_report_text(const LoadedReport& loaded);
void write_residuals_csv(const std::string& path, const CalibrationReport& report);

struct GroundTruthData {
  std::vector<SimWindowTruth> windows;
  std::vector<int> labels;
};

void write_ground_truth_file(const std::string& path, const SimOutput& sim);
GroundTruthData read_ground_truth_file(const std::string& path);

struct PoseErrorRow {
  std::int64_t t_ref_us = 0;
  double translation_err_mm = 0.0;
  double rotation_err_deg = 0.0;
};

/// Matches calibrated views to ground-truth windows by reference time
/// (nearest anchor within half a window step).
std::vector<PoseErrorRow> pose_errors(const CalibrationReport& report, const GroundTruthData& truth,
                                      std::int64_t window_step_us = 33000);
std::string render_pose_errors(const std::vector<PoseErrorRow>& rows);
void write_pose_errors_csv(const std::string& path, const std::vector<PoseErrorRow>& rows);

}  // namespace ecal
