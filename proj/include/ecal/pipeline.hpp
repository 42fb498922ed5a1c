#pragma once

#include <functional>
#include <span>

#include "ecal/calibration.hpp"
#include "ecal/clustering.hpp"
#include "ecal/erwls.hpp"
#include "ecal/event_model.hpp"
#include "ecal/grid_detect.hpp"

namespace ecal {

struct CalibSettings {
  int min_views = 10;
  int thin_every = 1;  // keep every k-th detection
  bool tangential = true;
  bool pixel_unit_distortion = false;
};

struct PipelineConfig {
  SensorGeometry geometry;
  WindowConfig window;
  ClusterParamsCfg cluster;
  ErwlsSettings erwls;
  PatternSpec pattern;
  SelectConfig select;
  CalibSettings calib;
};

enum class WindowStage {
  Detected,
  NoClusters,
  TooFewCandidates,
  SelectionFailed,
  OrderingFailed,
};

struct StageTimings {
  double clustering_s = 0.0;
  double fitting_s = 0.0;
  double grid_s = 0.0;
  double calibration_s = 0.0;
  double total_s = 0.0;
};

struct RunStatistics {
  std::int64_t possible = 0;  // stream duration / window step
  std::int64_t windows_built = 0;
  std::int64_t successes = 0;
  std::int64_t failed_no_clusters = 0;
  std::int64_t failed_too_few_candidates = 0;
  std::int64_t failed_selection = 0;
  std::int64_t failed_ordering = 0;
  StageTimings timings;
  double success_rate() const { return possible > 0 ? static_cast<double>(successes) / possible : 0.0; }
};

/// Per-window debug payload for CSV dumps; pointers are valid only inside
/// the observer call.
struct WindowDebugInfo {
  int index = 0;
  WindowStage stage = WindowStage::NoClusters;
  const SpatioTemporalWindow* window = nullptr;
  const ClusterSet* clusters = nullptr;
  const std::vector<Candidate>* candidates = nullptr;
  const Selection* selection = nullptr;
};
using WindowObserver = std::function<void(const WindowDebugInfo&)>;

struct DetectionRun {
  std::vector<GridDetection> detections;
  RunStatistics stats;
};

struct CalibrationRun {
  CalibrationReport report;
  RunStatistics stats;
};

class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, RunStatistics stats) : std::runtime_error(what), stats_(std::move(stats)) {}
  const RunStatistics& stats() const { return stats_; }

 private:
  RunStatistics stats_;
};

/// Windows -> ST-DBSCAN -> cylinder fits -> grid selection -> ordering.
/// Window failures are counted, never fatal.
DetectionRun run_detection_only(std::span<const Event> events, const PipelineConfig& config,
                                const WindowObserver& observer = {});

/// Full pipeline; throws InfeasibleError (carrying statistics) when fewer
/// than the configured minimum of views detect.
CalibrationRun run_calibration(std::span<const Event> events, const PipelineConfig& config,
                               const WindowObserver& observer = {});

/// Closed-form start plus joint refinement for a fixed detection list.
CalibrationReport calibrate_detections(const std::vector<GridDetection>& detections, const PatternSpec& spec,
                                       const CalibSettings& settings);

}  // namespace ecal
