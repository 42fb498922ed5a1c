#pragma once

#include <cstdint>
#include <vector>

#include "ecal/calibration.hpp"
#include "ecal/event_model.hpp"
#include "ecal/grid_detect.hpp"

namespace ecal {

/// Pose keyframes; linear in translation, spherical-linear in rotation,
/// clamped outside the key range.
struct Trajectory {
  struct Keyframe {
    std::int64_t t_us = 0;
    ViewPose pose;
  };
  std::vector<Keyframe> keys;
  ViewPose sample(std::int64_t t_us) const;
};

struct NoiseModel {
  double center_jitter_sigma = 0.0;      // px
  double event_rate_per_edge = 2.5;      // events per px of rim circumference per window
  double outlier_fraction = 0.0;         // share of rim events displaced grossly
  double background_clutter_rate = 0.0;  // spurious dense clumps per window
  std::uint64_t seed = 1;
};

inline constexpr int kLabelOutlier = -1;
inline constexpr int kLabelClutter = -2;

struct SimWindowTruth {
  bool visible = false;
  std::int64_t t_ref_us = 0;
  std::vector<Eigen::Vector2d> centers;  // distorted projections, pattern order
  ViewPose pose;                         // at t_ref
};

struct SimOptions {
  int num_windows = 60;
  std::int64_t window_step_us = 33000;
  double circle_radius_mm = 0.0;  // <= 0 selects 0.25 * pattern pitch
};

struct SimOutput {
  std::vector<Event> events;  // time-sorted
  std::vector<int> labels;    // parallel: circle id, kLabelOutlier, kLabelClutter
  std::vector<SimWindowTruth> windows;
};

/// Emits rim events of the moving circle grid plus jitter, gross outliers,
/// and clutter clumps. Deterministic under a fixed seed (per-window RNG
/// streams, no libstdc++ distribution dependence).
SimOutput simulate(const Intrinsics& k, const Distortion& psi, const PatternSpec& spec, const Trajectory& traj,
                   const NoiseModel& noise, const SensorGeometry& geometry, const SimOptions& options);

/// Deterministic hand-sweep style trajectory: tilts and lateral offsets vary
/// per keyframe while keeping the pattern inside the frame.
Trajectory default_sweep_trajectory(const PatternSpec& spec, std::int64_t duration_us, std::uint64_t seed,
                                    double distance_mm = 380.0);

}  // namespace ecal
