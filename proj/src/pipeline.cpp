#include "ecal/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace ecal {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  return v[mid];
}

// Robust spread of the cylinder residuals relative to the squared radius; a
// genuine rim sits well below 0.5, a cluster spanning several rims well
// above it.
double fit_quality(const Eigen::VectorXd& xi, double r) {
  std::vector<double> v(xi.data(), xi.data() + xi.size());
  const double mu = median_of(v);
  for (double& d : v) d = std::abs(d - mu);
  return 1.4826 * median_of(v) / (r * r);
}

// Planar 2-means with deterministic farthest-point seeding; splits clusters
// that density chaining fused across neighboring circles.
std::pair<std::vector<NormalizedEvent>, std::vector<NormalizedEvent>> split_planar(
    const std::vector<NormalizedEvent>& events) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& e : events) centroid += Eigen::Vector2d(e.x, e.y);
  centroid /= static_cast<double>(events.size());
  const auto farthest_from = [&](const Eigen::Vector2d& p) {
    Eigen::Vector2d best = p;
    double best_d = -1.0;
    for (const auto& e : events) {
      const double d = (Eigen::Vector2d(e.x, e.y) - p).squaredNorm();
      if (d > best_d) {
        best_d = d;
        best = {e.x, e.y};
      }
    }
    return best;
  };
  Eigen::Vector2d a = farthest_from(centroid);
  Eigen::Vector2d b = farthest_from(a);
  std::vector<char> side(events.size(), 0);
  for (int iter = 0; iter < 8; ++iter) {
    Eigen::Vector2d sum_a = Eigen::Vector2d::Zero(), sum_b = Eigen::Vector2d::Zero();
    int n_a = 0, n_b = 0;
    for (std::size_t i = 0; i < events.size(); ++i) {
      const Eigen::Vector2d p(events[i].x, events[i].y);
      side[i] = (p - a).squaredNorm() <= (p - b).squaredNorm() ? 0 : 1;
      if (side[i] == 0) {
        sum_a += p;
        ++n_a;
      } else {
        sum_b += p;
        ++n_b;
      }
    }
    if (n_a == 0 || n_b == 0) break;
    a = sum_a / n_a;
    b = sum_b / n_b;
  }
  std::pair<std::vector<NormalizedEvent>, std::vector<NormalizedEvent>> out;
  for (std::size_t i = 0; i < events.size(); ++i) {
    (side[i] == 0 ? out.first : out.second).push_back(events[i]);
  }
  return out;
}

}  // namespace

DetectionRun run_detection_only(std::span<const Event> events, const PipelineConfig& config,
                                const WindowObserver& observer) {
  DetectionRun run;
  const auto t_total = Clock::now();

  const auto windows = build_windows(events, config.window);
  if (!events.empty()) {
    const std::int64_t duration = events.back().t_us - events.front().t_us;
    run.stats.possible = std::max<std::int64_t>(duration / config.window.step_us, 1);
  }
  run.stats.windows_built = static_cast<std::int64_t>(windows.size());

  const int m = config.pattern.point_count();
  const double r_scale = std::sqrt(static_cast<double>(config.geometry.width) * config.geometry.height);

  for (std::size_t wi = 0; wi < windows.size(); ++wi) {
    const SpatioTemporalWindow& window = windows[wi];
    const auto normalized = normalize(window, config.geometry);

    auto stage_start = Clock::now();
    const ClusterSet clusters = st_dbscan(normalized, config.cluster);
    run.stats.timings.clustering_s += seconds_since(stage_start);

    WindowDebugInfo debug;
    debug.index = static_cast<int>(wi);
    debug.window = &window;
    debug.clusters = &clusters;

    const auto fail = [&](WindowStage stage, std::int64_t& counter) {
      ++counter;
      debug.stage = stage;
      if (observer) observer(debug);
    };

    if (clusters.cluster_count() == 0) {
      fail(WindowStage::NoClusters, run.stats.failed_no_clusters);
      continue;
    }

    stage_start = Clock::now();
    std::vector<Candidate> candidates;
    // Density chaining can fuse several circles (a clutter clump bridges the
    // gap between rims). Such clusters betray themselves by a residual
    // spread on the order of r^2; they are split planarly and refit until
    // the parts look like single rims.
    const std::function<void(std::vector<NormalizedEvent>&&, int, int)> fit_recursive =
        [&](std::vector<NormalizedEvent>&& cluster_events, int ci, int depth) {
          if (cluster_events.size() < config.erwls.min_cluster_size) return;
          const CylinderFit fit = fit_cylinder(cluster_events, FitContext{0.0}, config.erwls);
          double quality = std::numeric_limits<double>::infinity();
          if (fit.ok) {
            quality = fit_quality(cylinder_residuals(cluster_events, fit.params, 0.0), fit.params.r);
          }
          if (quality <= 0.55) {
            Candidate cand;
            cand.center = Eigen::Vector2d(fit.params.u * config.geometry.width, fit.params.v * config.geometry.height);
            cand.radius = fit.params.r * r_scale;
            cand.cluster_id = ci;
            candidates.push_back(cand);
            return;
          }
          if (depth == 0) return;
          auto [left, right] = split_planar(cluster_events);
          if (left.empty() || right.empty()) return;
          cluster_events.clear();
          fit_recursive(std::move(left), ci, depth - 1);
          fit_recursive(std::move(right), ci, depth - 1);
        };
    for (std::size_t ci = 0; ci < clusters.cluster_count(); ++ci) {
      std::vector<NormalizedEvent> cluster_events;
      cluster_events.reserve(clusters.clusters[ci].size());
      for (std::size_t idx : clusters.clusters[ci]) cluster_events.push_back(normalized[idx]);
      fit_recursive(std::move(cluster_events), static_cast<int>(ci), 3);
    }
    run.stats.timings.fitting_s += seconds_since(stage_start);
    debug.candidates = &candidates;

    if (static_cast<int>(candidates.size()) < m) {
      fail(WindowStage::TooFewCandidates, run.stats.failed_too_few_candidates);
      continue;
    }

    stage_start = Clock::now();
    const Selection selection = select_grid(candidates, m, config.select);
    debug.selection = &selection;
    if (selection.status != SelectStatus::Ok) {
      run.stats.timings.grid_s += seconds_since(stage_start);
      fail(WindowStage::SelectionFailed, run.stats.failed_selection);
      continue;
    }

    std::vector<Eigen::Vector2d> selected;
    selected.reserve(selection.indices.size());
    for (std::size_t idx : selection.indices) selected.push_back(candidates[idx].center);
    const OrderResult order = order_grid_points(selected, config.pattern);
    run.stats.timings.grid_s += seconds_since(stage_start);
    if (order.status != OrderStatus::Ok) {
      fail(WindowStage::OrderingFailed, run.stats.failed_ordering);
      continue;
    }

    GridDetection detection;
    detection.t_ref_us = window.t1_us;
    detection.score = selection.score;
    detection.flipped = order.flipped;
    detection.points.resize(m);
    for (int cell = 0; cell < m; ++cell) detection.points[cell] = selected[order.order[cell]];
    run.detections.push_back(std::move(detection));
    ++run.stats.successes;
    debug.stage = WindowStage::Detected;
    if (observer) observer(debug);
  }

  run.stats.timings.total_s = seconds_since(t_total);
  return run;
}

CalibrationReport calibrate_detections(const std::vector<GridDetection>& detections, const PatternSpec& spec,
                                       const CalibSettings& settings) {
  std::vector<GridDetection> views;
  for (std::size_t i = 0; i < detections.size(); i += std::max(1, settings.thin_every)) {
    views.push_back(detections[i]);
  }
  if (static_cast<int>(views.size()) < std::max(3, settings.min_views)) {
    throw CalibError("too few detections for calibration");
  }

  const std::vector<Eigen::Vector3d> object = pattern_object_points(spec);
  std::vector<Eigen::Vector2d> object2d(object.size());
  for (std::size_t i = 0; i < object.size(); ++i) object2d[i] = object[i].head<2>();

  std::vector<Eigen::Matrix3d> homographies;
  homographies.reserve(views.size());
  for (const auto& view : views) homographies.push_back(estimate_homography(object2d, view.points));

  const Intrinsics init_k = init_intrinsics(homographies);
  const Distortion init_psi;
  std::vector<ViewPose> init_poses;
  init_poses.reserve(views.size());
  for (const auto& view : views) {
    init_poses.push_back(estimate_pose(object, view.points, init_k, init_psi, settings.pixel_unit_distortion));
  }

  RefineOptions options;
  options.tangential = settings.tangential;
  options.pixel_unit_distortion = settings.pixel_unit_distortion;
  options.min_views = std::max(3, settings.min_views);
  return refine(views, spec, init_k, init_psi, init_poses, options);
}

CalibrationRun run_calibration(std::span<const Event> events, const PipelineConfig& config,
                               const WindowObserver& observer) {
  const auto t_total = Clock::now();
  DetectionRun detection = run_detection_only(events, config, observer);

  const auto t_calib = Clock::now();
  CalibrationRun run;
  run.stats = detection.stats;
  try {
    run.report = calibrate_detections(detection.detections, config.pattern, config.calib);
  } catch (const CalibError& err) {
    run.stats.timings.calibration_s = seconds_since(t_calib);
    run.stats.timings.total_s = seconds_since(t_total);
    throw InfeasibleError(std::string("calibration infeasible: ") + err.what(), run.stats);
  }
  run.stats.timings.calibration_s = seconds_since(t_calib);
  run.stats.timings.total_s = seconds_since(t_total);
  return run;
}

}  // namespace ecal
