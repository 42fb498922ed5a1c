#include "ecal/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace ecal {

namespace {

// Distribution helpers on top of mt19937_64 so output bytes do not depend on
// the standard library's distribution implementations.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

double gaussian(std::mt19937_64& rng) {
  const double u1 = std::max(uniform01(rng), 1e-300);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::mt19937_64 window_rng(std::uint64_t seed, std::uint64_t window) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(window + 1)};
  return std::mt19937_64(seq);
}

}  // namespace

ViewPose Trajectory::sample(std::int64_t t_us) const {
  if (keys.empty()) return {};
  if (t_us <= keys.front().t_us) return keys.front().pose;
  if (t_us >= keys.back().t_us) return keys.back().pose;
  std::size_t hi = 1;
  while (keys[hi].t_us < t_us) ++hi;
  const Keyframe& a = keys[hi - 1];
  const Keyframe& b = keys[hi];
  const double s = static_cast<double>(t_us - a.t_us) / static_cast<double>(b.t_us - a.t_us);

  ViewPose out;
  const Eigen::Quaterniond qa(a.pose.rotation());
  const Eigen::Quaterniond qb(b.pose.rotation());
  const Eigen::Quaterniond q = qa.slerp(s, qb);
  const Eigen::AngleAxisd aa(q);
  out.axis_angle = aa.angle() * aa.axis();
  out.translation = (1.0 - s) * a.pose.translation + s * b.pose.translation;
  return out;
}

SimOutput simulate(const Intrinsics& k, const Distortion& psi, const PatternSpec& spec, const Trajectory& traj,
                   const NoiseModel& noise, const SensorGeometry& geometry, const SimOptions& options) {
  SimOutput out;
  const std::vector<Eigen::Vector3d> object = pattern_object_points(spec);
  const double rim_mm = options.circle_radius_mm > 0.0 ? options.circle_radius_mm : 0.25 * spec.pitch_mm();
  const int m = spec.point_count();

  const auto project_px = [&](const Eigen::Vector3d& p, const ViewPose& pose) {
    return project_point(p, pose, k, psi);
  };

  for (int w = 0; w < options.num_windows; ++w) {
    const std::int64_t t0 = w * options.window_step_us;
    const ViewPose pose0 = traj.sample(t0);

    SimWindowTruth truth;
    truth.t_ref_us = t0;
    truth.pose = pose0;

    // Reference centers and projected rim radii at the window anchor.
    std::vector<double> radii_px(m);
    bool visible = true;
    for (int i = 0; i < m; ++i) {
      const auto center = project_px(object[i], pose0);
      const auto rim = project_px(object[i] + Eigen::Vector3d(rim_mm, 0, 0), pose0);
      if (center.behind_camera || rim.behind_camera) {
        visible = false;
        break;
      }
      radii_px[i] = (rim.uv - center.uv).norm();
      truth.centers.push_back(center.uv);
      const double margin = radii_px[i] + 2.0;
      if (center.uv.x() < margin || center.uv.x() > geometry.width - 1 - margin || center.uv.y() < margin ||
          center.uv.y() > geometry.height - 1 - margin) {
        visible = false;
      }
    }
    truth.visible = visible;
    if (!visible) truth.centers.clear();
    out.windows.push_back(truth);
    if (!visible) continue;

    auto rng = window_rng(noise.seed, static_cast<std::uint64_t>(w));
    const auto emit = [&](const Eigen::Vector2d& px, std::int64_t t, int label) {
      const int xi = static_cast<int>(std::lround(px.x()));
      const int yi = static_cast<int>(std::lround(px.y()));
      if (xi < 0 || xi >= geometry.width || yi < 0 || yi >= geometry.height) return;
      Event e;
      e.x = xi;
      e.y = yi;
      e.t_us = t;
      e.p = uniform01(rng) < 0.5 ? std::int8_t{-1} : std::int8_t{1};
      out.events.push_back(e);
      out.labels.push_back(label);
    };

    for (int i = 0; i < m; ++i) {
      const int n_events = std::max(1, static_cast<int>(std::lround(noise.event_rate_per_edge * 2.0 * std::numbers::pi * radii_px[i])));
      for (int e = 0; e < n_events; ++e) {
        const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        const std::int64_t t = t0 + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(options.window_step_us));
        const ViewPose pose = traj.sample(t);
        const Eigen::Vector3d rim3d = object[i] + rim_mm * Eigen::Vector3d(std::cos(theta), std::sin(theta), 0.0);
        const auto proj = project_px(rim3d, pose);
        if (proj.behind_camera) continue;
        Eigen::Vector2d px = proj.uv;
        px.x() += noise.center_jitter_sigma * gaussian(rng);
        px.y() += noise.center_jitter_sigma * gaussian(rng);
        int label = i;
        if (uniform01(rng) < noise.outlier_fraction) {
          const double ang = uniform(rng, 0.0, 2.0 * std::numbers::pi);
          const double mag = uniform(rng, 3.0, 10.0);
          px += mag * Eigen::Vector2d(std::cos(ang), std::sin(ang));
          label = kLabelOutlier;
        }
        emit(px, t, label);
      }
    }

    // Background clutter: dense static rings of event-like spikes.
    const double median_r = radii_px[m / 2];
    int n_clumps = static_cast<int>(noise.background_clutter_rate);
    if (uniform01(rng) < noise.background_clutter_rate - n_clumps) ++n_clumps;
    for (int c = 0; c < n_clumps; ++c) {
      const Eigen::Vector2d center(uniform(rng, 10.0, geometry.width - 10.0), uniform(rng, 10.0, geometry.height - 10.0));
      const double radius = uniform(rng, 0.6, 1.6) * median_r;
      const int n_events = std::max(1, static_cast<int>(std::lround(noise.event_rate_per_edge * 2.0 * std::numbers::pi * radius)));
      for (int e = 0; e < n_events; ++e) {
        const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        const std::int64_t t = t0 + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(options.window_step_us));
        Eigen::Vector2d px = center + radius * Eigen::Vector2d(std::cos(theta), std::sin(theta));
        px.x() += noise.center_jitter_sigma * gaussian(rng);
        px.y() += noise.center_jitter_sigma * gaussian(rng);
        emit(px, t, kLabelClutter);
      }
    }
  }

  // Global time order, labels kept aligned.
  std::vector<std::size_t> order(out.events.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return out.events[a].t_us < out.events[b].t_us; });
  std::vector<Event> sorted_events(out.events.size());
  std::vector<int> sorted_labels(out.labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    sorted_events[i] = out.events[order[i]];
    sorted_labels[i] = out.labels[order[i]];
  }
  out.events = std::move(sorted_events);
  out.labels = std::move(sorted_labels);
  return out;
}

Trajectory default_sweep_trajectory(const PatternSpec& spec, std::int64_t duration_us, std::uint64_t seed,
                                    double distance_mm) {
  const std::vector<Eigen::Vector3d> object = pattern_object_points(spec);
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  for (const auto& p : object) center += p;
  center /= static_cast<double>(object.size());

  auto rng = window_rng(seed ^ 0xA5A5A5A5ULL, 0);
  Trajectory traj;
  const std::int64_t key_step = 200000;  // 200 ms between keyframes
  const std::int64_t n_keys = duration_us / key_step + 2;
  for (std::int64_t i = 0; i < n_keys; ++i) {
    const double tilt_x = uniform(rng, -0.42, 0.42);  // +-24 deg
    const double tilt_y = uniform(rng, -0.42, 0.42);
    const double roll = uniform(rng, -0.25, 0.25);
    const Eigen::Matrix3d rot = (Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()) *
                                 Eigen::AngleAxisd(tilt_x, Eigen::Vector3d::UnitX()) *
                                 Eigen::AngleAxisd(tilt_y, Eigen::Vector3d::UnitY()))
                                    .toRotationMatrix();
    const Eigen::Vector3d offset(uniform(rng, -25.0, 25.0), uniform(rng, -20.0, 20.0),
                                 distance_mm + uniform(rng, -40.0, 60.0));
    Trajectory::Keyframe key;
    key.t_us = i * key_step;
    const Eigen::AngleAxisd aa(rot);
    key.pose.axis_angle = aa.angle() * aa.axis();
    // Keep the pattern center near the optical axis for any tilt.
    key.pose.translation = offset - rot * center;
    traj.keys.push_back(key);
  }
  return traj;
}

}  // namespace ecal
