#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecal/grid_detect.hpp"

namespace ecal {

struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double u0 = 0.0;
  double v0 = 0.0;
};

/// Brown-Conrady coefficients: radial k1..k3, tangential p1, p2.
struct Distortion {
  double k1 = 0.0, k2 = 0.0, k3 = 0.0;
  double p1 = 0.0, p2 = 0.0;
};

/// Pattern-frame to camera-frame transform; translation in millimeters.
struct ViewPose {
  Eigen::Vector3d axis_angle = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation() const;
};

struct PointResidual {
  int view = 0;
  int point = 0;
  double du = 0.0;
  double dv = 0.0;
};

struct CalibrationReport {
  Intrinsics intrinsics;
  Distortion distortion;
  std::vector<ViewPose> poses;
  std::vector<std::int64_t> view_t_ref_us;
  std::vector<double> per_view_rms;
  double zeta_r = 0.0;  // global per-point Euclidean RMS, pixels
  int detections = 0;
  std::vector<PointResidual> residuals;
  std::vector<std::string> warnings;
};

class CalibError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Canonical pattern-frame layout, row-major order: point (r,c) at
/// (c*pitch, (2r + c%2)*pitch, 0) with pitch = diagonal_spacing/sqrt(2).
std::vector<Eigen::Vector3d> pattern_object_points(const PatternSpec& spec);

/// Normalized DLT (Hartley normalization on both sides), h33 fixed to 1.
Eigen::Matrix3d estimate_homography(std::span<const Eigen::Vector2d> object_points,
                                    std::span<const Eigen::Vector2d> image_points);

/// Zhang closed-form intrinsics from >= 3 view homographies (zero skew).
Intrinsics init_intrinsics(std::span<const Eigen::Matrix3d> homographies);

/// Forward distortion map on focal-normalized coordinates.
Eigen::Vector2d distort(const Eigen::Vector2d& point, const Distortion& psi);

/// Newton inversion of distort; empty when the point falls outside the
/// invertible region (no convergence in 50 iterations).
std::optional<Eigen::Vector2d> undistort(const Eigen::Vector2d& point, const Distortion& psi);

/// Rotated point and the 3x3 Jacobian of R(aa)*p with respect to aa.
void rotate_with_jacobian(const Eigen::Vector3d& axis_angle, const Eigen::Vector3d& p, Eigen::Vector3d& rotated,
                          Eigen::Matrix3d& jac);

struct ProjectionJacobians {
  Eigen::Vector2d uv;
  Eigen::Matrix<double, 2, 4> d_intrinsics;  // fx, fy, u0, v0
  Eigen::Matrix<double, 2, 5> d_distortion;  // k1, k2, k3, p1, p2
  Eigen::Matrix<double, 2, 6> d_pose;        // axis_angle, translation
  bool behind_camera = false;
};

/// Projects a pattern point through pose -> pinhole -> distortion. When
/// pixel_unit_distortion is set the polynomial acts on pixel offsets from
/// the principal point instead of focal-normalized coordinates.
ProjectionJacobians project_point(const Eigen::Vector3d& object_point, const ViewPose& pose, const Intrinsics& k,
                                  const Distortion& psi, bool pixel_unit_distortion = false);

/// Planar pose from the view homography, then 6-dof LM refinement on the
/// reprojection residuals.
ViewPose estimate_pose(std::span<const Eigen::Vector3d> object_points, std::span<const Eigen::Vector2d> image_points,
                       const Intrinsics& k, const Distortion& psi, bool pixel_unit_distortion = false);

struct RefineOptions {
  bool tangential = true;  // when false p1, p2 stay fixed at zero
  bool pixel_unit_distortion = false;
  int max_iters = 100;
  int min_views = 3;
};

/// Joint bundle over intrinsics, distortion, and all view poses minimizing
/// unweighted squared reprojection residuals.
CalibrationReport refine(const std::vector<GridDetection>& detections, const PatternSpec& spec, const Intrinsics& init_k,
                         const Distortion& init_psi, const std::vector<ViewPose>& init_poses,
                         const RefineOptions& options = {});

}  // namespace ecal
