#include "ecal/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ecal/nlls.hpp"

namespace ecal {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

struct DistortEval {
  Eigen::Vector2d value;
  Eigen::Matrix2d d_point;
  Eigen::Matrix<double, 2, 5> d_psi;
};

DistortEval distort_eval(const Eigen::Vector2d& p, const Distortion& psi) {
  const double x = p.x(), y = p.y();
  const double r2 = x * x + y * y;
  const double r4 = r2 * r2;
  const double r6 = r4 * r2;
  const double radial = 1.0 + psi.k1 * r2 + psi.k2 * r4 + psi.k3 * r6;
  const double g = psi.k1 + 2.0 * psi.k2 * r2 + 3.0 * psi.k3 * r4;  // d(radial)/d(r2)

  DistortEval out;
  out.value.x() = x * radial + 2.0 * psi.p1 * x * y + psi.p2 * (r2 + 2.0 * x * x);
  out.value.y() = y * radial + psi.p1 * (r2 + 2.0 * y * y) + 2.0 * psi.p2 * x * y;

  out.d_point(0, 0) = radial + 2.0 * x * x * g + 2.0 * psi.p1 * y + 6.0 * psi.p2 * x;
  out.d_point(0, 1) = 2.0 * x * y * g + 2.0 * psi.p1 * x + 2.0 * psi.p2 * y;
  out.d_point(1, 0) = 2.0 * x * y * g + 2.0 * psi.p2 * y + 2.0 * psi.p1 * x;
  out.d_point(1, 1) = radial + 2.0 * y * y * g + 6.0 * psi.p1 * y + 2.0 * psi.p2 * x;

  out.d_psi << x * r2, x * r4, x * r6, 2.0 * x * y, r2 + 2.0 * x * x,  //
      y * r2, y * r4, y * r6, r2 + 2.0 * y * y, 2.0 * x * y;
  return out;
}

struct NormalizeTransform {
  Eigen::Matrix3d t;
};

NormalizeTransform hartley_normalize(std::span<const Eigen::Vector2d> pts) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double scale = 0.0;
  for (const auto& p : pts) scale += (p - mean).norm();
  scale /= static_cast<double>(pts.size());
  const double s = scale > 1e-12 ? std::sqrt(2.0) / scale : 1.0;
  NormalizeTransform n;
  n.t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return n;
}

}  // namespace

Eigen::Matrix3d ViewPose::rotation() const {
  const double theta = axis_angle.norm();
  if (theta < 1e-12) return Eigen::Matrix3d::Identity() + skew(axis_angle);
  return Eigen::AngleAxisd(theta, axis_angle / theta).toRotationMatrix();
}

std::vector<Eigen::Vector3d> pattern_object_points(const PatternSpec& spec) {
  const double s = spec.pitch_mm();
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(spec.point_count());
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      pts.emplace_back(c * s, (2.0 * r + (c % 2)) * s, 0.0);
    }
  }
  return pts;
}

Eigen::Matrix3d estimate_homography(std::span<const Eigen::Vector2d> object_points,
                                    std::span<const Eigen::Vector2d> image_points) {
  if (object_points.size() != image_points.size() || object_points.size() < 4) {
    throw CalibError("homography needs >= 4 correspondences");
  }
  const auto t_obj = hartley_normalize(object_points);
  const auto t_img = hartley_normalize(image_points);

  const std::size_t n = object_points.size();
  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d o = t_obj.t * object_points[i].homogeneous();
    const Eigen::Vector3d m = t_img.t * image_points[i].homogeneous();
    a.row(2 * i) << -o.x(), -o.y(), -1, 0, 0, 0, m.x() * o.x(), m.x() * o.y(), m.x();
    a.row(2 * i + 1) << 0, 0, 0, -o.x(), -o.y(), -1, m.y() * o.x(), m.y() * o.y(), m.y();
  }
  // Full V: with the minimal 4 correspondences the thin decomposition has
  // no column for the nullspace.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv[7] < 1e-10 * sv[0]) throw CalibError("degenerate correspondences for homography");
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  Eigen::Matrix3d result = t_img.t.inverse() * hn * t_obj.t;
  if (std::abs(result(2, 2)) > 1e-12) result /= result(2, 2);
  return result;
}

Intrinsics init_intrinsics(std::span<const Eigen::Matrix3d> homographies) {
  if (homographies.size() < 3) throw CalibError("intrinsic initialization needs >= 3 views");

  const auto vrow = [](const Eigen::Matrix3d& h, int i, int j) {
    Eigen::Matrix<double, 6, 1> v;
    v << h(0, i) * h(0, j),                          //
        h(0, i) * h(1, j) + h(1, i) * h(0, j),       //
        h(1, i) * h(1, j),                           //
        h(2, i) * h(0, j) + h(0, i) * h(2, j),       //
        h(2, i) * h(1, j) + h(1, i) * h(2, j),       //
        h(2, i) * h(2, j);
    return v;
  };

  Eigen::MatrixXd v(2 * homographies.size(), 6);
  for (std::size_t n = 0; n < homographies.size(); ++n) {
    v.row(2 * n) = vrow(homographies[n], 0, 1).transpose();
    v.row(2 * n + 1) = (vrow(homographies[n], 0, 0) - vrow(homographies[n], 1, 1)).transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(v, Eigen::ComputeThinV);
  Eigen::Matrix<double, 6, 1> b = svd.matrixV().col(5);
  if (b[0] < 0) b = -b;  // B must be positive definite up to scale

  const double b11 = b[0], b12 = b[1], b22 = b[2], b13 = b[3], b23 = b[4], b33 = b[5];
  const double denom = b11 * b22 - b12 * b12;
  const double v0 = (b12 * b13 - b11 * b23) / denom;
  const double lambda = b33 - (b13 * b13 + v0 * (b12 * b13 - b11 * b23)) / b11;
  const double fx2 = lambda / b11;
  const double fy2 = lambda * b11 / denom;
  if (!(fx2 > 0.0) || !(fy2 > 0.0)) throw CalibError("degenerate view geometry for intrinsic initialization");
  Intrinsics k;
  k.fx = std::sqrt(fx2);
  k.fy = std::sqrt(fy2);
  k.v0 = v0;
  k.u0 = -b13 * fx2 / lambda;
  if (!std::isfinite(k.fx) || !std::isfinite(k.fy) || !std::isfinite(k.u0) || !std::isfinite(k.v0)) {
    throw CalibError("intrinsic initialization produced non-finite values; add views with varied orientation");
  }
  return k;
}

Eigen::Vector2d distort(const Eigen::Vector2d& point, const Distortion& psi) {
  return distort_eval(point, psi).value;
}

std::optional<Eigen::Vector2d> undistort(const Eigen::Vector2d& point, const Distortion& psi) {
  // Preimages past the radial turning point solve the polynomial too but lie
  // outside the bijective region; d(r * radial(r))/dr must stay positive.
  const auto invertible = [&](const Eigen::Vector2d& p) {
    const double r2 = p.squaredNorm();
    return 1.0 + 3.0 * psi.k1 * r2 + 5.0 * psi.k2 * r2 * r2 + 7.0 * psi.k3 * r2 * r2 * r2 > 0.0;
  };
  Eigen::Vector2d x = point;
  for (int iter = 0; iter < 50; ++iter) {
    const DistortEval eval = distort_eval(x, psi);
    const Eigen::Vector2d err = eval.value - point;
    if (err.norm() < 1e-14) return invertible(x) ? std::optional(x) : std::nullopt;
    const Eigen::Vector2d step = eval.d_point.partialPivLu().solve(err);
    if (!step.allFinite()) return std::nullopt;
    x -= step;
    if (!x.allFinite()) return std::nullopt;
  }
  const Eigen::Vector2d err = distort_eval(x, psi).value - point;
  if (err.norm() < 1e-11 && invertible(x)) return x;
  return std::nullopt;
}

void rotate_with_jacobian(const Eigen::Vector3d& axis_angle, const Eigen::Vector3d& p, Eigen::Vector3d& rotated,
                          Eigen::Matrix3d& jac) {
  const double theta2 = axis_angle.squaredNorm();
  if (theta2 < 1e-16) {
    rotated = p + axis_angle.cross(p);
    jac = -skew(p);
    return;
  }
  const double theta = std::sqrt(theta2);
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(theta, axis_angle / theta).toRotationMatrix();
  rotated = rot * p;
  const Eigen::Matrix3d vx = skew(axis_angle);
  const Eigen::Matrix3d imr = Eigen::Matrix3d::Identity() - rot;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Matrix3d di = (axis_angle[i] * vx + skew(axis_angle.cross(imr.col(i)))) / theta2;
    jac.col(i) = di * rotated;
  }
}

ProjectionJacobians project_point(const Eigen::Vector3d& object_point, const ViewPose& pose, const Intrinsics& k,
                                  const Distortion& psi, bool pixel_unit_distortion) {
  ProjectionJacobians out;
  Eigen::Vector3d rotated;
  Eigen::Matrix3d d_rot;
  rotate_with_jacobian(pose.axis_angle, object_point, rotated, d_rot);
  const Eigen::Vector3d xc = rotated + pose.translation;
  if (xc.z() < 1e-9) {
    out.behind_camera = true;
    out.uv.setConstant(std::numeric_limits<double>::quiet_NaN());
    return out;
  }

  const double inv_z = 1.0 / xc.z();
  const Eigen::Vector2d pn(xc.x() * inv_z, xc.y() * inv_z);
  Eigen::Matrix<double, 2, 3> d_n;
  d_n << inv_z, 0, -pn.x() * inv_z, 0, inv_z, -pn.y() * inv_z;

  Eigen::Matrix<double, 2, 3> d_uv_xc;
  if (pixel_unit_distortion) {
    const Eigen::Vector2d pp(k.fx * pn.x(), k.fy * pn.y());
    const DistortEval eval = distort_eval(pp, psi);
    out.uv = eval.value + Eigen::Vector2d(k.u0, k.v0);
    out.d_intrinsics.col(0) = eval.d_point.col(0) * pn.x();
    out.d_intrinsics.col(1) = eval.d_point.col(1) * pn.y();
    out.d_intrinsics.col(2) = Eigen::Vector2d(1, 0);
    out.d_intrinsics.col(3) = Eigen::Vector2d(0, 1);
    out.d_distortion = eval.d_psi;
    d_uv_xc = eval.d_point * Eigen::DiagonalMatrix<double, 2>(k.fx, k.fy) * d_n;
  } else {
    const DistortEval eval = distort_eval(pn, psi);
    out.uv = Eigen::Vector2d(k.fx * eval.value.x() + k.u0, k.fy * eval.value.y() + k.v0);
    out.d_intrinsics << eval.value.x(), 0, 1, 0, 0, eval.value.y(), 0, 1;
    out.d_distortion = Eigen::DiagonalMatrix<double, 2>(k.fx, k.fy) * eval.d_psi;
    d_uv_xc = Eigen::DiagonalMatrix<double, 2>(k.fx, k.fy) * eval.d_point * d_n;
  }
  out.d_pose.leftCols<3>() = d_uv_xc * d_rot;
  out.d_pose.rightCols<3>() = d_uv_xc;
  return out;
}

ViewPose estimate_pose(std::span<const Eigen::Vector3d> object_points, std::span<const Eigen::Vector2d> image_points,
                       const Intrinsics& k, const Distortion& psi, bool pixel_unit_distortion) {
  if (object_points.size() != image_points.size() || object_points.size() < 4) {
    throw CalibError("pose estimation needs >= 4 correspondences");
  }

  // Undistorted, focal-normalized observations.
  std::vector<Eigen::Vector2d> obj2d(object_points.size());
  std::vector<Eigen::Vector2d> norm(image_points.size());
  for (std::size_t i = 0; i < image_points.size(); ++i) {
    obj2d[i] = object_points[i].head<2>();
    Eigen::Vector2d pn;
    if (pixel_unit_distortion) {
      const Eigen::Vector2d pp(image_points[i].x() - k.u0, image_points[i].y() - k.v0);
      const auto und = undistort(pp, psi);
      if (!und) throw CalibError("image point outside invertible distortion region");
      pn = Eigen::Vector2d(und->x() / k.fx, und->y() / k.fy);
    } else {
      const Eigen::Vector2d pd((image_points[i].x() - k.u0) / k.fx, (image_points[i].y() - k.v0) / k.fy);
      const auto und = undistort(pd, psi);
      if (!und) throw CalibError("image point outside invertible distortion region");
      pn = *und;
    }
    norm[i] = pn;
  }

  Eigen::Matrix3d h = estimate_homography(obj2d, norm);
  if (h(2, 2) < 0) h = -h;
  const double lambda = 2.0 / (h.col(0).norm() + h.col(1).norm());
  Eigen::Vector3d r1 = lambda * h.col(0);
  Eigen::Vector3d r2 = lambda * h.col(1);
  Eigen::Vector3d t = lambda * h.col(2);
  if (t.z() < 0) {
    r1 = -r1;
    r2 = -r2;
    t = -t;
  }
  Eigen::Matrix3d approx;
  approx.col(0) = r1;
  approx.col(1) = r2;
  approx.col(2) = r1.cross(r2);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(approx, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d rot = svd.matrixU() * svd.matrixV().transpose();
  if (rot.determinant() < 0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1;
    rot = svd.matrixU() * flip * svd.matrixV().transpose();
  }

  ViewPose pose;
  const Eigen::AngleAxisd aa(rot);
  pose.axis_angle = aa.angle() * aa.axis();
  pose.translation = t;

  // 6-dof refinement on the pixel-space residuals.
  LMProblem problem;
  problem.residual_fn = [&](const Eigen::VectorXd& p) {
    ViewPose vp{p.head<3>(), p.tail<3>()};
    Eigen::VectorXd xi(2 * object_points.size());
    for (std::size_t i = 0; i < object_points.size(); ++i) {
      const auto proj = project_point(object_points[i], vp, k, psi, pixel_unit_distortion);
      xi.segment<2>(2 * i) = proj.uv - image_points[i];
    }
    return xi;
  };
  problem.jacobian_fn = [&](const Eigen::VectorXd& p) {
    ViewPose vp{p.head<3>(), p.tail<3>()};
    Eigen::MatrixXd jac(2 * object_points.size(), 6);
    for (std::size_t i = 0; i < object_points.size(); ++i) {
      jac.middleRows<2>(2 * i) = project_point(object_points[i], vp, k, psi, pixel_unit_distortion).d_pose;
    }
    return jac;
  };
  Eigen::VectorXd init(6);
  init << pose.axis_angle, pose.translation;
  const LMResult result = lm_solve(problem, init);
  if (result.status == LMStatus::Diverged) throw CalibError("pose refinement diverged");
  pose.axis_angle = result.params.head<3>();
  pose.translation = result.params.tail<3>();
  return pose;
}

CalibrationReport refine(const std::vector<GridDetection>& detections, const PatternSpec& spec, const Intrinsics& init_k,
                         const Distortion& init_psi, const std::vector<ViewPose>& init_poses,
                         const RefineOptions& options) {
  const int n_views = static_cast<int>(detections.size());
  const int m = spec.point_count();
  if (n_views < std::max(3, options.min_views)) throw CalibError("too few detections for refinement");
  if (init_poses.size() != detections.size()) throw CalibError("pose count does not match detection count");
  for (const auto& d : detections) {
    if (static_cast<int>(d.points.size()) != m) throw CalibError("detection point count does not match pattern");
  }

  const std::vector<Eigen::Vector3d> object = pattern_object_points(spec);
  const int n_dist = options.tangential ? 5 : 3;
  const int n_shared = 4 + n_dist;
  const int n_params = n_shared + 6 * n_views;

  const auto unpack = [&](const Eigen::VectorXd& p, Intrinsics& k, Distortion& psi) {
    k = {p[0], p[1], p[2], p[3]};
    psi = init_psi;
    psi.k1 = p[4];
    psi.k2 = p[5];
    psi.k3 = p[6];
    if (options.tangential) {
      psi.p1 = p[7];
      psi.p2 = p[8];
    } else {
      psi.p1 = 0.0;
      psi.p2 = 0.0;
    }
  };
  const auto view_pose = [&](const Eigen::VectorXd& p, int n) {
    return ViewPose{p.segment<3>(n_shared + 6 * n), p.segment<3>(n_shared + 6 * n + 3)};
  };

  LMProblem problem;
  problem.residual_fn = [&](const Eigen::VectorXd& p) {
    Intrinsics k;
    Distortion psi;
    unpack(p, k, psi);
    Eigen::VectorXd xi(2 * m * n_views);
    for (int n = 0; n < n_views; ++n) {
      const ViewPose pose = view_pose(p, n);
      for (int i = 0; i < m; ++i) {
        const auto proj = project_point(object[i], pose, k, psi, options.pixel_unit_distortion);
        xi.segment<2>(2 * (n * m + i)) = proj.uv - detections[n].points[i];
      }
    }
    return xi;
  };
  problem.jacobian_fn = [&](const Eigen::VectorXd& p) {
    Intrinsics k;
    Distortion psi;
    unpack(p, k, psi);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * m * n_views, n_params);
    for (int n = 0; n < n_views; ++n) {
      const ViewPose pose = view_pose(p, n);
      for (int i = 0; i < m; ++i) {
        const auto proj = project_point(object[i], pose, k, psi, options.pixel_unit_distortion);
        const int row = 2 * (n * m + i);
        jac.block<2, 4>(row, 0) = proj.d_intrinsics;
        jac.block(row, 4, 2, n_dist) = proj.d_distortion.leftCols(n_dist);
        jac.block<2, 6>(row, n_shared + 6 * n) = proj.d_pose;
      }
    }
    return jac;
  };

  Eigen::VectorXd init(n_params);
  init[0] = init_k.fx;
  init[1] = init_k.fy;
  init[2] = init_k.u0;
  init[3] = init_k.v0;
  init[4] = init_psi.k1;
  init[5] = init_psi.k2;
  init[6] = init_psi.k3;
  if (options.tangential) {
    init[7] = init_psi.p1;
    init[8] = init_psi.p2;
  }
  for (int n = 0; n < n_views; ++n) {
    init.segment<3>(n_shared + 6 * n) = init_poses[n].axis_angle;
    init.segment<3>(n_shared + 6 * n + 3) = init_poses[n].translation;
  }

  LMSettings settings;
  settings.max_iters = options.max_iters;
  const LMResult result = lm_solve(problem, init, settings);
  if (result.status == LMStatus::Diverged) throw CalibError("calibration refinement diverged");

  CalibrationReport report;
  unpack(result.params, report.intrinsics, report.distortion);
  report.detections = n_views;
  report.poses.resize(n_views);
  report.per_view_rms.resize(n_views);
  report.view_t_ref_us.resize(n_views);
  const Eigen::VectorXd xi = problem.residual_fn(result.params);
  double total = 0.0;
  for (int n = 0; n < n_views; ++n) {
    report.poses[n] = view_pose(result.params, n);
    report.view_t_ref_us[n] = detections[n].t_ref_us;
    double view_sum = 0.0;
    for (int i = 0; i < m; ++i) {
      const double du = xi[2 * (n * m + i)];
      const double dv = xi[2 * (n * m + i) + 1];
      view_sum += du * du + dv * dv;
      report.residuals.push_back({n, i, du, dv});
    }
    report.per_view_rms[n] = std::sqrt(view_sum / m);
    total += view_sum;
  }
  report.zeta_r = std::sqrt(total / (static_cast<double>(m) * n_views));

  if (n_views < 20) report.warnings.push_back("fewer than 20 views; intrinsics may be poorly conditioned");
  double max_rel_angle = 0.0;
  for (int a = 0; a < n_views; ++a) {
    for (int b = a + 1; b < n_views; ++b) {
      const Eigen::Matrix3d rel = report.poses[a].rotation().transpose() * report.poses[b].rotation();
      max_rel_angle = std::max(max_rel_angle, std::abs(Eigen::AngleAxisd(rel).angle()));
    }
  }
  if (max_rel_angle < 10.0 * std::numbers::pi / 180.0) {
    report.warnings.push_back("low pose diversity; all views near-parallel");
  }
  return report;
}

}  // namespace ecal
