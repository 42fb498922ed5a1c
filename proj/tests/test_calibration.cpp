#include <doctest.h>

#include <random>

#include "ecal/calibration.hpp"
#include "ecal/nlls.hpp"

using namespace ecal;

namespace {

ViewPose random_view(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  ViewPose pose;
  pose.axis_angle = {0.35 * uni(rng), 0.35 * uni(rng), 0.2 * uni(rng)};
  pose.translation = {-120.0 + 25.0 * uni(rng), -45.0 + 20.0 * uni(rng), 400.0 + 60.0 * uni(rng)};
  return pose;
}

std::vector<Eigen::Vector2d> project_all(const std::vector<Eigen::Vector3d>& object, const ViewPose& pose,
                                         const Intrinsics& k, const Distortion& psi) {
  std::vector<Eigen::Vector2d> out;
  for (const auto& p : object) out.push_back(project_point(p, pose, k, psi).uv);
  return out;
}

GridDetection detection_from(const std::vector<Eigen::Vector2d>& pts, std::int64_t t) {
  GridDetection d;
  d.points = pts;
  d.t_ref_us = t;
  return d;
}

}  // namespace

TEST_CASE("homography: identity correspondence") {
  std::vector<Eigen::Vector2d> obj, img;
  for (int i = 0; i < 8; ++i) {
    obj.push_back({std::cos(0.7 * i) * 40.0, std::sin(0.9 * i) * 30.0});
    img.push_back(obj.back());
  }
  const Eigen::Matrix3d h = estimate_homography(obj, img);
  CHECK((h - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("homography: known random map recovered to 1e-9") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::Matrix3d truth;
    truth << 1.2 + 0.2 * uni(rng), 0.1 * uni(rng), 50.0 * uni(rng), 0.1 * uni(rng), 0.9 + 0.2 * uni(rng),
        40.0 * uni(rng), 1e-3 * uni(rng), 1e-3 * uni(rng), 1.0;
    std::vector<Eigen::Vector2d> obj, img;
    for (int i = 0; i < 20; ++i) {
      const Eigen::Vector2d p(60.0 * uni(rng), 45.0 * uni(rng));
      const Eigen::Vector3d q = truth * p.homogeneous();
      obj.push_back(p);
      img.push_back(q.hnormalized());
    }
    const Eigen::Matrix3d h = estimate_homography(obj, img) / estimate_homography(obj, img)(2, 2) * truth(2, 2);
    CHECK((h - truth).cwiseAbs().maxCoeff() / truth.cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("homography: four exact points suffice") {
  Eigen::Matrix3d truth;
  truth << 1.1, 0.05, 12.0, -0.04, 0.95, -7.0, 2e-4, -1e-4, 1.0;
  std::vector<Eigen::Vector2d> obj{{0, 0}, {50, 0}, {50, 40}, {0, 40}};
  std::vector<Eigen::Vector2d> img;
  for (const auto& p : obj) img.push_back((truth * p.homogeneous()).hnormalized());
  const Eigen::Matrix3d h = estimate_homography(obj, img);
  for (const auto& p : obj) {
    const Eigen::Vector2d q = (h * p.homogeneous()).hnormalized();
    const Eigen::Vector2d expect = (truth * p.homogeneous()).hnormalized();
    CHECK((q - expect).norm() < 1e-9);
  }
}

TEST_CASE("closed-form intrinsics from clean homographies") {
  std::mt19937_64 rng(7);
  const Intrinsics k{350.0, 350.0, 160.0, 120.0};
  const auto object = pattern_object_points({4, 11, 24.0});
  std::vector<Eigen::Vector2d> object_plane;
  for (const auto& p : object) object_plane.push_back(p.head<2>());
  std::vector<Eigen::Matrix3d> hs;
  for (int i = 0; i < 10; ++i) {
    const ViewPose pose = random_view(rng);
    const auto img = project_all(object, pose, k, {});
    hs.push_back(estimate_homography(object_plane, img));
  }
  const Intrinsics est = init_intrinsics(hs);
  CHECK(std::abs(est.fx - k.fx) / k.fx < 1e-6);
  CHECK(std::abs(est.fy - k.fy) / k.fy < 1e-6);
  CHECK(std::abs(est.u0 - k.u0) < 1e-4);
  CHECK(std::abs(est.v0 - k.v0) < 1e-4);
}

TEST_CASE("two views cannot initialize") {
  std::mt19937_64 rng(9);
  const Intrinsics k{350.0, 350.0, 160.0, 120.0};
  const auto object = pattern_object_points({4, 11, 24.0});
  std::vector<Eigen::Vector2d> object_plane;
  for (const auto& p : object) object_plane.push_back(p.head<2>());
  std::vector<Eigen::Matrix3d> hs;
  for (int i = 0; i < 2; ++i) {
    hs.push_back(estimate_homography(object_plane, project_all(object, random_view(rng), k, {})));
  }
  CHECK_THROWS_AS(init_intrinsics(hs), CalibError);
}

TEST_CASE("distortion basics") {
  CHECK((distort({0.3, -0.2}, {}) - Eigen::Vector2d(0.3, -0.2)).norm() == 0.0);
  const Distortion psi{-0.34, 0.12, -0.02, -0.0006, -0.0005};
  CHECK(distort({0.0, 0.0}, psi).norm() == 0.0);

  // k1-only point check against the closed-form polynomial.
  const Distortion k1only{-0.34, 0.0, 0.0, 0.0, 0.0};
  const Eigen::Vector2d d = distort({0.5, 0.0}, k1only);
  CHECK(d.x() == doctest::Approx(0.5 * (1.0 - 0.34 * 0.25)).epsilon(1e-15));
  CHECK(d.y() == 0.0);

  // Full model at a generic point, coefficients substituted symbolically.
  const Eigen::Vector2d p(0.21, -0.13);
  const double r2 = p.squaredNorm();
  const double radial = 1.0 + psi.k1 * r2 + psi.k2 * r2 * r2 + psi.k3 * r2 * r2 * r2;
  const Eigen::Vector2d expect(
      p.x() * radial + 2.0 * psi.p1 * p.x() * p.y() + psi.p2 * (r2 + 2.0 * p.x() * p.x()),
      p.y() * radial + psi.p1 * (r2 + 2.0 * p.y() * p.y()) + 2.0 * psi.p2 * p.x() * p.y());
  CHECK((distort(p, psi) - expect).norm() < 1e-15);
}

TEST_CASE("undistort inverts distort inside the invertible region") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uni(-0.45, 0.45);
  const Distortion psi{-0.34, 0.12, -0.02, -0.0006, -0.0005};
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector2d p(uni(rng), uni(rng));
    const auto back = undistort(distort(p, psi), psi);
    REQUIRE(back.has_value());
    CHECK((*back - p).norm() < 1e-10);
  }
}

TEST_CASE("points past the radial turning point fail to invert") {
  // For x_d = x(1 + k1 x^2), k1 < 0, the map turns over at x = 1/sqrt(-3 k1);
  // beyond the fold the distorted radius decreases again and Newton cannot
  // find a consistent preimage for a far-out observation.
  const Distortion psi{-0.34, 0.0, 0.0, 0.0, 0.0};
  const auto result = undistort({1.8, 0.0}, psi);
  CHECK_FALSE(result.has_value());
}

TEST_CASE("pinhole reduction at identity pose") {
  const Intrinsics k{350.0, 352.0, 160.0, 120.0};
  ViewPose pose;
  pose.translation = {0.0, 0.0, 500.0};
  const Eigen::Vector3d p(40.0, -25.0, 0.0);
  const auto proj = project_point(p, pose, k, {});
  CHECK(proj.uv.x() == doctest::Approx(k.fx * 40.0 / 500.0 + k.u0));
  CHECK(proj.uv.y() == doctest::Approx(k.fy * -25.0 / 500.0 + k.v0));
}

TEST_CASE("rotation Jacobian matches finite differences") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::Vector3d aa(uni(rng), uni(rng), uni(rng));
    if (trial % 5 == 0) aa *= 1e-9;  // small-angle branch
    const Eigen::Vector3d p(50.0 * uni(rng), 50.0 * uni(rng), 50.0 * uni(rng));
    Eigen::Vector3d rotated;
    Eigen::Matrix3d jac;
    rotate_with_jacobian(aa, p, rotated, jac);
    const auto numeric = finite_difference_jacobian(
        [&](const Eigen::VectorXd& v) {
          Eigen::Vector3d r;
          Eigen::Matrix3d unused;
          rotate_with_jacobian(v, p, r, unused);
          return Eigen::VectorXd(r);
        },
        aa, 1e-7);
    CHECK((jac - numeric).cwiseAbs().maxCoeff() / std::max(1.0, numeric.cwiseAbs().maxCoeff()) < 1e-6);
  }
}

TEST_CASE("projection Jacobians match finite differences") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const Intrinsics k{350.0, 352.0, 160.0, 120.0};
  const Distortion psi{-0.34, 0.12, -0.02, -0.0006, -0.0005};
  for (int trial = 0; trial < 30; ++trial) {
    const ViewPose pose = random_view(rng);
    const Eigen::Vector3d obj(100.0 * uni(rng), 80.0 * uni(rng), 0.0);
    const auto proj = project_point(obj, pose, k, psi);
    REQUIRE_FALSE(proj.behind_camera);

    Eigen::VectorXd packed(15);
    packed << k.fx, k.fy, k.u0, k.v0, psi.k1, psi.k2, psi.k3, psi.p1, psi.p2, pose.axis_angle, pose.translation;
    const auto numeric = finite_difference_jacobian(
        [&](const Eigen::VectorXd& v) {
          const Intrinsics kk{v[0], v[1], v[2], v[3]};
          const Distortion pp{v[4], v[5], v[6], v[7], v[8]};
          ViewPose vp;
          vp.axis_angle = v.segment<3>(9);
          vp.translation = v.segment<3>(12);
          return Eigen::VectorXd(project_point(obj, vp, kk, pp).uv);
        },
        packed, 1e-6);

    Eigen::Matrix<double, 2, 15> analytic;
    analytic << proj.d_intrinsics, proj.d_distortion, proj.d_pose;
    const double scale = std::max(1.0, numeric.cwiseAbs().maxCoeff());
    CHECK((analytic - numeric).cwiseAbs().maxCoeff() / scale < 1e-5);
  }
}

TEST_CASE("pose recovery from exact projections") {
  std::mt19937_64 rng(19);
  const Intrinsics k{350.0, 352.0, 160.0, 120.0};
  const Distortion psi{-0.34, 0.12, -0.02, 0.0, 0.0};
  const auto object = pattern_object_points({4, 11, 24.0});
  for (int trial = 0; trial < 10; ++trial) {
    const ViewPose truth = random_view(rng);
    const auto img = project_all(object, truth, k, psi);
    const ViewPose est = estimate_pose(object, img, k, psi);
    CHECK((est.axis_angle - truth.axis_angle).norm() < 1e-6);
    CHECK((est.translation - truth.translation).norm() < 1e-4);
  }
}

TEST_CASE("fronto-parallel distance lands in translation z") {
  const Intrinsics k{350.0, 352.0, 160.0, 120.0};
  const auto object = pattern_object_points({4, 11, 24.0});
  ViewPose truth;
  truth.translation = {-120.0, -42.0, 437.0};
  const auto img = project_all(object, truth, k, {});
  const ViewPose est = estimate_pose(object, img, k, {});
  CHECK(est.translation.z() == doctest::Approx(437.0).epsilon(1e-9));
}

TEST_CASE("bundle recovery from noiseless detections") {
  std::mt19937_64 rng(23);
  const PatternSpec spec{4, 11, 24.0};
  const Intrinsics k{350.0, 352.0, 160.0, 120.0};
  const Distortion psi{-0.34, 0.12, -0.02, -0.0006, -0.0005};
  const auto object = pattern_object_points(spec);

  std::vector<GridDetection> detections;
  std::vector<ViewPose> init_poses;
  std::vector<Eigen::Matrix3d> hs;
  std::vector<Eigen::Vector2d> object_plane;
  for (const auto& p : object) object_plane.push_back(p.head<2>());
  for (int i = 0; i < 20; ++i) {
    const ViewPose pose = random_view(rng);
    detections.push_back(detection_from(project_all(object, pose, k, psi), 33000 * i));
  }
  for (const auto& d : detections) hs.push_back(estimate_homography(object_plane, d.points));
  const Intrinsics init_k = init_intrinsics(hs);
  for (const auto& d : detections) init_poses.push_back(estimate_pose(object, d.points, init_k, {}));

  const auto report = refine(detections, spec, init_k, {}, init_poses);
  CHECK(std::abs(report.intrinsics.fx - k.fx) / k.fx < 1e-6);
  CHECK(std::abs(report.intrinsics.fy - k.fy) / k.fy < 1e-6);
  CHECK(std::abs(report.distortion.k1 - psi.k1) < 1e-8);
  CHECK(std::abs(report.distortion.p1 - psi.p1) < 1e-8);
  CHECK(report.zeta_r < 1e-8);
}

TEST_CASE("noisy detections keep the focal length within half a percent") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> gauss(0.0, 0.1);
  const PatternSpec spec{4, 11, 24.0};
  const Intrinsics k{350.0, 352.0, 160.0, 120.0};
  const Distortion psi{-0.34, 0.12, -0.02, -0.0006, -0.0005};
  const auto object = pattern_object_points(spec);
  std::vector<Eigen::Vector2d> object_plane;
  for (const auto& p : object) object_plane.push_back(p.head<2>());

  std::vector<GridDetection> detections;
  for (int i = 0; i < 40; ++i) {
    auto img = project_all(object, random_view(rng), k, psi);
    for (auto& uv : img) uv += Eigen::Vector2d(gauss(rng), gauss(rng));
    detections.push_back(detection_from(img, 33000 * i));
  }
  std::vector<Eigen::Matrix3d> hs;
  for (const auto& d : detections) hs.push_back(estimate_homography(object_plane, d.points));
  const Intrinsics init_k = init_intrinsics(hs);
  std::vector<ViewPose> init_poses;
  for (const auto& d : detections) init_poses.push_back(estimate_pose(object, d.points, init_k, {}));

  const auto report = refine(detections, spec, init_k, {}, init_poses);
  CHECK(std::abs(report.intrinsics.fx - k.fx) / k.fx < 0.005);
  CHECK(report.zeta_r < 0.15);
  CHECK(report.zeta_r > 0.05);
}

TEST_CASE("scaling the pattern scales only the translations") {
  std::mt19937_64 rng(31);
  const PatternSpec spec{4, 11, 24.0};
  const PatternSpec big{4, 11, 48.0};
  const Intrinsics k{350.0, 352.0, 160.0, 120.0};
  const Distortion psi{-0.2, 0.05, 0.0, 0.0, 0.0};
  const auto object = pattern_object_points(spec);
  std::vector<Eigen::Vector2d> object_plane;
  for (const auto& p : object) object_plane.push_back(p.head<2>());

  std::vector<GridDetection> detections;
  std::vector<ViewPose> poses;
  for (int i = 0; i < 12; ++i) {
    poses.push_back(random_view(rng));
    detections.push_back(detection_from(project_all(object, poses.back(), k, psi), 33000 * i));
  }
  std::vector<Eigen::Matrix3d> hs;
  for (const auto& d : detections) hs.push_back(estimate_homography(object_plane, d.points));
  const Intrinsics init_k = init_intrinsics(hs);
  std::vector<ViewPose> init_poses;
  for (const auto& d : detections) init_poses.push_back(estimate_pose(object, d.points, init_k, {}));
  const auto base = refine(detections, spec, init_k, {}, init_poses);

  std::vector<ViewPose> scaled_init;
  for (const auto& p : init_poses) {
    ViewPose s = p;
    s.translation *= 2.0;  // doubled pitch doubles the distance at fixed image
    scaled_init.push_back(s);
  }
  const auto scaled = refine(detections, big, init_k, {}, scaled_init);
  CHECK(std::abs(scaled.intrinsics.fx - base.intrinsics.fx) < 1e-6);
  CHECK(std::abs(scaled.distortion.k1 - base.distortion.k1) < 1e-8);
  CHECK(std::abs(scaled.zeta_r - base.zeta_r) < 1e-8);
  for (std::size_t i = 0; i < base.poses.size(); ++i) {
    CHECK((scaled.poses[i].translation - 2.0 * base.poses[i].translation).norm() < 1e-4);
  }
}
