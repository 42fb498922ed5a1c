#pragma once

#include <Eigen/Dense>
#include <span>

#include "ecal/event_model.hpp"
#include "ecal/nlls.hpp"

namespace ecal {

/// Slanted-cylinder parameters in normalized window coordinates. (u,v) is
/// the axis point on the t = t_ref plane, r the cross-section radius, and
/// (beta, alpha) the axis tilts about the window x and y axes.
struct CylinderParams {
  double r = 0.0;
  double u = 0.0;
  double v = 0.0;
  double beta = 0.0;
  double alpha = 0.0;

  Eigen::VectorXd to_vector() const;
  static CylinderParams from_vector(const Eigen::VectorXd& p);
};

struct FitContext {
  double t_ref = 0.0;  // first-timestamp plane of the window
};

struct FitDiagnostics {
  bool converged = false;
  int iterations = 0;
  double cost = 0.0;
  double inlier_fraction = 0.0;
};

struct CylinderFit {
  bool ok = false;
  CylinderParams params;
  FitDiagnostics diag;
};

/// Rotation R = Rx(beta) * Ry(alpha) taking window-frame offsets into the
/// cylinder body frame.
Eigen::Matrix3d body_rotation(double beta, double alpha);

/// Body-frame coordinates R * (x - u, y - v, t - t_ref) per event.
Eigen::Matrix3Xd body_transform(std::span<const NormalizedEvent> events, const CylinderParams& omega, double t_ref);

/// xi_k = x~^2 + y~^2 - r^2: signed squared planar distance from the axis.
Eigen::VectorXd cylinder_residuals(std::span<const NormalizedEvent> events, const CylinderParams& omega, double t_ref);

/// Analytic d(xi)/d(r,u,v,beta,alpha).
Eigen::MatrixXd cylinder_jacobian(std::span<const NormalizedEvent> events, const CylinderParams& omega, double t_ref);

/// Gaussian pdf of each residual under a location/scale estimate of the
/// residual vector itself: median and scaled MAD, falling back to the
/// classical mean and standard deviation when the MAD degenerates; uniform
/// when the spread collapses entirely.
Eigen::VectorXd gaussian_weights(const Eigen::VectorXd& xi);

struct ErwlsSettings {
  int max_iters = 50;
  double tol_step = 1e-10;
  double tol_cost = 1e-10;
  std::size_t min_cluster_size = 6;
};

/// Reweighted cylinder fit: median initialization, then LM with the Gaussian
/// weights recomputed from the residuals each iteration.
CylinderFit fit_cylinder(std::span<const NormalizedEvent> cluster, const FitContext& ctx, const ErwlsSettings& settings = {});

/// Plain unweighted fit with the same initialization; used for robustness
/// comparisons.
CylinderFit fit_cylinder_unweighted(std::span<const NormalizedEvent> cluster, const FitContext& ctx,
                                    const ErwlsSettings& settings = {});

}  // namespace ecal
