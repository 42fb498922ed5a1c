#include "ecal/erwls.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ecal {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lo = *std::max_element(v.begin(), v.begin() + mid);
    m = 0.5 * (m + lo);
  }
  return m;
}

// Wraps an angle into (-pi/2, pi/2]; the cylinder axis is direction-symmetric.
double wrap_half_pi(double a) {
  const double pi = std::numbers::pi;
  a = std::fmod(a, pi);
  if (a > pi / 2) a -= pi;
  if (a <= -pi / 2) a += pi;
  return a;
}

CylinderParams median_init(std::span<const NormalizedEvent> cluster) {
  std::vector<double> xs, ys;
  xs.reserve(cluster.size());
  ys.reserve(cluster.size());
  for (const auto& e : cluster) {
    xs.push_back(e.x);
    ys.push_back(e.y);
  }
  CylinderParams init;
  init.u = median(xs);
  init.v = median(ys);
  std::vector<double> dists;
  dists.reserve(cluster.size());
  for (const auto& e : cluster) dists.push_back(std::hypot(e.x - init.u, e.y - init.v));
  init.r = std::max(median(dists), 1e-4);
  return init;
}

CylinderFit run_fit(std::span<const NormalizedEvent> cluster, const FitContext& ctx, const ErwlsSettings& settings,
                    bool weighted) {
  CylinderFit fit;
  if (cluster.size() < settings.min_cluster_size) return fit;

  LMProblem problem;
  problem.residual_fn = [&](const Eigen::VectorXd& p) {
    return cylinder_residuals(cluster, CylinderParams::from_vector(p), ctx.t_ref);
  };
  problem.jacobian_fn = [&](const Eigen::VectorXd& p) {
    return cylinder_jacobian(cluster, CylinderParams::from_vector(p), ctx.t_ref);
  };
  if (weighted) problem.weight_fn = [](const Eigen::VectorXd& xi) { return gaussian_weights(xi); };

  LMSettings lm;
  lm.max_iters = settings.max_iters;
  lm.tol_step = settings.tol_step;
  lm.tol_cost = settings.tol_cost;
  const LMResult result = lm_solve(problem, median_init(cluster).to_vector(), lm);
  if (result.status == LMStatus::Diverged || result.status == LMStatus::DampingCeiling) return fit;

  fit.params = CylinderParams::from_vector(result.params);
  fit.params.r = std::abs(fit.params.r);
  fit.params.beta = wrap_half_pi(fit.params.beta);
  fit.params.alpha = wrap_half_pi(fit.params.alpha);
  fit.ok = fit.params.r > 0.0;

  fit.diag.converged = result.converged;
  fit.diag.iterations = result.iterations;
  fit.diag.cost = result.cost;
  const Eigen::VectorXd xi = cylinder_residuals(cluster, fit.params, ctx.t_ref);
  const Eigen::VectorXd w = gaussian_weights(xi);
  const double peak = w.maxCoeff();
  fit.diag.inlier_fraction = peak > 0.0 ? static_cast<double>((w.array() > 0.5 * peak).count()) / w.size() : 0.0;
  return fit;
}

}  // namespace

Eigen::VectorXd CylinderParams::to_vector() const {
  Eigen::VectorXd p(5);
  p << r, u, v, beta, alpha;
  return p;
}

CylinderParams CylinderParams::from_vector(const Eigen::VectorXd& p) {
  return {p[0], p[1], p[2], p[3], p[4]};
}

Eigen::Matrix3d body_rotation(double beta, double alpha) {
  const double cb = std::cos(beta), sb = std::sin(beta);
  const double ca = std::cos(alpha), sa = std::sin(alpha);
  Eigen::Matrix3d rx, ry;
  rx << 1, 0, 0, 0, cb, -sb, 0, sb, cb;
  ry << ca, 0, sa, 0, 1, 0, -sa, 0, ca;
  return rx * ry;
}

Eigen::Matrix3Xd body_transform(std::span<const NormalizedEvent> events, const CylinderParams& omega, double t_ref) {
  const Eigen::Matrix3d rot = body_rotation(omega.beta, omega.alpha);
  Eigen::Matrix3Xd out(3, events.size());
  for (std::size_t k = 0; k < events.size(); ++k) {
    out.col(k) = rot * Eigen::Vector3d(events[k].x - omega.u, events[k].y - omega.v, events[k].t - t_ref);
  }
  return out;
}

Eigen::VectorXd cylinder_residuals(std::span<const NormalizedEvent> events, const CylinderParams& omega, double t_ref) {
  const Eigen::Matrix3Xd body = body_transform(events, omega, t_ref);
  const double r2 = omega.r * omega.r;
  Eigen::VectorXd xi(events.size());
  for (Eigen::Index k = 0; k < xi.size(); ++k) {
    xi[k] = body(0, k) * body(0, k) + body(1, k) * body(1, k) - r2;
  }
  return xi;
}

Eigen::MatrixXd cylinder_jacobian(std::span<const NormalizedEvent> events, const CylinderParams& omega, double t_ref) {
  const double cb = std::cos(omega.beta), sb = std::sin(omega.beta);
  const double ca = std::cos(omega.alpha), sa = std::sin(omega.alpha);
  const Eigen::Matrix3d rot = body_rotation(omega.beta, omega.alpha);

  Eigen::Matrix3d drx, dry;  // dRx/dbeta and dRy/dalpha
  drx << 0, 0, 0, 0, -sb, -cb, 0, cb, -sb;
  dry << -sa, 0, ca, 0, 0, 0, -ca, 0, -sa;
  Eigen::Matrix3d rx, ry;
  rx << 1, 0, 0, 0, cb, -sb, 0, sb, cb;
  ry << ca, 0, sa, 0, 1, 0, -sa, 0, ca;
  const Eigen::Matrix3d drot_beta = drx * ry;
  const Eigen::Matrix3d drot_alpha = rx * dry;

  Eigen::MatrixXd jac(events.size(), 5);
  for (std::size_t k = 0; k < events.size(); ++k) {
    const Eigen::Vector3d q(events[k].x - omega.u, events[k].y - omega.v, events[k].t - t_ref);
    const Eigen::Vector3d body = rot * q;
    const Eigen::Vector3d db = drot_beta * q;
    const Eigen::Vector3d da = drot_alpha * q;
    jac(k, 0) = -2.0 * omega.r;
    jac(k, 1) = -2.0 * (body.x() * rot(0, 0) + body.y() * rot(1, 0));
    jac(k, 2) = -2.0 * (body.x() * rot(0, 1) + body.y() * rot(1, 1));
    jac(k, 3) = 2.0 * (body.x() * db.x() + body.y() * db.y());
    jac(k, 4) = 2.0 * (body.x() * da.x() + body.y() * da.y());
  }
  return jac;
}

Eigen::VectorXd gaussian_weights(const Eigen::VectorXd& xi) {
  const Eigen::Index n = xi.size();
  if (n < 2) return Eigen::VectorXd::Ones(n);
  // Location/scale of the residual distribution. Robust estimates (median,
  // scaled MAD) keep gross outliers from dragging the Gaussian's center onto
  // themselves, which is what lets their weights collapse as the fit
  // converges. When the MAD degenerates (e.g. most residuals identical) fall
  // back to the classical moments.
  std::vector<double> buf(xi.data(), xi.data() + n);
  double mu = median(buf);
  for (double& d : buf) d = std::abs(d - mu);
  double sigma = 1.4826 * median(buf);
  if (sigma < 1e-12) {
    mu = xi.mean();
    sigma = std::sqrt((xi.array() - mu).square().sum() / n);
  }
  if (sigma < 1e-12) return Eigen::VectorXd::Ones(n);
  const double scale = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
  return scale * (-(xi.array() - mu).square() / (2.0 * sigma * sigma)).exp();
}

CylinderFit fit_cylinder(std::span<const NormalizedEvent> cluster, const FitContext& ctx, const ErwlsSettings& settings) {
  return run_fit(cluster, ctx, settings, true);
}

CylinderFit fit_cylinder_unweighted(std::span<const NormalizedEvent> cluster, const FitContext& ctx,
                                    const ErwlsSettings& settings) {
  return run_fit(cluster, ctx, settings, false);
}

}  // namespace ecal
