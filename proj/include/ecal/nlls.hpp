#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace ecal {

/// Damped least-squares problem. When weight_fn is set, weights are
/// recomputed from the current residuals at the start of every outer
/// iteration and held fixed through that iteration's step acceptance test.
struct LMProblem {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residual_fn;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian_fn;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> weight_fn;  // optional, residuals -> weights
};

struct LMSettings {
  int max_iters = 100;
  double initial_damping = 1e-3;
  double damping_up = 10.0;
  double damping_down = 0.1;
  double damping_ceiling = 1e12;
  double tol_step = 1e-10;
  double tol_cost = 1e-12;
};

enum class LMStatus {
  Converged,
  MaxIterations,
  Diverged,       // non-finite residual or Jacobian mid-iteration
  DampingCeiling  // no acceptable step before lambda hit the ceiling
};

struct LMResult {
  Eigen::VectorXd params;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  LMStatus status = LMStatus::MaxIterations;
  std::vector<double> cost_trace;  // accepted-step costs under that iteration's weights
};

/// Levenberg-Marquardt with multiplicative damping on diag(J^T W J).
LMResult lm_solve(const LMProblem& problem, const Eigen::VectorXd& init, const LMSettings& settings = {});

/// Central-difference Jacobian, column j = (r(p+h e_j) - r(p-h e_j)) / 2h.
Eigen::MatrixXd finite_difference_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual_fn,
                                           const Eigen::VectorXd& params, double h = 1e-6);

}  // namespace ecal
