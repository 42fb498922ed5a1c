#include "ecal/nlls.hpp"

#include <cmath>

namespace ecal {

namespace {

double weighted_cost(const Eigen::VectorXd& w, const Eigen::VectorXd& xi) {
  return (w.array() * xi.array().square()).sum();
}

}  // namespace

LMResult lm_solve(const LMProblem& problem, const Eigen::VectorXd& init, const LMSettings& settings) {
  LMResult result;
  result.params = init;

  double lambda = settings.initial_damping;
  Eigen::VectorXd params = init;
  Eigen::VectorXd xi = problem.residual_fn(params);
  if (!xi.allFinite()) {
    result.status = LMStatus::Diverged;
    return result;
  }

  for (int iter = 0; iter < settings.max_iters; ++iter) {
    result.iterations = iter + 1;
    Eigen::VectorXd w = problem.weight_fn ? problem.weight_fn(xi) : Eigen::VectorXd::Ones(xi.size());
    Eigen::MatrixXd jac = problem.jacobian_fn(params);
    if (!jac.allFinite() || !w.allFinite()) {
      result.status = LMStatus::Diverged;
      result.params = params;
      result.cost = weighted_cost(w, xi);
      return result;
    }

    const double cost = weighted_cost(w, xi);
    const Eigen::MatrixXd jtw = jac.transpose() * w.asDiagonal();
    const Eigen::MatrixXd hessian = jtw * jac;
    const Eigen::VectorXd gradient = jtw * xi;
    // Floor keeps the damping term nonzero for parameters the residual
    // currently does not touch.
    Eigen::VectorXd diag = hessian.diagonal().cwiseMax(1e-12);

    bool accepted = false;
    Eigen::VectorXd step;
    while (lambda <= settings.damping_ceiling) {
      Eigen::MatrixXd a = hessian;
      a.diagonal() += lambda * diag;
      step = a.ldlt().solve(-gradient);
      if (step.allFinite()) {
        const Eigen::VectorXd trial = params + step;
        const Eigen::VectorXd xi_trial = problem.residual_fn(trial);
        if (xi_trial.allFinite() && weighted_cost(w, xi_trial) < cost) {
          params = trial;
          xi = xi_trial;
          lambda = std::max(lambda * settings.damping_down, 1e-15);
          accepted = true;
          break;
        }
      }
      lambda *= settings.damping_up;
    }

    if (!accepted) {
      // Flat gradient at the current point counts as convergence; an
      // exhausted damping schedule with real gradient does not.
      result.params = params;
      result.cost = cost;
      if (gradient.lpNorm<Eigen::Infinity>() < 1e-10) {
        result.converged = true;
        result.status = LMStatus::Converged;
      } else {
        result.status = LMStatus::DampingCeiling;
      }
      return result;
    }

    const double new_cost = weighted_cost(w, xi);
    result.cost_trace.push_back(new_cost);
    const double rel_decrease = (cost - new_cost) / std::max(cost, 1e-300);
    if (step.norm() < settings.tol_step || rel_decrease < settings.tol_cost) {
      result.params = params;
      result.cost = new_cost;
      result.converged = true;
      result.status = LMStatus::Converged;
      return result;
    }
  }

  result.params = params;
  result.cost = result.cost_trace.empty() ? weighted_cost(Eigen::VectorXd::Ones(xi.size()), xi) : result.cost_trace.back();
  result.status = LMStatus::MaxIterations;
  return result;
}

Eigen::MatrixXd finite_difference_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual_fn,
                                           const Eigen::VectorXd& params, double h) {
  const Eigen::VectorXd r0 = residual_fn(params);
  Eigen::MatrixXd jac(r0.size(), params.size());
  for (Eigen::Index j = 0; j < params.size(); ++j) {
    Eigen::VectorXd p = params;
    p[j] += h;
    const Eigen::VectorXd rp = residual_fn(p);
    p[j] = params[j] - h;
    const Eigen::VectorXd rm = residual_fn(p);
    jac.col(j) = (rp - rm) / (2.0 * h);
  }
  return jac;
}

}  // namespace ecal
