#include <doctest.h>

#include "ecal/nlls.hpp"

using namespace ecal;

TEST_CASE("linear residual converges to its root") {
  LMProblem p;
  p.residual_fn = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, x[0] - 3.0); };
  p.jacobian_fn = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Constant(1, 1, 1.0); };
  const auto result = lm_solve(p, Eigen::VectorXd::Zero(1));
  CHECK(result.converged);
  CHECK(result.params[0] == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(result.cost == doctest::Approx(0.0));
}

TEST_CASE("Rosenbrock valley from the classic start") {
  LMProblem p;
  p.residual_fn = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(2);
    r << 10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0];
    return r;
  };
  p.jacobian_fn = [](const Eigen::VectorXd& x) {
    Eigen::MatrixXd j(2, 2);
    j << -20.0 * x[0], 10.0, -1.0, 0.0;
    return j;
  };
  Eigen::VectorXd init(2);
  init << -1.2, 1.0;
  LMSettings settings;
  settings.max_iters = 500;
  const auto result = lm_solve(p, init, settings);
  CHECK(result.converged);
  CHECK(std::abs(result.params[0] - 1.0) < 1e-8);
  CHECK(std::abs(result.params[1] - 1.0) < 1e-8);
}

TEST_CASE("a zero-weighted residual is ignored") {
  LMProblem p;
  p.residual_fn = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(2);
    r << x[0] - 3.0, x[0] - 10.0;
    return r;
  };
  p.jacobian_fn = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Ones(2, 1); };
  p.weight_fn = [](const Eigen::VectorXd&) {
    Eigen::VectorXd w(2);
    w << 1.0, 0.0;
    return w;
  };
  const auto result = lm_solve(p, Eigen::VectorXd::Zero(1));
  CHECK(result.params[0] == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("accepted-step costs never increase") {
  LMProblem p;
  p.residual_fn = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(3);
    r << std::exp(0.3 * x[0]) - 2.0, x[0] * x[1] - 1.5, x[1] - 0.7;
    return r;
  };
  p.jacobian_fn = [&](const Eigen::VectorXd& x) { return finite_difference_jacobian(p.residual_fn, x); };
  Eigen::VectorXd init(2);
  init << 5.0, -3.0;
  const auto result = lm_solve(p, init);
  for (std::size_t i = 1; i < result.cost_trace.size(); ++i) {
    CHECK(result.cost_trace[i] <= result.cost_trace[i - 1] + 1e-12);
  }
}

TEST_CASE("near-zero damping solves a linear system in one accepted step") {
  // 3 residuals, 2 unknowns; compare against the normal-equations solution.
  Eigen::MatrixXd a(3, 2);
  a << 1.0, 2.0, 3.0, -1.0, 0.5, 0.5;
  Eigen::VectorXd b(3);
  b << 1.0, 2.0, 0.25;
  const Eigen::VectorXd direct = (a.transpose() * a).ldlt().solve(a.transpose() * b);

  LMProblem p;
  p.residual_fn = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(a * x - b); };
  p.jacobian_fn = [&](const Eigen::VectorXd&) { return a; };
  LMSettings settings;
  settings.initial_damping = 1e-14;
  const auto result = lm_solve(p, Eigen::VectorXd::Zero(2), settings);
  CHECK(result.cost_trace.size() >= 1);
  CHECK((result.params - direct).norm() < 1e-9);
}

TEST_CASE("central differences recover a parabola slope") {
  const auto fn = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, x[0] * x[0]); };
  const auto j = finite_difference_jacobian(fn, Eigen::VectorXd::Constant(1, 2.0), 1e-5);
  CHECK(j(0, 0) == doctest::Approx(4.0).epsilon(1e-8));
}

TEST_CASE("a constant residual has a zero Jacobian") {
  const auto fn = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Constant(2, 1.5); };
  const auto j = finite_difference_jacobian(fn, Eigen::VectorXd::Zero(3));
  CHECK(j.norm() == 0.0);
}
