#pragma once

#include <Eigen/Dense>
#include <deque>
#include <functional>

namespace navkit {

struct LbfgsParams {
  int memory = 8;
  int max_iterations = 60;
  double gradient_tolerance = 1e-4;
  double armijo_slope = 1e-4;
  double step_shrink = 0.5;
  double min_step = 1e-20;
};

struct LbfgsResult {
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
};

/// Bounded-memory quasi-Newton descent with Armijo backtracking. The callback
/// returns the cost and fills the gradient; x is refined in place. Accepted
/// steps never increase the cost.
inline LbfgsResult lbfgs_minimize(
    Eigen::VectorXd& x,
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& func,
    const LbfgsParams& params = {}) {
  const int n = static_cast<int>(x.size());
  Eigen::VectorXd grad(n), new_grad(n), direction(n), candidate(n);
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;  // (s, y)
  std::deque<double> rho;

  LbfgsResult result;
  double cost = func(x, grad);
  result.cost = cost;

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    if (grad.norm() < params.gradient_tolerance) {
      result.converged = true;
      break;
    }

    // Two-loop recursion over the stored curvature pairs.
    direction = -grad;
    std::vector<double> alpha(pairs.size());
    for (int i = static_cast<int>(pairs.size()) - 1; i >= 0; --i) {
      alpha[i] = rho[i] * pairs[i].first.dot(direction);
      direction -= alpha[i] * pairs[i].second;
    }
    if (!pairs.empty()) {
      const auto& [s, y] = pairs.back();
      direction *= s.dot(y) / y.squaredNorm();
    }
    for (size_t i = 0; i < pairs.size(); ++i) {
      const double beta = rho[i] * pairs[i].second.dot(direction);
      direction += (alpha[i] - beta) * pairs[i].first;
    }
    double slope = grad.dot(direction);
    if (slope >= 0.0) {  // fall back to steepest descent
      direction = -grad;
      slope = -grad.squaredNorm();
      pairs.clear();
      rho.clear();
    }

    double step = 1.0;
    double new_cost = cost;
    bool accepted = false;
    while (step >= params.min_step) {
      candidate = x + step * direction;
      new_cost = func(candidate, new_grad);
      if (std::isfinite(new_cost) &&
          new_cost <= cost + params.armijo_slope * step * slope) {
        accepted = true;
        break;
      }
      step *= params.step_shrink;
    }
    if (!accepted) {
      result.line_search_failed = true;
      break;
    }

    Eigen::VectorXd s = candidate - x;
    Eigen::VectorXd y = new_grad - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      pairs.emplace_back(std::move(s), std::move(y));
      rho.push_back(1.0 / sy);
      if (static_cast<int>(pairs.size()) > params.memory) {
        pairs.pop_front();
        rho.pop_front();
      }
    }

    x = candidate;
    cost = new_cost;
    grad = new_grad;
    result.iterations = iter + 1;
    result.cost = cost;
  }
  if (!result.converged && grad.norm() < params.gradient_tolerance) {
    result.converged = true;
  }
  result.cost = cost;
  return result;
}

}  // namespace navkit
