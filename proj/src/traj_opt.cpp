#include "navkit/traj_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "navkit/lbfgs.hpp"

namespace navkit {

namespace {

constexpr double kTimeFloor = 1e-3;

double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
  return y > 30.0 ? y : std::log(std::expm1(std::max(y, 1e-12)));
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Duration to cover distance d starting at v_in while driving the speed
// toward v_target with acceleration magnitude a; cruises at v_target once
// reached. Returns the duration and the exit speed.
std::pair<double, double> piece_duration(double v_in, double v_target, double a,
                                         double d) {
  constexpr double kTiny = 1e-9;
  if (a < kTiny || std::abs(v_target - v_in) < kTiny) {
    const double v = std::max(std::max(v_in, v_target), kTiny);
    return {d / v, v_in};
  }
  if (v_in < v_target) {
    const double reach = (v_target * v_target - v_in * v_in) / (2.0 * a);
    if (reach >= d) {
      const double v_out = std::sqrt(v_in * v_in + 2.0 * a * d);
      return {(v_out - v_in) / a, v_out};
    }
    const double t_accel = (v_target - v_in) / a;
    return {t_accel + (d - reach) / v_target, v_target};
  }
  // decelerating toward the target speed
  const double reach = (v_in * v_in - v_target * v_target) / (2.0 * a);
  if (reach >= d) {
    const double v_out = std::sqrt(std::max(v_in * v_in - 2.0 * a * d, 0.0));
    return {(v_in - v_out) / a, v_out};
  }
  const double t_decel = (v_in - v_target) / a;
  return {t_decel + (d - reach) / std::max(v_target, kTiny), v_target};
}

}  // namespace

TimeAllocation allocate_time(double v0, const TrajConfig& config, double length) {
  if (length <= 0.0) throw std::invalid_argument("non-positive path length");
  const int m = config.pieces;
  const double a = config.desired_accel;
  double vd = config.desired_speed;

  if (config.time_init == TimeInit::kConstant) {
    return {Eigen::VectorXd::Constant(m, (length / m) / vd), vd};
  }
  if (config.time_init == TimeInit::kTrapezoidal) {
    // Every piece independently ramps from rest to v_d and back to rest.
    const double d = length / m;
    double t;
    if (d >= vd * vd / a) {
      t = 2.0 * vd / a + (d - vd * vd / a) / vd;
    } else {
      t = 2.0 * std::sqrt(d / a);
    }
    return {Eigen::VectorXd::Constant(m, t), vd};
  }

  // The back-off condition can be unsatisfiable when v0 is too high to stop
  // within the length, so the loop is bounded.
  int guard = 0;
  while (((vd - v0) * (vd - v0) + vd * vd) / (2.0 * a) > length && guard++ < 64) {
    vd *= config.speed_scale_down;
  }

  const double d = length / m;
  int m_up = static_cast<int>(std::ceil(m * (vd - v0) * (vd - v0) / (2.0 * length * a)));
  int m_down = static_cast<int>(std::ceil(m - m * vd * vd / (2.0 * length * a)));
  m_up = std::clamp(m_up, 0, m);
  m_down = std::clamp(m_down, m_up, m);

  Eigen::VectorXd durations(m);
  double v = v0;
  for (int i = 0; i < m_up; ++i) {
    const auto [t, v_out] = piece_duration(v, vd, a, d);
    durations[i] = t;
    v = v_out;
  }
  double v_back = 0.0;
  for (int i = m - 1; i >= m_down; --i) {
    const auto [t, v_out] = piece_duration(v_back, vd, a, d);
    durations[i] = t;
    v_back = v_out;
  }
  for (int i = m_up; i < m_down; ++i) {
    durations[i] = d / vd;
  }
  return {durations, vd};
}

WaypointSampling sample_waypoints(const std::vector<Vec3>& path, int pieces) {
  if (path.size() < 2) throw std::invalid_argument("path needs at least two nodes");
  if (pieces < 1) throw std::invalid_argument("piece count must be >= 1");

  std::vector<double> cumulative{0.0};
  cumulative.reserve(path.size());
  for (size_t i = 1; i < path.size(); ++i) {
    cumulative.push_back(cumulative.back() + (path[i] - path[i - 1]).norm());
  }
  const double length = cumulative.back();

  WaypointSampling out;
  out.length = length;
  out.waypoints.resize(3, pieces - 1);
  size_t segment = 0;
  for (int j = 1; j < pieces; ++j) {
    const double s = length * j / pieces;
    while (segment + 2 < path.size() && cumulative[segment + 1] < s) ++segment;
    const double span = cumulative[segment + 1] - cumulative[segment];
    const double ratio = span > 1e-12 ? (s - cumulative[segment]) / span : 0.0;
    out.waypoints.col(j - 1) =
        path[segment] + ratio * (path[segment + 1] - path[segment]);
  }
  return out;
}

namespace {

// Shared evaluation machinery: penalties sampled along each piece plus the
// closed-form jerk energy, pulled back to (q, T) through the spline system.
class CostEvaluator {
 public:
  CostEvaluator(const LocalMap* map, const TrajConfig& config,
                const BoundaryState& start, const BoundaryState& end)
      : map_(map && map->store().size() > 0 ? map : nullptr), config_(config) {
    solver_.set_conditions(start, end, config.pieces);
  }

  CostGradient evaluate(const Eigen::Matrix3Xd& waypoints,
                        const Eigen::VectorXd& durations) {
    solver_.set_parameters(waypoints, durations);
    const int m = config_.pieces;
    const int kappa = config_.samples_per_piece;

    CostGradient out;
    Eigen::MatrixX3d grad_coeffs;
    Eigen::VectorXd grad_times;
    solver_.jerk_energy_grad(&grad_coeffs, &grad_times);
    out.breakdown.smoothness = solver_.jerk_energy();
    out.breakdown.time = config_.time_weight * durations.sum();
    grad_times.array() += config_.time_weight;

    const double vlim2 = config_.speed_limit * config_.speed_limit;
    const double alim2 = config_.accel_limit * config_.accel_limit;

    for (int j = 0; j < m; ++j) {
      const auto c = solver_.coefficients().block<6, 3>(6 * j, 0);
      const double tj = durations[j];
      const double weight = tj / kappa;
      for (int s = 0; s <= kappa; ++s) {
        const double frac = static_cast<double>(s) / kappa;
        const double t = tj * frac;
        const auto beta0 = quintic_basis(t, 0);
        const auto beta1 = quintic_basis(t, 1);
        const auto beta2 = quintic_basis(t, 2);
        const Vec3 pos = c.transpose() * beta0;
        const Vec3 vel = c.transpose() * beta1;
        const Vec3 acc = c.transpose() * beta2;

        if (map_ != nullptr) {
          const auto field = map_->resdf(pos);
          const double g = config_.safety_distance - field->distance;
          if (g > 0.0) {
            const double pen = g * g * g;
            const double dpen = 3.0 * g * g;
            const Vec3 dgdp = field->gradient;  // -grad of the distance field
            out.breakdown.obstacle += config_.obstacle_weight * weight * pen;
            grad_coeffs.block<6, 3>(6 * j, 0) +=
                config_.obstacle_weight * weight * dpen * beta0 * dgdp.transpose();
            grad_times[j] += config_.obstacle_weight *
                             (pen / kappa + weight * dpen * dgdp.dot(vel) * frac);
          }
        }

        const double gv = vel.squaredNorm() - vlim2;
        if (gv > 0.0) {
          const double pen = gv * gv * gv;
          const double dpen = 3.0 * gv * gv;
          out.breakdown.velocity += config_.speed_weight * weight * pen;
          grad_coeffs.block<6, 3>(6 * j, 0) +=
              config_.speed_weight * weight * dpen * 2.0 * beta1 * vel.transpose();
          grad_times[j] += config_.speed_weight *
                           (pen / kappa + weight * dpen * 2.0 * vel.dot(acc) * frac);
        }

        const double ga = acc.squaredNorm() - alim2;
        if (ga > 0.0) {
          const Vec3 jer = c.transpose() * quintic_basis(t, 3);
          const double pen = ga * ga * ga;
          const double dpen = 3.0 * ga * ga;
          out.breakdown.acceleration += config_.accel_weight * weight * pen;
          grad_coeffs.block<6, 3>(6 * j, 0) +=
              config_.accel_weight * weight * dpen * 2.0 * beta2 * acc.transpose();
          grad_times[j] += config_.accel_weight *
                           (pen / kappa + weight * dpen * 2.0 * acc.dot(jer) * frac);
        }
      }
    }

    solver_.propagate_gradient(grad_coeffs, grad_times, &out.grad_waypoints,
                               &out.grad_durations);
    out.cost = out.breakdown.total();
    return out;
  }

  PiecewiseTrajectory trajectory() const { return solver_.trajectory(); }

 private:
  const LocalMap* map_;
  TrajConfig config_;
  MincoJerkSolver solver_;
};

}  // namespace

CostGradient cost_and_gradient(const Eigen::Matrix3Xd& waypoints,
                               const Eigen::VectorXd& durations, const LocalMap* map,
                               const BoundaryState& start, const BoundaryState& end,
                               const TrajConfig& config) {
  CostEvaluator evaluator(map, config, start, end);
  return evaluator.evaluate(waypoints, durations);
}

std::pair<PiecewiseTrajectory, OptimizationReport> optimize(
    const Eigen::Matrix3Xd& initial_waypoints, const Eigen::VectorXd& initial_durations,
    const LocalMap* map, const BoundaryState& start, const BoundaryState& end,
    const TrajConfig& config) {
  const int m = config.pieces;
  if (initial_waypoints.cols() != m - 1 || initial_durations.size() != m) {
    throw std::invalid_argument("initial values do not match piece count");
  }
  if ((initial_durations.array() <= 0.0).any()) {
    throw std::invalid_argument("degenerate piece");
  }

  CostEvaluator evaluator(map, config, start, end);
  const int nq = 3 * (m - 1);

  Eigen::VectorXd x(nq + m);
  for (int i = 0; i < m - 1; ++i) {
    x.segment<3>(3 * i) = initial_waypoints.col(i);
  }
  for (int j = 0; j < m; ++j) {
    x[nq + j] = softplus_inverse(std::max(initial_durations[j] - kTimeFloor, 1e-9));
  }

  Eigen::Matrix3Xd waypoints(3, m - 1);
  Eigen::VectorXd durations(m);
  const auto unpack = [&](const Eigen::VectorXd& v) {
    for (int i = 0; i < m - 1; ++i) waypoints.col(i) = v.segment<3>(3 * i);
    for (int j = 0; j < m; ++j) durations[j] = softplus(v[nq + j]) + kTimeFloor;
  };

  const auto objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd& grad) {
    unpack(v);
    const CostGradient cg = evaluator.evaluate(waypoints, durations);
    grad.resize(v.size());
    for (int i = 0; i < m - 1; ++i) grad.segment<3>(3 * i) = cg.grad_waypoints.col(i);
    for (int j = 0; j < m; ++j) grad[nq + j] = cg.grad_durations[j] * sigmoid(v[nq + j]);
    return cg.cost;
  };

  LbfgsParams params;
  params.max_iterations = config.max_iterations;
  params.gradient_tolerance = config.gradient_tolerance;
  const LbfgsResult lbfgs = lbfgs_minimize(x, objective, params);

  unpack(x);
  const CostGradient final_eval = evaluator.evaluate(waypoints, durations);

  OptimizationReport report;
  report.final_cost = final_eval.cost;
  report.iterations = lbfgs.iterations;
  report.converged = lbfgs.converged;
  report.breakdown = final_eval.breakdown;
  return {evaluator.trajectory(), report};
}

PlanResult plan(const LocalMap& map, const std::vector<TopoPath>& paths,
                const BoundaryState& start, const BoundaryState& end,
                const TrajConfig& config) {
  if (paths.empty()) throw std::invalid_argument("no reference paths");

  PlanResult result;
  double best_converged_cost = std::numeric_limits<double>::infinity();
  double best_any_cost = std::numeric_limits<double>::infinity();
  int best_converged = -1;
  int best_any = -1;
  std::vector<std::pair<PiecewiseTrajectory, OptimizationReport>> candidates;

  const int count = std::min<int>(static_cast<int>(paths.size()), 10);
  for (int i = 0; i < count; ++i) {
    const WaypointSampling sampled = sample_waypoints(paths[i].nodes, config.pieces);
    const double length = std::max(sampled.length, 1e-6);
    const TimeAllocation alloc =
        allocate_time(start.velocity.norm(), config, length);
    auto candidate = optimize(sampled.waypoints, alloc.durations, &map, start, end,
                              config);
    const double cost = candidate.second.final_cost;
    const bool converged = candidate.second.converged;
    result.candidate_costs.push_back(cost);
    result.candidate_converged.push_back(converged);
    candidates.push_back(std::move(candidate));
    if (converged && cost < best_converged_cost) {
      best_converged_cost = cost;
      best_converged = i;
    }
    if (cost < best_any_cost) {
      best_any_cost = cost;
      best_any = i;
    }
  }

  result.chosen_path_index = best_converged >= 0 ? best_converged : best_any;
  result.trajectory = candidates[result.chosen_path_index].first;
  result.report = candidates[result.chosen_path_index].second;
  return result;
}

}  // namespace navkit
