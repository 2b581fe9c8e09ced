#pragma once

#include <utility>
#include <vector>

#include "navkit/local_map.hpp"
#include "navkit/minco.hpp"
#include "navkit/topo_search.hpp"

namespace navkit {

enum class TimeInit { kAdaptive, kConstant, kTrapezoidal };

struct TrajConfig {
  int pieces = 10;                // M
  double desired_speed = 4.75;    // v_d
  double desired_accel = 10.0;    // a_d
  double speed_limit = 5.0;       // v_lim
  double accel_limit = 12.0;      // a_lim
  double speed_scale_down = 0.7;  // gamma, feasibility back-off factor
  double time_weight = 100.0;     // rho
  double obstacle_weight = 1e4;   // lambda_s
  double speed_weight = 1e3;      // lambda_v
  double accel_weight = 1e3;      // lambda_a
  int samples_per_piece = 16;     // kappa
  double safety_distance = 0.4;   // d_s
  int max_iterations = 60;
  double gradient_tolerance = 1e-4;
  TimeInit time_init = TimeInit::kAdaptive;
};

struct CostBreakdown {
  double smoothness = 0.0;
  double time = 0.0;
  double obstacle = 0.0;
  double velocity = 0.0;
  double acceleration = 0.0;
  double total() const { return smoothness + time + obstacle + velocity + acceleration; }
};

struct OptimizationReport {
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  CostBreakdown breakdown;
};

struct TimeAllocation {
  Eigen::VectorXd durations;
  double cruise_speed = 0.0;  // v_d actually used after the feasibility back-off
};

/// Accelerate-cruise-decelerate duration profile over equal-length pieces.
TimeAllocation allocate_time(double v0, const TrajConfig& config, double length);

struct WaypointSampling {
  Eigen::Matrix3Xd waypoints;  // 3 x (M-1), uniform arc-length marks
  double length = 0.0;
};

WaypointSampling sample_waypoints(const std::vector<Vec3>& path, int pieces);

struct CostGradient {
  double cost = 0.0;
  Eigen::Matrix3Xd grad_waypoints;
  Eigen::VectorXd grad_durations;
  CostBreakdown breakdown;
};

/// Penalized trajectory cost and its analytic gradient with respect to the
/// waypoints and durations. A null or empty map disables the obstacle term.
CostGradient cost_and_gradient(const Eigen::Matrix3Xd& waypoints,
                               const Eigen::VectorXd& durations, const LocalMap* map,
                               const BoundaryState& start, const BoundaryState& end,
                               const TrajConfig& config);

/// Unconstrained minimization over waypoints and positive-reparameterized
/// durations, starting from the given initial values.
std::pair<PiecewiseTrajectory, OptimizationReport> optimize(
    const Eigen::Matrix3Xd& initial_waypoints, const Eigen::VectorXd& initial_durations,
    const LocalMap* map, const BoundaryState& start, const BoundaryState& end,
    const TrajConfig& config);

struct PlanResult {
  PiecewiseTrajectory trajectory;
  OptimizationReport report;
  int chosen_path_index = -1;
  std::vector<double> candidate_costs;
  std::vector<bool> candidate_converged;
};

/// Optimizes one trajectory per reference path and keeps the cheapest
/// converged result (best unconverged when none converge).
PlanResult plan(const LocalMap& map, const std::vector<TopoPath>& paths,
                const BoundaryState& start, const BoundaryState& end,
                const TrajConfig& config);

}  // namespace navkit
