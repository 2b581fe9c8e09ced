#pragma once

#include <Eigen/Dense>
#include <vector>

#include "navkit/geometry.hpp"

namespace navkit {

struct BoundaryState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
};

/// Piecewise quintic trajectory; piece j evaluates c_j^T (1, t, ..., t^5) for
/// local t in [0, T_j].
class PiecewiseTrajectory {
 public:
  PiecewiseTrajectory() = default;
  PiecewiseTrajectory(Eigen::MatrixX3d coeffs, Eigen::VectorXd durations,
                      Eigen::Matrix3Xd waypoints);

  int piece_count() const { return static_cast<int>(durations_.size()); }
  double total_duration() const { return durations_.sum(); }
  const Eigen::VectorXd& durations() const { return durations_; }
  const Eigen::MatrixX3d& coefficients() const { return coeffs_; }
  const Eigen::Matrix3Xd& waypoints() const { return waypoints_; }
  Eigen::Matrix<double, 6, 3> piece_coefficients(int j) const {
    return coeffs_.block<6, 3>(6 * j, 0);
  }

  /// Derivative of given order (0..3) at global time t, clamped to the span.
  Vec3 derivative(double t, int order) const;
  Vec3 position(double t) const { return derivative(t, 0); }
  Vec3 velocity(double t) const { return derivative(t, 1); }
  Vec3 acceleration(double t) const { return derivative(t, 2); }
  Vec3 jerk(double t) const { return derivative(t, 3); }

  bool valid() const { return durations_.size() > 0; }

 private:
  Eigen::MatrixX3d coeffs_;   // 6M x 3 stacked piece coefficients
  Eigen::VectorXd durations_;
  Eigen::Matrix3Xd waypoints_;
};

/// Polynomial basis (1, t, ..., t^5) differentiated `order` times.
Eigen::Matrix<double, 6, 1> quintic_basis(double t, int order);

/// Minimum-jerk quintic spline through intermediate waypoints with full
/// position/velocity/acceleration boundary conditions. The coefficients are
/// the solution of a banded linear system parameterized by (q, T) only, which
/// also yields the adjoint used to pull cost gradients back onto (q, T).
class MincoJerkSolver {
 public:
  /// Fixes boundary states and piece count; allocates the banded system.
  void set_conditions(const BoundaryState& start, const BoundaryState& end,
                      int piece_count);
  /// Solves for coefficients given waypoints (3 x M-1) and durations (M).
  /// Durations must be strictly positive.
  void set_parameters(const Eigen::Matrix3Xd& waypoints,
                      const Eigen::VectorXd& durations);

  const Eigen::MatrixX3d& coefficients() const { return coeffs_; }
  int piece_count() const { return piece_count_; }

  /// Integral of the squared jerk over the whole trajectory.
  double jerk_energy() const;
  /// Partial derivatives of the jerk energy w.r.t. coefficients and durations
  /// (holding the other fixed); both outputs are assigned, not accumulated.
  void jerk_energy_grad(Eigen::MatrixX3d* grad_coeffs,
                        Eigen::VectorXd* grad_times) const;

  /// Pulls a cost gradient expressed against (coefficients, durations) back to
  /// the free parameters (waypoints, durations) through the linear system.
  void propagate_gradient(const Eigen::MatrixX3d& partial_grad_coeffs,
                          const Eigen::VectorXd& partial_grad_times,
                          Eigen::Matrix3Xd* grad_waypoints,
                          Eigen::VectorXd* grad_durations) const;

  PiecewiseTrajectory trajectory() const;

 private:
  // Row-banded storage with lower/upper bandwidth 6, LU-factorized in place.
  class BandedSystem {
   public:
    void create(int n, int lower, int upper);
    void reset();
    double& operator()(int i, int j) {
      return data_[static_cast<size_t>(i - j + upper_) * n_ + j];
    }
    double operator()(int i, int j) const {
      return data_[static_cast<size_t>(i - j + upper_) * n_ + j];
    }
    void factorize_lu();
    void solve(Eigen::MatrixX3d& b) const;
    void solve_adjoint(Eigen::MatrixX3d& b) const;

   private:
    int n_ = 0;
    int lower_ = 0;
    int upper_ = 0;
    std::vector<double> data_;
  };

  int piece_count_ = 0;
  Eigen::Matrix3d head_;  // columns: position, velocity, acceleration
  Eigen::Matrix3d tail_;
  BandedSystem system_;
  Eigen::MatrixX3d rhs_;
  Eigen::MatrixX3d coeffs_;
  Eigen::VectorXd durations_;
  Eigen::Matrix3Xd waypoints_;
};

/// One-shot construction of the minimum-jerk spline.
PiecewiseTrajectory minco_construct(const Eigen::Matrix3Xd& waypoints,
                                    const Eigen::VectorXd& durations,
                                    const BoundaryState& start,
                                    const BoundaryState& end);

}  // namespace navkit
