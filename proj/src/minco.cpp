#include "navkit/minco.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace navkit {

PiecewiseTrajectory::PiecewiseTrajectory(Eigen::MatrixX3d coeffs,
                                         Eigen::VectorXd durations,
                                         Eigen::Matrix3Xd waypoints)
    : coeffs_(std::move(coeffs)),
      durations_(std::move(durations)),
      waypoints_(std::move(waypoints)) {}

Eigen::Matrix<double, 6, 1> quintic_basis(double t, int order) {
  Eigen::Matrix<double, 6, 1> beta = Eigen::Matrix<double, 6, 1>::Zero();
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double t4 = t3 * t;
  switch (order) {
    case 0:
      beta << 1.0, t, t2, t3, t4, t4 * t;
      break;
    case 1:
      beta << 0.0, 1.0, 2.0 * t, 3.0 * t2, 4.0 * t3, 5.0 * t4;
      break;
    case 2:
      beta << 0.0, 0.0, 2.0, 6.0 * t, 12.0 * t2, 20.0 * t3;
      break;
    case 3:
      beta << 0.0, 0.0, 0.0, 6.0, 24.0 * t, 60.0 * t2;
      break;
    case 4:
      beta << 0.0, 0.0, 0.0, 0.0, 24.0, 120.0 * t;
      break;
    case 5:
      beta << 0.0, 0.0, 0.0, 0.0, 0.0, 120.0;
      break;
    default:
      break;
  }
  return beta;
}

Vec3 PiecewiseTrajectory::derivative(double t, int order) const {
  const int m = piece_count();
  t = std::clamp(t, 0.0, total_duration());
  int j = 0;
  while (j + 1 < m && t > durations_[j]) {
    t -= durations_[j];
    ++j;
  }
  t = std::min(t, durations_[j]);
  return piece_coefficients(j).transpose() * quintic_basis(t, order);
}

void MincoJerkSolver::BandedSystem::create(int n, int lower, int upper) {
  n_ = n;
  lower_ = lower;
  upper_ = upper;
  data_.assign(static_cast<size_t>(lower + upper + 1) * n, 0.0);
}

void MincoJerkSolver::BandedSystem::reset() {
  std::fill(data_.begin(), data_.end(), 0.0);
}

void MincoJerkSolver::BandedSystem::factorize_lu() {
  for (int k = 0; k < n_ - 1; ++k) {
    const double pivot = (*this)(k, k);
    const int imax = std::min(k + lower_, n_ - 1);
    const int jmax = std::min(k + upper_, n_ - 1);
    for (int i = k + 1; i <= imax; ++i) {
      double& l = (*this)(i, k);
      l /= pivot;
      for (int j = k + 1; j <= jmax; ++j) {
        (*this)(i, j) -= l * (*this)(k, j);
      }
    }
  }
}

void MincoJerkSolver::BandedSystem::solve(Eigen::MatrixX3d& b) const {
  for (int k = 0; k < n_; ++k) {
    const int imax = std::min(k + lower_, n_ - 1);
    for (int i = k + 1; i <= imax; ++i) {
      b.row(i) -= (*this)(i, k) * b.row(k);
    }
  }
  for (int k = n_ - 1; k >= 0; --k) {
    b.row(k) /= (*this)(k, k);
    const int imin = std::max(k - upper_, 0);
    for (int i = imin; i < k; ++i) {
      b.row(i) -= (*this)(i, k) * b.row(k);
    }
  }
}

void MincoJerkSolver::BandedSystem::solve_adjoint(Eigen::MatrixX3d& b) const {
  // A = L U, so A^T x = b is U^T y = b then L^T x = y.
  for (int k = 0; k < n_; ++k) {
    b.row(k) /= (*this)(k, k);
    const int imax = std::min(k + upper_, n_ - 1);
    for (int i = k + 1; i <= imax; ++i) {
      b.row(i) -= (*this)(k, i) * b.row(k);
    }
  }
  for (int k = n_ - 1; k >= 0; --k) {
    const int imax = std::min(k + lower_, n_ - 1);
    for (int i = k + 1; i <= imax; ++i) {
      b.row(k) -= (*this)(i, k) * b.row(i);
    }
  }
}

void MincoJerkSolver::set_conditions(const BoundaryState& start,
                                     const BoundaryState& end, int piece_count) {
  if (piece_count < 1) throw std::invalid_argument("piece count must be >= 1");
  piece_count_ = piece_count;
  head_.col(0) = start.position;
  head_.col(1) = start.velocity;
  head_.col(2) = start.acceleration;
  tail_.col(0) = end.position;
  tail_.col(1) = end.velocity;
  tail_.col(2) = end.acceleration;
  system_.create(6 * piece_count, 6, 6);
  rhs_.resize(6 * piece_count, 3);
  coeffs_.resize(6 * piece_count, 3);
}

void MincoJerkSolver::set_parameters(const Eigen::Matrix3Xd& waypoints,
                                     const Eigen::VectorXd& durations) {
  const int m = piece_count_;
  if (waypoints.cols() != m - 1 || durations.size() != m) {
    throw std::invalid_argument("parameter sizes do not match piece count");
  }
  if ((durations.array() <= 0.0).any()) {
    throw std::invalid_argument("degenerate piece");
  }
  durations_ = durations;
  waypoints_ = waypoints;

  system_.reset();
  rhs_.setZero();

  system_(0, 0) = 1.0;
  system_(1, 1) = 1.0;
  system_(2, 2) = 2.0;
  rhs_.row(0) = head_.col(0).transpose();
  rhs_.row(1) = head_.col(1).transpose();
  rhs_.row(2) = head_.col(2).transpose();

  for (int i = 0; i < m - 1; ++i) {
    const double t1 = durations[i];
    const double t2 = t1 * t1;
    const double t3 = t2 * t1;
    const double t4 = t3 * t1;
    const double t5 = t4 * t1;
    const int b = 6 * i;
    // jerk and snap stay continuous across the joint
    system_(b + 3, b + 3) = 6.0;
    system_(b + 3, b + 4) = 24.0 * t1;
    system_(b + 3, b + 5) = 60.0 * t2;
    system_(b + 3, b + 9) = -6.0;
    system_(b + 4, b + 4) = 24.0;
    system_(b + 4, b + 5) = 120.0 * t1;
    system_(b + 4, b + 10) = -24.0;
    // the joint position is pinned to the waypoint
    system_(b + 5, b + 0) = 1.0;
    system_(b + 5, b + 1) = t1;
    system_(b + 5, b + 2) = t2;
    system_(b + 5, b + 3) = t3;
    system_(b + 5, b + 4) = t4;
    system_(b + 5, b + 5) = t5;
    rhs_.row(b + 5) = waypoints.col(i).transpose();
    // position/velocity/acceleration continuity
    system_(b + 6, b + 0) = 1.0;
    system_(b + 6, b + 1) = t1;
    system_(b + 6, b + 2) = t2;
    system_(b + 6, b + 3) = t3;
    system_(b + 6, b + 4) = t4;
    system_(b + 6, b + 5) = t5;
    system_(b + 6, b + 6) = -1.0;
    system_(b + 7, b + 1) = 1.0;
    system_(b + 7, b + 2) = 2.0 * t1;
    system_(b + 7, b + 3) = 3.0 * t2;
    system_(b + 7, b + 4) = 4.0 * t3;
    system_(b + 7, b + 5) = 5.0 * t4;
    system_(b + 7, b + 7) = -1.0;
    system_(b + 8, b + 2) = 2.0;
    system_(b + 8, b + 3) = 6.0 * t1;
    system_(b + 8, b + 4) = 12.0 * t2;
    system_(b + 8, b + 5) = 20.0 * t3;
    system_(b + 8, b + 8) = -2.0;
  }

  const double t1 = durations[m - 1];
  const double t2 = t1 * t1;
  const double t3 = t2 * t1;
  const double t4 = t3 * t1;
  const double t5 = t4 * t1;
  const int b = 6 * (m - 1);
  system_(6 * m - 3, b + 0) = 1.0;
  system_(6 * m - 3, b + 1) = t1;
  system_(6 * m - 3, b + 2) = t2;
  system_(6 * m - 3, b + 3) = t3;
  system_(6 * m - 3, b + 4) = t4;
  system_(6 * m - 3, b + 5) = t5;
  system_(6 * m - 2, b + 1) = 1.0;
  system_(6 * m - 2, b + 2) = 2.0 * t1;
  system_(6 * m - 2, b + 3) = 3.0 * t2;
  system_(6 * m - 2, b + 4) = 4.0 * t3;
  system_(6 * m - 2, b + 5) = 5.0 * t4;
  system_(6 * m - 1, b + 2) = 2.0;
  system_(6 * m - 1, b + 3) = 6.0 * t1;
  system_(6 * m - 1, b + 4) = 12.0 * t2;
  system_(6 * m - 1, b + 5) = 20.0 * t3;
  rhs_.row(6 * m - 3) = tail_.col(0).transpose();
  rhs_.row(6 * m - 2) = tail_.col(1).transpose();
  rhs_.row(6 * m - 1) = tail_.col(2).transpose();

  system_.factorize_lu();
  coeffs_ = rhs_;
  system_.solve(coeffs_);
}

double MincoJerkSolver::jerk_energy() const {
  double energy = 0.0;
  for (int i = 0; i < piece_count_; ++i) {
    const double t1 = durations_[i];
    const double t2 = t1 * t1;
    const double t3 = t2 * t1;
    const double t4 = t3 * t1;
    const double t5 = t4 * t1;
    const auto c3 = coeffs_.row(6 * i + 3);
    const auto c4 = coeffs_.row(6 * i + 4);
    const auto c5 = coeffs_.row(6 * i + 5);
    energy += 36.0 * c3.squaredNorm() * t1 + 144.0 * c4.dot(c3) * t2 +
              192.0 * c4.squaredNorm() * t3 + 240.0 * c5.dot(c3) * t3 +
              720.0 * c5.dot(c4) * t4 + 720.0 * c5.squaredNorm() * t5;
  }
  return energy;
}

void MincoJerkSolver::jerk_energy_grad(Eigen::MatrixX3d* grad_coeffs,
                                       Eigen::VectorXd* grad_times) const {
  grad_coeffs->setZero(6 * piece_count_, 3);
  grad_times->setZero(piece_count_);
  for (int i = 0; i < piece_count_; ++i) {
    const double t1 = durations_[i];
    const double t2 = t1 * t1;
    const double t3 = t2 * t1;
    const double t4 = t3 * t1;
    const double t5 = t4 * t1;
    const auto c3 = coeffs_.row(6 * i + 3);
    const auto c4 = coeffs_.row(6 * i + 4);
    const auto c5 = coeffs_.row(6 * i + 5);
    grad_coeffs->row(6 * i + 3) = 72.0 * c3 * t1 + 144.0 * c4 * t2 + 240.0 * c5 * t3;
    grad_coeffs->row(6 * i + 4) = 144.0 * c3 * t2 + 384.0 * c4 * t3 + 720.0 * c5 * t4;
    grad_coeffs->row(6 * i + 5) = 240.0 * c3 * t3 + 720.0 * c4 * t4 + 1440.0 * c5 * t5;
    // d/dT of the piece energy equals the squared jerk at the piece end
    (*grad_times)(i) = 36.0 * c3.squaredNorm() + 288.0 * c4.dot(c3) * t1 +
                       (576.0 * c4.squaredNorm() + 720.0 * c5.dot(c3)) * t2 +
                       2880.0 * c5.dot(c4) * t3 + 3600.0 * c5.squaredNorm() * t4;
  }
}

void MincoJerkSolver::propagate_gradient(const Eigen::MatrixX3d& partial_grad_coeffs,
                                         const Eigen::VectorXd& partial_grad_times,
                                         Eigen::Matrix3Xd* grad_waypoints,
                                         Eigen::VectorXd* grad_durations) const {
  const int m = piece_count_;
  Eigen::MatrixX3d adj = partial_grad_coeffs;
  system_.solve_adjoint(adj);

  grad_waypoints->resize(3, m - 1);
  for (int i = 0; i < m - 1; ++i) {
    grad_waypoints->col(i) = adj.row(6 * i + 5).transpose();
  }

  grad_durations->resize(m);
  for (int i = 0; i < m - 1; ++i) {
    const double t = durations_[i];
    const auto c = coeffs_.block<6, 3>(6 * i, 0);
    const Eigen::RowVector3d vel = c.transpose() * quintic_basis(t, 1);
    const Eigen::RowVector3d acc = c.transpose() * quintic_basis(t, 2);
    const Eigen::RowVector3d jer = c.transpose() * quintic_basis(t, 3);
    const Eigen::RowVector3d snp = c.transpose() * quintic_basis(t, 4);
    const Eigen::RowVector3d crk = c.transpose() * quintic_basis(t, 5);
    // Rows 6i+3..6i+8 of the system depend on T_i; d(A c)/dT_i dotted with
    // the adjoint gives the implicit part of the duration gradient.
    double g = 0.0;
    g += adj.row(6 * i + 3).dot(snp);
    g += adj.row(6 * i + 4).dot(crk);
    g += adj.row(6 * i + 5).dot(vel);
    g += adj.row(6 * i + 6).dot(vel);
    g += adj.row(6 * i + 7).dot(acc);
    g += adj.row(6 * i + 8).dot(jer);
    (*grad_durations)(i) = -g;
  }
  {
    const double t = durations_[m - 1];
    const auto c = coeffs_.block<6, 3>(6 * (m - 1), 0);
    const Eigen::RowVector3d vel = c.transpose() * quintic_basis(t, 1);
    const Eigen::RowVector3d acc = c.transpose() * quintic_basis(t, 2);
    const Eigen::RowVector3d jer = c.transpose() * quintic_basis(t, 3);
    double g = 0.0;
    g += adj.row(6 * m - 3).dot(vel);
    g += adj.row(6 * m - 2).dot(acc);
    g += adj.row(6 * m - 1).dot(jer);
    (*grad_durations)(m - 1) = -g;
  }
  *grad_durations += partial_grad_times;
}

PiecewiseTrajectory MincoJerkSolver::trajectory() const {
  return PiecewiseTrajectory(coeffs_, durations_, waypoints_);
}

PiecewiseTrajectory minco_construct(const Eigen::Matrix3Xd& waypoints,
                                    const Eigen::VectorXd& durations,
                                    const BoundaryState& start,
                                    const BoundaryState& end) {
  MincoJerkSolver solver;
  solver.set_conditions(start, end, static_cast<int>(durations.size()));
  solver.set_parameters(waypoints, durations);
  return solver.trajectory();
}

}  // namespace navkit
