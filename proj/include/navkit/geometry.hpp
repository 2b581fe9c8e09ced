#pragma once

#include <Eigen/Dense>

namespace navkit {

using Vec3 = Eigen::Vector3d;

/// Rigid body transform, world = rotation * body + translation.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 apply_inverse(const Vec3& p) const {
    return rotation.transpose() * (p - translation);
  }
  RigidTransform inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }
  RigidTransform compose(const RigidTransform& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }
  static RigidTransform identity() { return {}; }
  static RigidTransform from_yaw(double yaw, const Vec3& t = Vec3::Zero()) {
    RigidTransform out;
    out.rotation = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
    out.translation = t;
    return out;
  }
};

inline Vec3 transform_point(const RigidTransform& t, const Vec3& p) {
  return t.apply(p);
}

/// Closed axis-aligned box; boundary points count as inside.
struct Aabb {
  Vec3 center = Vec3::Zero();
  Vec3 half_extent = Vec3::Zero();

  Vec3 min() const { return center - half_extent; }
  Vec3 max() const { return center + half_extent; }

  bool contains(const Vec3& p) const {
    return ((p - center).cwiseAbs().array() <= half_extent.array()).all();
  }
  /// True iff `inner` lies entirely inside this box.
  bool contains_box(const Aabb& inner) const {
    return (((inner.center - center).cwiseAbs() + inner.half_extent).array() <=
            half_extent.array())
        .all();
  }
  /// True iff the two closed boxes share no point.
  bool disjoint(const Aabb& other) const {
    return ((other.center - center).cwiseAbs().array() >
            (half_extent + other.half_extent).array())
        .any();
  }
  /// Squared distance from p to the box, zero inside.
  double squared_exterior_distance(const Vec3& p) const {
    const Vec3 d = ((p - center).cwiseAbs() - half_extent).cwiseMax(0.0);
    return d.squaredNorm();
  }
};

inline bool aabb_contains(const Aabb& b, const Vec3& p) { return b.contains(p); }

/// Depth-image pixel in polar coordinates; depth < 0 marks an empty pixel.
struct PolarPixel {
  int i = 0;
  int j = 0;
  double depth = -1.0;
  bool empty() const { return depth < 0.0; }
};

}  // namespace navkit
