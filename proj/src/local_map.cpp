#include "navkit/local_map.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace navkit {

namespace {

constexpr double kPi = 3.14159265358979323846;

int image_rows(double delta) { return static_cast<int>(std::ceil(2.0 * kPi / delta)); }
int image_cols(double delta) { return static_cast<int>(std::ceil(kPi / delta)); }

std::pair<int, int> pixel_of(const Vec3& o, double delta, int rows, int cols) {
  const double az = std::atan2(o.y(), o.x());
  const double el = std::atan2(o.z(), std::hypot(o.x(), o.y()));
  int i = static_cast<int>(std::floor((az + kPi) / delta));
  int j = static_cast<int>(std::floor((el + 0.5 * kPi) / delta));
  i = std::clamp(i, 0, rows - 1);
  j = std::clamp(j, 0, cols - 1);
  return {i, j};
}

bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

}  // namespace

std::vector<Vec3> voxel_filter(const std::vector<Vec3>& points, double r) {
  std::vector<Vec3> snapped;
  snapped.reserve(points.size());
  for (const Vec3& p : points) {
    snapped.emplace_back((std::floor(p.x() / r) + 0.5) * r,
                         (std::floor(p.y() / r) + 0.5) * r,
                         (std::floor(p.z() / r) + 0.5) * r);
  }
  std::sort(snapped.begin(), snapped.end(), lex_less);
  snapped.erase(std::unique(snapped.begin(), snapped.end(),
                            [](const Vec3& a, const Vec3& b) {
                              return a.x() == b.x() && a.y() == b.y() && a.z() == b.z();
                            }),
                snapped.end());
  return snapped;
}

DepthImage project_to_depth_image(const std::vector<Vec3>& points_sensor_frame,
                                  double angular_resolution) {
  DepthImage image;
  image.reset(image_rows(angular_resolution), image_cols(angular_resolution));
  for (const Vec3& o : points_sensor_frame) {
    const double range = o.norm();
    if (range <= 1e-6) continue;
    const auto [i, j] = pixel_of(o, angular_resolution, image.rows, image.cols);
    double& px = image.at(i, j);
    if (px < 0.0 || range < px) px = range;
  }
  return image;
}

LocalMap::LocalMap(const MapConfig& config, const Vec3& center)
    : config_(config), bounds_{center, config.map_size * 0.5} {
  OctreeConfig oct = config.octree;
  oct.initial_bounds = bounds_;
  store_ = PointStore(oct);
}

int LocalMap::slide(const Vec3& new_center) {
  bounds_.center = new_center;
  return store_.box_remove(bounds_);
}

int LocalMap::raycast_update(const std::vector<Vec3>& scan_world,
                             const RigidTransform& sensor_pose) {
  if (scan_world.empty() || store_.size() == 0) return 0;
  const double delta = config_.angular_resolution;
  scan_image_.reset(image_rows(delta), image_cols(delta));
  for (const Vec3& p : scan_world) {
    const Vec3 o = sensor_pose.apply_inverse(p);
    const double range = o.norm();
    if (range <= 1e-6) continue;
    const auto [i, j] = pixel_of(o, delta, scan_image_.rows, scan_image_.cols);
    double& px = scan_image_.at(i, j);
    if (px < 0.0 || range < px) px = range;
  }

  // A stored point is released when the scan measured a strictly farther
  // surface through its pixel, i.e. a new ray passed through the point.
  std::vector<Vec3> doomed;
  store_.for_each_point([&](const Vec3& p) {
    const Vec3 o = sensor_pose.apply_inverse(p);
    const double range = o.norm();
    if (range <= 1e-6) return;
    const auto [i, j] = pixel_of(o, delta, scan_image_.rows, scan_image_.cols);
    const double measured = scan_image_.at(i, j);
    if (measured < 0.0) return;
    if (range - measured < -config_.raycast_epsilon) doomed.push_back(p);
  });
  for (const Vec3& p : doomed) store_.remove(p);
  return static_cast<int>(doomed.size());
}

IngestStats LocalMap::ingest_scan(const std::vector<Vec3>& raw_scan_world,
                                  const RigidTransform& sensor_pose,
                                  const Vec3& robot_pos) {
  const auto t0 = std::chrono::steady_clock::now();
  IngestStats stats;
  stats.removed_slide = slide(robot_pos);

  std::vector<Vec3> filtered = voxel_filter(raw_scan_world, config_.filter_resolution);
  std::vector<Vec3> clipped;
  clipped.reserve(filtered.size());
  for (const Vec3& p : filtered) {
    if (bounds_.contains(p)) clipped.push_back(p);
  }

  stats.removed_raycast = raycast_update(clipped, sensor_pose);

  for (const Vec3& p : clipped) {
    if (store_.insert(p) == InsertOutcome::kInserted) {
      stats.inserted += 1;
    } else {
      stats.rejected += 1;
    }
  }
  stats.ingest_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  return stats;
}

OccupancyQuery LocalMap::occupancy(const Vec3& x) const {
  if (!bounds_.contains(x)) return {Occupancy::kFree, true};
  const bool hit = store_.any_within(x, config_.filter_resolution);
  return {hit ? Occupancy::kOccupied : Occupancy::kFree, false};
}

std::optional<DistanceQuery> LocalMap::resdf(const Vec3& x) const {
  if (store_.size() == 0) return std::nullopt;
  DistanceQuery out;
  out.distance = store_.knn(x, 1).front().second;
  const double eps = config_.gradient_offset;
  for (int axis = 0; axis < 3; ++axis) {
    Vec3 shifted = x;
    shifted[axis] += eps;
    const double d_shift = store_.knn(shifted, 1).front().second;
    out.gradient[axis] = (out.distance - d_shift) / eps;
  }
  return out;
}

}  // namespace navkit
