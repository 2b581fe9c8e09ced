#pragma once

#include <optional>
#include <vector>

#include "navkit/geometry.hpp"
#include "navkit/octree.hpp"

namespace navkit {

struct MapConfig {
  Vec3 map_size{15.0, 15.0, 6.0};     // robocentric box edge lengths
  double filter_resolution = 0.1;     // voxel pitch r of the input filter
  double angular_resolution = 0.025;  // depth-image bin size (rad)
  OctreeConfig octree{0.1, 8, 32, Aabb{Vec3::Zero(), Vec3{7.5, 7.5, 3.0}}};
  double raycast_epsilon = 0.1;       // tolerance band on depth differences
  double gradient_offset = 1e-5;      // finite-difference step of the distance field
};

enum class Occupancy { kFree, kOccupied };

struct OccupancyQuery {
  Occupancy state = Occupancy::kFree;
  bool outside_bounds = false;
  bool occupied() const { return state == Occupancy::kOccupied; }
};

/// Distance to the nearest map point and the negative gradient of the
/// distance field (points toward the obstacle).
struct DistanceQuery {
  double distance = 0.0;
  Vec3 gradient = Vec3::Zero();
};

/// Spherical range image; pixels hold the minimum range of the points that
/// project into them, or a negative sentinel where nothing projects.
struct DepthImage {
  int rows = 0;  // azimuth bins
  int cols = 0;  // elevation bins
  std::vector<double> pixels;

  static constexpr double kEmpty = -1.0;

  void reset(int r, int c) {
    rows = r;
    cols = c;
    pixels.assign(static_cast<size_t>(r) * c, kEmpty);
  }
  double at(int i, int j) const { return pixels[static_cast<size_t>(i) * cols + j]; }
  double& at(int i, int j) { return pixels[static_cast<size_t>(i) * cols + j]; }
  bool empty_at(int i, int j) const { return at(i, j) < 0.0; }
};

struct IngestStats {
  int removed_slide = 0;
  int removed_raycast = 0;
  int inserted = 0;
  int rejected = 0;
  double ingest_ms = 0.0;
};

/// Snaps every point to the center of its voxel, collapses duplicates and
/// returns the survivors in lexicographic order.
std::vector<Vec3> voxel_filter(const std::vector<Vec3>& points, double r);

/// Bins points (sensor frame, origin excluded) by azimuth/elevation at the
/// given angular resolution; azimuth spans [-pi, pi), elevation [-pi/2, pi/2).
DepthImage project_to_depth_image(const std::vector<Vec3>& points_sensor_frame,
                                  double angular_resolution);

/// Incremental robocentric point-cloud map: a sliding box of filtered scan
/// points over an octree, with depth-image raycasting to release freed space
/// and on-demand distance/gradient queries.
class LocalMap {
 public:
  explicit LocalMap(const MapConfig& config, const Vec3& center = Vec3::Zero());

  /// Recenters the map box and drops points left outside. Returns the count.
  int slide(const Vec3& new_center);

  /// Deletes map points that a new scan ray passed through. The scan must be
  /// voxel-filtered, world-frame and clipped to the map bounds; returns the
  /// number of deleted points. Empty scan pixels never delete anything.
  int raycast_update(const std::vector<Vec3>& scan_world,
                     const RigidTransform& sensor_pose);

  /// Full update pipeline: slide, filter, raycast, insert.
  IngestStats ingest_scan(const std::vector<Vec3>& raw_scan_world,
                          const RigidTransform& sensor_pose, const Vec3& robot_pos);

  OccupancyQuery occupancy(const Vec3& x) const;

  /// Distance and negative-gradient query; empty map yields nullopt and the
  /// caller treats the distance as infinite.
  std::optional<DistanceQuery> resdf(const Vec3& x) const;

  const PointStore& store() const { return store_; }
  PointStore& store() { return store_; }
  const Aabb& bounds() const { return bounds_; }
  const Vec3& center() const { return bounds_.center; }
  const MapConfig& config() const { return config_; }

 private:
  MapConfig config_;
  Aabb bounds_;
  PointStore store_;
  DepthImage scan_image_;  // scratch reused across ingests
};

}  // namespace navkit
