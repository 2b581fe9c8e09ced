#pragma once

#include <map>
#include <optional>
#include <vector>

#include "navkit/local_map.hpp"

namespace navkit {

struct TopoConfig {
  int angle_samples = 4;       // K, angles per visual plane
  double max_radial = 5.0;     // l_max, radial search range on the plane
  double visibility_step = 0.1;
  double radial_step = 0.25;
  double growth_radius = 0.3;
  int max_nodes = 512;
  int max_paths = 10;          // shortest paths handed to the optimizer
};

struct TopoPath {
  std::vector<Vec3> nodes;  // start ... goal
  double length = 0.0;
};

struct VisibilityResult {
  bool visible = true;
  Vec3 first_hit = Vec3::Zero();  // first occupied sample when occluded
};

/// Samples the open segment (a, b) at the given step and reports the first
/// occupied sample, if any.
VisibilityResult check_visibility(const LocalMap& map, const Vec3& a, const Vec3& b,
                                  double step);

/// Plane through the occlusion point, perpendicular to the node-to-target
/// direction, with a deterministic in-plane polar frame.
struct VisualPlane {
  Vec3 origin = Vec3::Zero();
  Vec3 normal = Vec3::UnitX();
  Vec3 u_axis = Vec3::UnitY();
  Vec3 v_axis = Vec3::UnitZ();

  Vec3 at(double theta, double radius) const {
    return origin + radius * (std::cos(theta) * u_axis + std::sin(theta) * v_axis);
  }
};

VisualPlane visual_plane(const Vec3& node, const Vec3& occlusion, const Vec3& target);

/// Labels connected clusters of stored map points in encounter order.
class ObstacleRegistry {
 public:
  /// 0 when unlabeled.
  int label_of(const Vec3& snapped_point) const;
  void assign(const Vec3& snapped_point, int label);
  int allocate_label() { return next_label_++; }
  const std::vector<Vec3>& cluster(int label) const { return clusters_[label - 1]; }
  std::vector<Vec3>& mutable_cluster(int label) { return clusters_[label - 1]; }
  int cluster_count() const { return next_label_ - 1; }
  void add_cluster() { clusters_.emplace_back(); }

 private:
  struct KeyLess {
    bool operator()(const Vec3& a, const Vec3& b) const {
      if (a.x() != b.x()) return a.x() < b.x();
      if (a.y() != b.y()) return a.y() < b.y();
      return a.z() < b.z();
    }
  };
  std::map<Vec3, int, KeyLess> labels_;
  std::vector<std::vector<Vec3>> clusters_;
  int next_label_ = 1;
};

struct RegionGrowthResult {
  int label = 0;
  std::vector<Vec3> cluster;
};

/// Flood-fills stored points reachable from the occupied seed through
/// neighborhoods of the growth radius; reuses the existing label when the
/// seed is already classified.
RegionGrowthResult region_growth(const LocalMap& map, const Vec3& seed,
                                 ObstacleRegistry& registry, double growth_radius);

/// Radially scans one polar angle of the plane for the nearest free sample
/// that is also visible from the expanding node.
std::optional<Vec3> search_child_on_angle(const LocalMap& map, const VisualPlane& plane,
                                          double theta, const Vec3& expanding_node,
                                          const TopoConfig& config);

/// Obstacle-aware topological search graph. Nodes carry the label of the
/// obstacle whose visual plane spawned them and the polar angle index used.
class TopoSearcher {
 public:
  struct Node {
    Vec3 position = Vec3::Zero();
    int parent = -1;
    int occluder_label = 0;   // label of the plane obstacle that spawned it
    int angle_index = -1;     // polar sample index at spawn
    bool terminal = false;    // goal visible from here
  };

  TopoSearcher(const LocalMap& map, const TopoConfig& config)
      : map_(map), config_(config) {}

  /// Runs the breadth-first plane expansion; throws when an endpoint is
  /// occupied. Returns the distinct paths sorted by ascending length.
  std::vector<TopoPath> search(const Vec3& start, const Vec3& goal);

  const std::vector<Node>& nodes() const { return nodes_; }
  const ObstacleRegistry& registry() const { return registry_; }

 private:
  const LocalMap& map_;
  TopoConfig config_;
  std::vector<Node> nodes_;
  ObstacleRegistry registry_;
};

/// One-shot search over a frozen map.
std::vector<TopoPath> topo_search(const LocalMap& map, const Vec3& start,
                                  const Vec3& goal, const TopoConfig& config);

}  // namespace navkit
