#include "navkit/topo_search.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace navkit {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Clips the sampling parameter range of segment a + alpha (b - a) to the part
// inside the box; everything outside the map is free by convention, so the
// samples there can be skipped wholesale.
std::pair<double, double> clip_alpha_to_box(const Vec3& a, const Vec3& b,
                                            const Aabb& box) {
  double lo = 0.0;
  double hi = 1.0;
  const Vec3 d = b - a;
  for (int axis = 0; axis < 3; ++axis) {
    const double bmin = box.center[axis] - box.half_extent[axis];
    const double bmax = box.center[axis] + box.half_extent[axis];
    if (std::abs(d[axis]) < 1e-12) {
      if (a[axis] < bmin || a[axis] > bmax) return {1.0, 0.0};
      continue;
    }
    double t0 = (bmin - a[axis]) / d[axis];
    double t1 = (bmax - a[axis]) / d[axis];
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
    if (lo > hi) return {1.0, 0.0};
  }
  return {lo, hi};
}

}  // namespace

VisibilityResult check_visibility(const LocalMap& map, const Vec3& a, const Vec3& b,
                                  double step) {
  const double length = (b - a).norm();
  if (length < 1e-9 || map.store().size() == 0) return {true, Vec3::Zero()};
  const auto [lo, hi] = clip_alpha_to_box(a, b, map.bounds());
  if (lo > hi) return {true, Vec3::Zero()};
  const double dalpha = step / length;
  const auto first = std::max<long long>(1, static_cast<long long>(
                                                std::ceil(lo / dalpha - 1e-12)));
  for (long long k = first;; ++k) {
    const double alpha = k * dalpha;
    if (alpha >= 1.0 || alpha > hi + 1e-12) break;
    const Vec3 m = a + alpha * (b - a);
    if (map.occupancy(m).occupied()) return {false, m};
  }
  return {true, Vec3::Zero()};
}

VisualPlane visual_plane(const Vec3& node, const Vec3& occlusion, const Vec3& target) {
  VisualPlane plane;
  plane.origin = occlusion;
  plane.normal = (target - node).normalized();
  Vec3 u = plane.normal.cross(Vec3::UnitZ());
  if (u.norm() < 1e-6) u = Vec3::UnitX();
  plane.u_axis = u.normalized();
  plane.v_axis = plane.normal.cross(plane.u_axis);
  return plane;
}

RegionGrowthResult region_growth(const LocalMap& map, const Vec3& seed,
                                 ObstacleRegistry& registry, double growth_radius) {
  const auto nearest = map.store().knn(seed, 1);
  if (nearest.empty() || nearest.front().second > map.config().filter_resolution) {
    throw std::runtime_error("seed not occupied");
  }
  const Vec3 root = nearest.front().first;
  if (const int existing = registry.label_of(root); existing != 0) {
    return {existing, registry.cluster(existing)};
  }
  const int label = registry.allocate_label();
  registry.add_cluster();
  auto& cluster = registry.mutable_cluster(label);
  std::deque<Vec3> frontier;
  registry.assign(root, label);
  cluster.push_back(root);
  frontier.push_back(root);
  while (!frontier.empty()) {
    const Vec3 p = frontier.front();
    frontier.pop_front();
    for (const Vec3& neighbor : map.store().radius_search(p, growth_radius)) {
      if (registry.label_of(neighbor) != 0) continue;
      registry.assign(neighbor, label);
      cluster.push_back(neighbor);
      frontier.push_back(neighbor);
    }
  }
  return {label, cluster};
}

std::optional<Vec3> search_child_on_angle(const LocalMap& map, const VisualPlane& plane,
                                          double theta, const Vec3& expanding_node,
                                          const TopoConfig& config) {
  for (double l = config.radial_step; l < config.max_radial; l += config.radial_step) {
    const Vec3 candidate = plane.at(theta, l);
    if (map.occupancy(candidate).occupied()) continue;
    if (!check_visibility(map, expanding_node, candidate, config.visibility_step)
             .visible) {
      continue;
    }
    return candidate;
  }
  return std::nullopt;
}

std::vector<TopoPath> TopoSearcher::search(const Vec3& start, const Vec3& goal) {
  if (map_.occupancy(start).occupied() || map_.occupancy(goal).occupied()) {
    throw std::runtime_error("endpoint in collision");
  }
  nodes_.clear();
  registry_ = ObstacleRegistry();
  nodes_.push_back(Node{start, -1, 0, -1, false});

  std::deque<int> queue{0};
  std::vector<int> terminals;
  // node ids grouped by spawn label, for duplicate-position suppression
  std::map<int, std::vector<int>> by_label;
  const double merge_radius = map_.config().filter_resolution;
  bool budget_exhausted = false;

  while (!queue.empty() && !budget_exhausted) {
    const int current = queue.front();
    queue.pop_front();
    const Vec3 position = nodes_[current].position;

    const VisibilityResult to_goal =
        check_visibility(map_, position, goal, config_.visibility_step);
    if (to_goal.visible) {
      nodes_[current].terminal = true;
      terminals.push_back(current);
      continue;
    }

    // Label lookup first; the flood fill only runs for unseen obstacles.
    const auto nearest = map_.store().knn(to_goal.first_hit, 1);
    int occluder = nearest.empty() ? 0 : registry_.label_of(nearest.front().first);
    if (occluder == 0) {
      occluder =
          region_growth(map_, to_goal.first_hit, registry_, config_.growth_radius)
              .label;
    }
    const VisualPlane plane = visual_plane(position, to_goal.first_hit, goal);

    // When the node is blocked by the same obstacle that spawned it, only the
    // angle it was sampled at is explored again; otherwise all K angles.
    std::vector<int> angle_set;
    if (nodes_[current].occluder_label != 0 &&
        nodes_[current].occluder_label == occluder) {
      angle_set.push_back(nodes_[current].angle_index);
    } else {
      for (int k = 1; k <= config_.angle_samples; ++k) angle_set.push_back(k);
    }

    for (const int k : angle_set) {
      const double theta = 2.0 * kPi * k / config_.angle_samples;
      const auto candidate =
          search_child_on_angle(map_, plane, theta, position, config_);
      if (!candidate) continue;
      bool merged = false;
      for (const int other : by_label[occluder]) {
        if ((nodes_[other].position - *candidate).norm() <= merge_radius) {
          merged = true;
          break;
        }
      }
      if (merged) continue;
      if (static_cast<int>(nodes_.size()) >= config_.max_nodes) {
        budget_exhausted = true;
        break;
      }
      const int id = static_cast<int>(nodes_.size());
      nodes_.push_back(Node{*candidate, current, occluder, k, false});
      by_label[occluder].push_back(id);
      queue.push_back(id);
    }
  }

  std::vector<TopoPath> paths;
  for (const int terminal : terminals) {
    TopoPath path;
    for (int id = terminal; id != -1; id = nodes_[id].parent) {
      path.nodes.push_back(nodes_[id].position);
    }
    std::reverse(path.nodes.begin(), path.nodes.end());
    path.nodes.push_back(goal);
    for (size_t i = 1; i < path.nodes.size(); ++i) {
      path.length += (path.nodes[i] - path.nodes[i - 1]).norm();
    }
    paths.push_back(std::move(path));
  }

  // drop identical node sequences
  std::vector<TopoPath> unique_paths;
  for (auto& path : paths) {
    const bool duplicate =
        std::any_of(unique_paths.begin(), unique_paths.end(), [&](const TopoPath& p) {
          if (p.nodes.size() != path.nodes.size()) return false;
          for (size_t i = 0; i < p.nodes.size(); ++i) {
            if ((p.nodes[i] - path.nodes[i]).cwiseAbs().maxCoeff() != 0.0) return false;
          }
          return true;
        });
    if (!duplicate) unique_paths.push_back(std::move(path));
  }
  std::stable_sort(unique_paths.begin(), unique_paths.end(),
                   [](const TopoPath& a, const TopoPath& b) { return a.length < b.length; });
  if (static_cast<int>(unique_paths.size()) > config_.max_paths) {
    unique_paths.resize(config_.max_paths);
  }
  return unique_paths;
}

std::vector<TopoPath> topo_search(const LocalMap& map, const Vec3& start,
                                  const Vec3& goal, const TopoConfig& config) {
  TopoSearcher searcher(map, config);
  return searcher.search(start, goal);
}

}  // namespace navkit
