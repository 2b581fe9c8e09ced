#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "navkit/geometry.hpp"

namespace navkit {

struct OctreeConfig {
  double min_extent = 0.1;          // leaf subdivision floor e_min
  int max_points_per_min_leaf = 8;  // n_max, down-sampling cap below e_min
  int leaf_capacity = 32;           // bucket size before subdivision above e_min
  Aabb initial_bounds{Vec3::Zero(), Vec3::Constant(10.0)};
};

enum class InsertOutcome { kInserted, kRejectedSaturated, kRejectedDuplicate };

/// Incremental octree over 3D points with dynamic insert/delete, subtree
/// pruning, upward expansion and exact nearest-neighbor queries.
class PointStore {
 public:
  explicit PointStore(const OctreeConfig& config = {});
  PointStore(PointStore&&) noexcept = default;
  PointStore& operator=(PointStore&&) noexcept = default;
  ~PointStore();

  InsertOutcome insert(const Vec3& p);
  bool remove(const Vec3& p);

  /// k nearest stored points to q, ascending by Euclidean distance.
  std::vector<std::pair<Vec3, double>> knn(const Vec3& q, int k) const;
  /// All stored points with distance <= r from q (boundary included).
  std::vector<Vec3> radius_search(const Vec3& q, double r) const;
  /// Existence-only radius query with early exit.
  bool any_within(const Vec3& q, double r) const;
  /// Removes every point outside `keep`; whole subtrees outside are dropped
  /// without visiting individual points. Returns the number removed.
  int box_remove(const Aabb& keep);

  void for_each_point(const std::function<void(const Vec3&)>& fn) const;
  void clear();

  int size() const;
  int node_count() const;
  const Aabb& root_bounds() const;
  bool root_is_bare() const;  // true iff the root has no children and no points
  const OctreeConfig& config() const { return config_; }

 private:
  struct Node;
  static void radius_visit(const Node* node, const Vec3& q, double r2,
                           std::vector<Vec3>* out);
  static bool any_visit(const Node* node, const Vec3& q, double r2);
  static int box_remove_visit(Node* node, const Aabb& keep);
  static void for_each_visit(const Node* node,
                             const std::function<void(const Vec3&)>& fn);
  static int count_visit(const Node* node);

  OctreeConfig config_;
  std::unique_ptr<Node> root_;
};

}  // namespace navkit
