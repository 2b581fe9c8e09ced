#include "navkit/octree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace navkit {

namespace {

bool same_point(const Vec3& a, const Vec3& b) {
  return a.x() == b.x() && a.y() == b.y() && a.z() == b.z();
}

}  // namespace

struct PointStore::Node {
  Aabb bounds;
  std::array<std::unique_ptr<Node>, 8> children{};
  std::vector<Vec3> points;
  int point_count = 0;
  bool leaf = true;

  explicit Node(const Aabb& b) : bounds(b) {}

  double extent() const { return 2.0 * bounds.half_extent.maxCoeff(); }

  int octant_of(const Vec3& p) const {
    int idx = 0;
    if (p.x() >= bounds.center.x()) idx |= 1;
    if (p.y() >= bounds.center.y()) idx |= 2;
    if (p.z() >= bounds.center.z()) idx |= 4;
    return idx;
  }

  Aabb child_bounds(int idx) const {
    const Vec3 h = bounds.half_extent * 0.5;
    Vec3 c = bounds.center;
    c.x() += (idx & 1) ? h.x() : -h.x();
    c.y() += (idx & 2) ? h.y() : -h.y();
    c.z() += (idx & 4) ? h.z() : -h.z();
    return {c, h};
  }

  Node* ensure_child(int idx) {
    if (!children[idx]) children[idx] = std::make_unique<Node>(child_bounds(idx));
    return children[idx].get();
  }
};

PointStore::PointStore(const OctreeConfig& config)
    : config_(config), root_(std::make_unique<Node>(config.initial_bounds)) {}

PointStore::~PointStore() = default;

InsertOutcome PointStore::insert(const Vec3& p) {
  // Grow upward until p fits; the old root becomes the child octant nearest p.
  while (!root_->bounds.contains(p)) {
    Vec3 offset;
    for (int a = 0; a < 3; ++a) {
      offset[a] = (p[a] >= root_->bounds.center[a]) ? root_->bounds.half_extent[a]
                                                    : -root_->bounds.half_extent[a];
    }
    Aabb grown{root_->bounds.center + offset, root_->bounds.half_extent * 2.0};
    if (root_->point_count == 0) {
      root_ = std::make_unique<Node>(grown);
      continue;
    }
    auto new_root = std::make_unique<Node>(grown);
    new_root->leaf = false;
    new_root->point_count = root_->point_count;
    // Probe a point strictly inside the old box so the octant is unambiguous.
    const Vec3 probe = root_->bounds.center - offset * 0.25;
    const int idx = new_root->octant_of(probe);
    new_root->children[idx] = std::move(root_);
    root_ = std::move(new_root);
  }

  std::vector<Node*> path;
  Node* node = root_.get();
  for (;;) {
    path.push_back(node);
    if (node->leaf) {
      for (const Vec3& q : node->points) {
        if (same_point(p, q)) return InsertOutcome::kRejectedDuplicate;
      }
      const bool min_leaf = node->extent() < config_.min_extent;
      if (min_leaf) {
        if (static_cast<int>(node->points.size()) >= config_.max_points_per_min_leaf) {
          return InsertOutcome::kRejectedSaturated;
        }
        node->points.push_back(p);
        break;
      }
      if (static_cast<int>(node->points.size()) < config_.leaf_capacity) {
        node->points.push_back(p);
        break;
      }
      // Split the bucket and keep descending; all points may land in one
      // octant, in which case the loop splits again at the child.
      node->leaf = false;
      for (const Vec3& q : node->points) {
        Node* child = node->ensure_child(node->octant_of(q));
        child->points.push_back(q);
        child->point_count += 1;
      }
      node->points.clear();
      node->points.shrink_to_fit();
      node = node->ensure_child(node->octant_of(p));
    } else {
      node = node->ensure_child(node->octant_of(p));
    }
  }
  for (Node* n : path) n->point_count += 1;
  return InsertOutcome::kInserted;
}

bool PointStore::remove(const Vec3& p) {
  if (!root_->bounds.contains(p)) return false;
  std::vector<Node*> path;
  Node* node = root_.get();
  while (!node->leaf) {
    path.push_back(node);
    Node* child = node->children[node->octant_of(p)].get();
    if (child == nullptr) return false;
    node = child;
  }
  auto it = std::find_if(node->points.begin(), node->points.end(),
                         [&](const Vec3& q) { return same_point(p, q); });
  if (it == node->points.end()) return false;
  *it = node->points.back();
  node->points.pop_back();
  node->point_count -= 1;
  for (auto rit = path.rbegin(); rit != path.rend(); ++rit) {
    Node* parent = *rit;
    parent->point_count -= 1;
    for (auto& child : parent->children) {
      if (child && child->point_count == 0) child.reset();
    }
  }
  if (root_->point_count == 0) {
    root_->leaf = true;
    for (auto& child : root_->children) child.reset();
    root_->points.clear();
  }
  return true;
}

std::vector<std::pair<Vec3, double>> PointStore::knn(const Vec3& q, int k) const {
  std::vector<std::pair<Vec3, double>> best;  // kept sorted ascending by d2
  if (k <= 0 || root_->point_count == 0) return best;
  best.reserve(static_cast<size_t>(k));

  const auto bound = [&]() {
    return static_cast<int>(best.size()) < k
               ? std::numeric_limits<double>::infinity()
               : best.back().second;
  };
  const auto offer = [&](const Vec3& p, double d2) {
    if (static_cast<int>(best.size()) < k) {
      best.emplace_back(p, d2);
    } else if (d2 < best.back().second) {
      best.back() = {p, d2};
    } else {
      return;
    }
    for (size_t i = best.size() - 1; i > 0 && best[i].second < best[i - 1].second; --i) {
      std::swap(best[i], best[i - 1]);
    }
  };

  struct Entry {
    double d2;
    const Node* node;
    bool operator<(const Entry& other) const { return d2 > other.d2; }
  };
  std::priority_queue<Entry> frontier;
  frontier.push({root_->bounds.squared_exterior_distance(q), root_.get()});
  while (!frontier.empty()) {
    const Entry e = frontier.top();
    frontier.pop();
    if (e.d2 > bound()) break;
    if (e.node->leaf) {
      for (const Vec3& p : e.node->points) offer(p, (p - q).squaredNorm());
    } else {
      for (const auto& child : e.node->children) {
        if (!child) continue;
        const double d2 = child->bounds.squared_exterior_distance(q);
        if (d2 <= bound()) frontier.push({d2, child.get()});
      }
    }
  }
  for (auto& entry : best) entry.second = std::sqrt(entry.second);
  return best;
}

void PointStore::radius_visit(const Node* node, const Vec3& q, double r2,
                              std::vector<Vec3>* out) {
  if (node->bounds.squared_exterior_distance(q) > r2) return;
  if (node->leaf) {
    for (const Vec3& p : node->points) {
      if ((p - q).squaredNorm() <= r2) out->push_back(p);
    }
    return;
  }
  for (const auto& child : node->children) {
    if (child) radius_visit(child.get(), q, r2, out);
  }
}

std::vector<Vec3> PointStore::radius_search(const Vec3& q, double r) const {
  std::vector<Vec3> out;
  if (r < 0.0 || root_->point_count == 0) return out;
  radius_visit(root_.get(), q, r * r, &out);
  return out;
}

bool PointStore::any_visit(const Node* node, const Vec3& q, double r2) {
  if (node->bounds.squared_exterior_distance(q) > r2) return false;
  if (node->leaf) {
    for (const Vec3& p : node->points) {
      if ((p - q).squaredNorm() <= r2) return true;
    }
    return false;
  }
  for (const auto& child : node->children) {
    if (child && any_visit(child.get(), q, r2)) return true;
  }
  return false;
}

bool PointStore::any_within(const Vec3& q, double r) const {
  if (r < 0.0 || root_->point_count == 0) return false;
  return any_visit(root_.get(), q, r * r);
}

int PointStore::box_remove_visit(Node* node, const Aabb& keep) {
  if (keep.contains_box(node->bounds)) return 0;
  if (node->leaf) {
    int removed = 0;
    auto& pts = node->points;
    for (size_t i = 0; i < pts.size();) {
      if (keep.contains(pts[i])) {
        ++i;
      } else {
        pts[i] = pts.back();
        pts.pop_back();
        ++removed;
      }
    }
    node->point_count -= removed;
    return removed;
  }
  int removed = 0;
  for (auto& child : node->children) {
    if (!child) continue;
    if (child->bounds.disjoint(keep)) {
      removed += child->point_count;
      child.reset();
      continue;
    }
    removed += box_remove_visit(child.get(), keep);
    if (child->point_count == 0) child.reset();
  }
  node->point_count -= removed;
  return removed;
}

int PointStore::box_remove(const Aabb& keep) {
  int removed;
  if (root_->bounds.disjoint(keep)) {
    removed = root_->point_count;
  } else {
    removed = box_remove_visit(root_.get(), keep);
  }
  if (root_->point_count == 0 || root_->bounds.disjoint(keep)) {
    root_->point_count = 0;
    root_->leaf = true;
    root_->points.clear();
    for (auto& child : root_->children) child.reset();
  }
  return removed;
}

void PointStore::for_each_visit(const Node* node,
                                const std::function<void(const Vec3&)>& fn) {
  if (node->leaf) {
    for (const Vec3& p : node->points) fn(p);
    return;
  }
  for (const auto& child : node->children) {
    if (child) for_each_visit(child.get(), fn);
  }
}

void PointStore::for_each_point(const std::function<void(const Vec3&)>& fn) const {
  for_each_visit(root_.get(), fn);
}

void PointStore::clear() {
  const Aabb bounds = root_->bounds;
  root_ = std::make_unique<Node>(bounds);
}

int PointStore::size() const { return root_->point_count; }

int PointStore::count_visit(const Node* node) {
  int n = 1;
  if (!node->leaf) {
    for (const auto& child : node->children) {
      if (child) n += count_visit(child.get());
    }
  }
  return n;
}

int PointStore::node_count() const { return count_visit(root_.get()); }

const Aabb& PointStore::root_bounds() const { return root_->bounds; }

bool PointStore::root_is_bare() const {
  if (!root_->leaf) return false;
  return root_->points.empty();
}

}  // namespace navkit
