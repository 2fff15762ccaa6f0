#include "uscal/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace uscal {

namespace {
constexpr int kLeafSize = 8;
}

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, static_cast<int>(points_.size()));
  }
}

int KdTree::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[order_[begin]];
  Vec3 hi = lo;
  for (int i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) { return points_[a][axis] < points_[b][axis]; });

  nodes_[id].axis = axis;
  nodes_[id].split = points_[order_[mid]][axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(int node, const Vec3& q, const std::vector<std::uint8_t>* mask, Hit& best,
                    bool& found) const {
  const Node& n = nodes_[node];
  if (n.left < 0) {
    for (int i = n.begin; i < n.end; ++i) {
      if (mask && !(*mask)[static_cast<std::size_t>(order_[i])]) continue;
      const double d2 = (points_[order_[i]] - q).squaredNorm();
      // Ties resolve to the lower original index so results are reproducible.
      if (d2 < best.dist2 || (d2 == best.dist2 && (!found || static_cast<std::size_t>(
                                                                  order_[i]) < best.index))) {
        best = {static_cast<std::size_t>(order_[i]), d2};
        found = true;
      }
    }
    return;
  }
  const double diff = q[n.axis] - n.split;
  const int first = diff < 0.0 ? n.left : n.right;
  const int second = diff < 0.0 ? n.right : n.left;
  search(first, q, mask, best, found);
  if (diff * diff <= best.dist2) search(second, q, mask, best, found);
}

std::optional<KdTree::Hit> KdTree::nearest(const Vec3& query, double max_dist,
                                           const std::vector<std::uint8_t>* mask) const {
  if (nodes_.empty()) return std::nullopt;
  Hit best{0, max_dist * max_dist};
  bool found = false;
  search(0, query, mask, best, found);
  if (found) return best;
  return std::nullopt;
}

}  // namespace uscal
