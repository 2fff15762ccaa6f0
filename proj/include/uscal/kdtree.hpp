#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "uscal/geom.hpp"

namespace uscal {

/// Static 3-d tree for nearest-neighbor queries.
class KdTree {
 public:
  struct Hit {
    std::size_t index = 0;  // into the original point list
    double dist2 = 0.0;
  };

  KdTree() = default;
  explicit KdTree(std::vector<Vec3> points);

  /// Nearest point within `max_dist` (inclusive), if any. With a mask, only
  /// points whose mask entry is nonzero are considered.
  [[nodiscard]] std::optional<Hit> nearest(const Vec3& query, double max_dist,
                                           const std::vector<std::uint8_t>* mask = nullptr) const;
  [[nodiscard]] const std::vector<Vec3>& points() const { return points_; }
  [[nodiscard]] std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    int begin = 0;
    int end = 0;
    int left = -1;
    int right = -1;
    int axis = 0;
    double split = 0.0;
  };

  int build(int begin, int end);
  void search(int node, const Vec3& q, const std::vector<std::uint8_t>* mask, Hit& best,
              bool& found) const;

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

}  // namespace uscal
