#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace lidar_bias {

/// Exact k-nearest-neighbour index over a fixed set of 3D points. The tree
/// keeps a copy of the points and is immutable after construction, so
/// concurrent queries are safe.
class KdTree {
 public:
  explicit KdTree(const Eigen::Matrix3Xd& points, std::size_t leaf_size = 8);

  /// Indices of the k points closest to `query`, nearest first. Equal
  /// distances are ordered by index.
  std::vector<Eigen::Index> nearest(const Eigen::Vector3d& query, std::size_t k) const;

  std::size_t size() const { return static_cast<std::size_t>(points_.cols()); }

 private:
  struct Node {
    int axis = -1;  ///< -1 for leaves
    double split = 0.0;
    std::size_t begin = 0;
    std::size_t end = 0;
    int left = -1;
    int right = -1;
  };

  int build(std::size_t begin, std::size_t end);

  Eigen::Matrix3Xd points_;
  std::vector<Eigen::Index> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

}  // namespace lidar_bias
