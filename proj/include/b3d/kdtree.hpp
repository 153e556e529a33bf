#pragma once

#include <Eigen/Core>

#include <limits>
#include <vector>

namespace b3d {

// Static 3-d tree over a row-per-point matrix for exact nearest-neighbor
// queries. Distances are computed as (q - p).squaredNorm(), exactly as a
// brute-force scan would, so the minimum is bit-identical to one.
template <typename Scalar>
class KdTree3 {
 public:
  using Points = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;
  using Point = Eigen::Matrix<Scalar, 1, 3>;

  struct Hit {
    Eigen::Index index = -1;
    Scalar squared_distance = std::numeric_limits<Scalar>::infinity();
  };

  explicit KdTree3(const Points& points) : points_(points) {
    order_.resize(static_cast<std::size_t>(points_.rows()));
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<Eigen::Index>(i);
    if (!order_.empty()) build(0, order_.size());
  }

  Hit nearest(const Point& q) const {
    Hit best;
    if (!nodes_.empty()) search(0, q, best);
    return best;
  }

 private:
  static constexpr std::size_t kLeafSize = 8;

  struct Node {
    std::size_t begin = 0, end = 0;  // range in order_
    int axis = -1;                   // -1 for leaves
    Scalar split = 0;
    int left = -1, right = -1;
  };

  int build(std::size_t begin, std::size_t end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= kLeafSize) return id;

    Point lo = Point::Constant(std::numeric_limits<Scalar>::infinity());
    Point hi = -lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_.row(order_[i]));
      hi = hi.cwiseMax(points_.row(order_[i]));
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](Eigen::Index a, Eigen::Index b) {
                       const Scalar pa = points_(a, axis), pb = points_(b, axis);
                       return pa != pb ? pa < pb : a < b;
                     });
    const Scalar split = points_(order_[mid], axis);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void search(int id, const Point& q, Hit& best) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const Eigen::Index idx = order_[i];
        const Scalar d = (q - points_.row(idx)).squaredNorm();
        if (d < best.squared_distance ||
            (d == best.squared_distance && idx < best.index)) {
          best = {idx, d};
        }
      }
      return;
    }
    // Left holds coordinates <= split, right holds >= split.
    const Scalar diff = q(node.axis) - node.split;
    const int first = diff <= 0 ? node.left : node.right;
    const int second = diff <= 0 ? node.right : node.left;
    search(first, q, best);
    if (diff * diff <= best.squared_distance) search(second, q, best);
  }

  const Points& points_;
  std::vector<Eigen::Index> order_;
  std::vector<Node> nodes_;
};

}  // namespace b3d
