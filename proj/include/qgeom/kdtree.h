#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "qgeom/error.h"
#include "qgeom/parallel.h"
#include "qgeom/types.h"

namespace qgeom {

template <typename Scalar>
struct NearestResult {
  Index index = -1;
  Scalar sq_dist = std::numeric_limits<Scalar>::infinity();
};

/// Exact nearest-neighbor index over a fixed point set. Axis-aligned median
/// splits on the widest dimension; build order and queries are fully
/// deterministic, and distance ties resolve to the lowest point index.
template <typename Scalar>
class KdTree {
 public:
  explicit KdTree(const PointMatrix<Scalar>& points, Index leaf_size = 8)
      : points_(points), leaf_size_(std::max<Index>(leaf_size, 1)) {
    if (points_.rows() == 0) throw EmptyInput("kd-tree over an empty point set");
    perm_.resize(points_.rows());
    std::iota(perm_.begin(), perm_.end(), Index(0));
    build(0, points_.rows());
  }

  Index size() const { return points_.rows(); }

  NearestResult<Scalar> nearest(const Vec3<Scalar>& query) const {
    NearestResult<Scalar> best;
    search(0, query, best);
    return best;
  }

  /// Nearest index for every row of `queries`, evaluated in parallel. Each
  /// slot is written independently, so the result does not depend on the
  /// thread count.
  std::vector<Index> nearest_all(const PointMatrix<Scalar>& queries) const {
    std::vector<Index> out(queries.rows());
    parallel_for(queries.rows(), [&](Index i) {
      out[i] = nearest(Vec3<Scalar>(queries.row(i))).index;
    });
    return out;
  }

  /// All point indices within `radius` (inclusive) of the query, ascending.
  std::vector<Index> indices_within(const Vec3<Scalar>& query,
                                    Scalar radius) const {
    std::vector<Index> out;
    collect(0, query, radius * radius, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    // leaf when child_left < 0
    Index child_left = -1;
    Index child_right = -1;
    int split_dim = 0;
    Scalar split_val = 0;
    Index begin = 0, end = 0;
  };

  Index build(Index begin, Index end) {
    const Index node_id = static_cast<Index>(nodes_.size());
    nodes_.push_back({});
    if (end - begin <= leaf_size_) {
      std::sort(perm_.begin() + begin, perm_.begin() + end);
      nodes_[node_id].begin = begin;
      nodes_[node_id].end = end;
      return node_id;
    }
    Vec3<Scalar> lo = points_.row(perm_[begin]);
    Vec3<Scalar> hi = lo;
    for (Index i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(Vec3<Scalar>(points_.row(perm_[i])));
      hi = hi.cwiseMax(Vec3<Scalar>(points_.row(perm_[i])));
    }
    int dim;
    (hi - lo).maxCoeff(&dim);
    const Index mid = begin + (end - begin) / 2;
    std::nth_element(perm_.begin() + begin, perm_.begin() + mid,
                     perm_.begin() + end, [&](Index a, Index b) {
                       const Scalar ca = points_(a, dim), cb = points_(b, dim);
                       return ca < cb || (ca == cb && a < b);
                     });
    const Scalar split_val = points_(perm_[mid], dim);
    const Index left = build(begin, mid);
    const Index right = build(mid, end);
    Node& node = nodes_[node_id];
    node.split_dim = dim;
    node.split_val = split_val;
    node.child_left = left;
    node.child_right = right;
    return node_id;
  }

  void search(Index node_id, const Vec3<Scalar>& query,
              NearestResult<Scalar>& best) const {
    const Node& node = nodes_[node_id];
    if (node.child_left < 0) {
      for (Index i = node.begin; i < node.end; ++i) {
        const Index p = perm_[i];
        const Scalar sq = (Vec3<Scalar>(points_.row(p)) - query).squaredNorm();
        // best.index < 0 keeps the result valid even when every distance
        // overflows to infinity
        if (sq < best.sq_dist ||
            (sq == best.sq_dist && (best.index < 0 || p < best.index))) {
          best.sq_dist = sq;
          best.index = p;
        }
      }
      return;
    }
    const Scalar delta = query[node.split_dim] - node.split_val;
    const Index near = delta < 0 ? node.child_left : node.child_right;
    const Index far = delta < 0 ? node.child_right : node.child_left;
    search(near, query, best);
    // The far subtree still holds equidistant candidates when delta^2 equals
    // the best distance, so prune only on a strict improvement.
    if (delta * delta <= best.sq_dist) search(far, query, best);
  }

  void collect(Index node_id, const Vec3<Scalar>& query, Scalar sq_radius,
               std::vector<Index>& out) const {
    const Node& node = nodes_[node_id];
    if (node.child_left < 0) {
      for (Index i = node.begin; i < node.end; ++i) {
        const Index p = perm_[i];
        if ((Vec3<Scalar>(points_.row(p)) - query).squaredNorm() <= sq_radius)
          out.push_back(p);
      }
      return;
    }
    const Scalar delta = query[node.split_dim] - node.split_val;
    const Index near = delta < 0 ? node.child_left : node.child_right;
    const Index far = delta < 0 ? node.child_right : node.child_left;
    collect(near, query, sq_radius, out);
    if (delta * delta <= sq_radius) collect(far, query, sq_radius, out);
  }

  PointMatrix<Scalar> points_;
  Index leaf_size_;
  std::vector<Index> perm_;
  std::vector<Node> nodes_;
};

using KdTreed = KdTree<double>;

}  // namespace qgeom
