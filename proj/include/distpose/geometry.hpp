#pragma once

// Core geometric value types and exact nearest-neighbour search.
//
// Determinism contract honoured throughout the library:
//   * every nearest-neighbour style query breaks distance ties by choosing
//     the lowest point index, so results are reproducible and independent of
//     traversal order;
//   * the kd-tree is exact (no approximation epsilon) and must agree with an
//     exhaustive scan bit for bit.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "distpose/error.hpp"

namespace distpose {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// 3D points with optional per-point unit normals. `normals` is either empty
/// or exactly one normal per point.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }
};

/// Proper rigid motion p -> R p + t with R in SO(3).
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
  }

  /// True when the rotation block is orthonormal with determinant +1 (within
  /// `tol` entrywise / on the determinant).
  bool is_rigid(double tol = 1e-9) const {
    const Mat3 gram = rotation.transpose() * rotation;
    return (gram - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(rotation.determinant() - 1.0) <= tol;
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  static RigidTransform from_matrix(const Eigen::Matrix4d& m) {
    RigidTransform t;
    t.rotation = m.topLeftCorner<3, 3>();
    t.translation = m.topRightCorner<3, 1>();
    return t;
  }
};

/// compose(a, b): apply b first, then a.
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

inline Vec3 apply(const RigidTransform& t, const Vec3& p) {
  return t.rotation * p + t.translation;
}

/// Transforms every point; normals are rotated only (no translation).
inline PointCloud apply(const RigidTransform& t, const PointCloud& cloud) {
  PointCloud out;
  out.points.reserve(cloud.points.size());
  for (const Vec3& p : cloud.points) out.points.push_back(apply(t, p));
  out.normals.reserve(cloud.normals.size());
  for (const Vec3& n : cloud.normals) out.normals.push_back(t.rotation * n);
  return out;
}

/// Geodesic distance on SO(3) between two rotations, in radians. Equal to
/// arccos((trace(a b^T) - 1) / 2), but evaluated as atan2(|skew|, cos) which
/// stays accurate near 0 and pi where the plain arccos form loses ~8 digits.
/// Bitwise-identical rotations return exactly 0.
inline double geodesic_angle(const Mat3& a, const Mat3& b) {
  if (a == b) return 0.0;
  const Mat3 m = a * b.transpose();
  const double c = (m.trace() - 1.0) / 2.0;
  const double sx = 0.5 * (m(2, 1) - m(1, 2));
  const double sy = 0.5 * (m(0, 2) - m(2, 0));
  const double sz = 0.5 * (m(1, 0) - m(0, 1));
  const double s = std::sqrt(sx * sx + sy * sy + sz * sz);
  return std::atan2(s, std::clamp(c, -1.0, 1.0));
}

inline double rotation_angle(const Mat3& r) {
  return geodesic_angle(r, Mat3::Identity());
}

/// Squared Euclidean distance, written as a fixed scalar expression so that
/// every call site (kd-tree, scans, oracles) evaluates it identically.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

/// Largest pairwise point distance (exhaustive, hence exact). 0 for clouds
/// with fewer than two points.
inline double diameter(const PointCloud& cloud) {
  const std::size_t n = cloud.points.size();
  double best = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      best = std::max(best, squared_distance(cloud.points[i], cloud.points[j]));
    }
  }
  return std::sqrt(best);
}

/// Exact kd-tree over a point cloud. Holds a reference to the backing cloud;
/// the cloud must outlive the index and must not be mutated while indexed.
class SpatialIndex {
 public:
  struct Hit {
    int index = -1;
    double distance = 0.0;  // Euclidean

    friend bool operator==(const Hit&, const Hit&) = default;
  };

  explicit SpatialIndex(const PointCloud& cloud) : cloud_(&cloud) {
    if (cloud.empty()) throw EmptyInputError("SpatialIndex: cloud is empty");
    order_.resize(cloud.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * cloud.size() / kLeafSize + 2);
    root_ = build(0, static_cast<int>(cloud.size()));
  }

  int size() const { return static_cast<int>(order_.size()); }

  /// Exact nearest neighbour; distance ties resolved to the lowest index.
  Hit nearest(const Vec3& query) const {
    int best_index = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    nearest_impl(root_, query, best_index, best_d2);
    return {best_index, std::sqrt(best_d2)};
  }

  /// k nearest neighbours ordered by (distance, index) ascending. Returns all
  /// points when k >= size().
  std::vector<Hit> knn(const Vec3& query, int k) const {
    if (k <= 0) throw ArgumentError("SpatialIndex::knn: k must be positive");
    k = std::min(k, size());
    std::vector<std::pair<double, int>> heap;  // max-heap on (d2, index)
    heap.reserve(static_cast<std::size_t>(k));
    knn_impl(root_, query, k, heap);
    std::sort(heap.begin(), heap.end());
    std::vector<Hit> out;
    out.reserve(heap.size());
    for (const auto& [d2, idx] : heap) out.push_back({idx, std::sqrt(d2)});
    return out;
  }

  /// All points with distance <= r (boundary inclusive), ordered by index.
  std::vector<Hit> radius(const Vec3& query, double r) const {
    if (!(r >= 0.0)) throw ArgumentError("SpatialIndex::radius: r must be >= 0");
    std::vector<Hit> out;
    radius_impl(root_, query, r * r, out);
    std::sort(out.begin(), out.end(),
              [](const Hit& a, const Hit& b) { return a.index < b.index; });
    return out;
  }

 private:
  static constexpr int kLeafSize = 16;

  struct Node {
    double split = 0.0;
    int axis = -1;  // -1: leaf
    int left = -1;
    int right = -1;
    int begin = 0;
    int end = 0;
  };

  const Vec3& pt(int i) const { return cloud_->points[static_cast<std::size_t>(i)]; }

  int build(int begin, int end) {
    Node node;
    node.begin = begin;
    node.end = end;
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= kLeafSize) return self;

    // Split at the median of the widest axis; ties in the coordinate sort are
    // broken by index so the tree layout is deterministic.
    Vec3 lo = pt(order_[static_cast<std::size_t>(begin)]);
    Vec3 hi = lo;
    for (int i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(pt(order_[static_cast<std::size_t>(i)]));
      hi = hi.cwiseMax(pt(order_[static_cast<std::size_t>(i)]));
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(
        order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
        [&](int a, int b) {
          const double pa = pt(a)[axis];
          const double pb = pt(b)[axis];
          return pa < pb || (pa == pb && a < b);
        });
    nodes_[static_cast<std::size_t>(self)].axis = axis;
    nodes_[static_cast<std::size_t>(self)].split =
        pt(order_[static_cast<std::size_t>(mid)])[axis];
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[static_cast<std::size_t>(self)].left = left;
    nodes_[static_cast<std::size_t>(self)].right = right;
    return self;
  }

  void nearest_impl(int ni, const Vec3& q, int& best_index, double& best_d2) const {
    const Node& node = nodes_[static_cast<std::size_t>(ni)];
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int j = order_[static_cast<std::size_t>(i)];
        const double d2 = squared_distance(q, pt(j));
        if (d2 < best_d2 || (d2 == best_d2 && j < best_index)) {
          best_d2 = d2;
          best_index = j;
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    nearest_impl(near, q, best_index, best_d2);
    // Visit the far side on exact ties too: it may hold an equal-distance
    // point with a lower index.
    if (diff * diff <= best_d2) nearest_impl(far, q, best_index, best_d2);
  }

  void knn_impl(int ni, const Vec3& q, int k,
                std::vector<std::pair<double, int>>& heap) const {
    const Node& node = nodes_[static_cast<std::size_t>(ni)];
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int j = order_[static_cast<std::size_t>(i)];
        const std::pair<double, int> cand{squared_distance(q, pt(j)), j};
        if (heap.size() < static_cast<std::size_t>(k)) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end());
        } else if (cand < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    knn_impl(near, q, k, heap);
    if (heap.size() < static_cast<std::size_t>(k) || diff * diff <= heap.front().first) {
      knn_impl(far, q, k, heap);
    }
  }

  void radius_impl(int ni, const Vec3& q, double r2, std::vector<Hit>& out) const {
    const Node& node = nodes_[static_cast<std::size_t>(ni)];
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int j = order_[static_cast<std::size_t>(i)];
        const double d2 = squared_distance(q, pt(j));
        if (d2 <= r2) out.push_back({j, std::sqrt(d2)});
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    radius_impl(near, q, r2, out);
    if (diff * diff <= r2) radius_impl(far, q, r2, out);
  }

  const PointCloud* cloud_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = 0;
};

/// Least-squares rigid motion mapping `source` onto `target`
/// (argmin_{R,t} sum ||R s_i + t - t_i||^2), solved in closed form via the
/// SVD of the cross-covariance with the reflection fix D = diag(1, 1, det).
///
/// Throws ArgumentError on length mismatch or fewer than 3 pairs and
/// DegenerateInputError when the pairs do not determine a rotation
/// (collinear or coincident configurations).
inline RigidTransform fit_rigid(std::span<const Vec3> source,
                                std::span<const Vec3> target) {
  if (source.size() != target.size()) {
    throw ArgumentError("fit_rigid: source/target length mismatch");
  }
  if (source.size() < 3) {
    throw ArgumentError("fit_rigid: need at least 3 point pairs");
  }
  const double inv_n = 1.0 / static_cast<double>(source.size());
  Vec3 cs = Vec3::Zero();
  Vec3 ct = Vec3::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    cs += source[i];
    ct += target[i];
  }
  cs *= inv_n;
  ct *= inv_n;

  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    h += (source[i] - cs) * (target[i] - ct).transpose();
  }

  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sigma = svd.singularValues();
  // Rank < 2: rotation about the residual axis is unobservable.
  if (sigma(0) <= 0.0 || sigma(1) <= 1e-12 * sigma(0)) {
    throw DegenerateInputError("fit_rigid: degenerate point configuration");
  }
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;

  RigidTransform out;
  out.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  out.translation = ct - out.rotation * cs;
  return out;
}

inline RigidTransform fit_rigid(const std::vector<Vec3>& source,
                                const std::vector<Vec3>& target) {
  return fit_rigid(std::span<const Vec3>(source), std::span<const Vec3>(target));
}

}  // namespace distpose
