#pragma once

// Deterministic cloud preparation ahead of descriptor extraction:
//
//   1. uniform down-sampling without replacement (both clouds),
//   2. statistical outlier removal (observed/target cloud only — the query
//      model is clean by definition),
//   3. scale normalization of both clouds by the *query* diameter so that all
//      downstream thresholds are expressed in query-diameter units.
//
// The pipeline order is fixed; see preprocess_pair().

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "distpose/error.hpp"
#include "distpose/geometry.hpp"
#include "distpose/rng.hpp"

namespace distpose {

/// A query/target cloud pair with optional ground-truth pose (query -> target
/// frame). `query_diameter` accumulates the normalization scale: it starts at
/// 1 and is multiplied by the measured diameter on each normalize_pair call,
/// so after one pass it records the pre-scale diameter in original units and
/// further passes leave it (and the clouds) unchanged.
struct ScenePair {
  PointCloud query;
  PointCloud target;
  std::optional<RigidTransform> gt_pose;
  double query_diameter = 1.0;
};

struct PreprocessConfig {
  std::size_t sample_count = 4000;
  int outlier_neighbors = 20;      // k in the mean-distance statistic
  double outlier_std_ratio = 2.0;  // cut at mean + ratio * std
  std::uint64_t rng_seed = 0;
};

/// Uniform sample of `count` points without replacement (seeded, order
/// preserving). Clouds with <= count points are returned unchanged.
inline PointCloud sample_points(const PointCloud& cloud, std::size_t count,
                                std::uint64_t seed) {
  if (cloud.size() <= count) return cloud;
  // Partial Fisher-Yates over the index array, then ascending sort so the
  // surviving points keep their original relative order.
  std::vector<std::uint32_t> indices(cloud.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    indices[i] = static_cast<std::uint32_t>(i);
  }
  SplitMix64 rng = derive_stream(seed, 0x5a3c);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(indices.size() - i));
    std::swap(indices[i], indices[j]);
  }
  indices.resize(count);
  std::sort(indices.begin(), indices.end());

  PointCloud out;
  out.points.reserve(count);
  if (cloud.has_normals()) out.normals.reserve(count);
  for (const std::uint32_t idx : indices) {
    out.points.push_back(cloud.points[idx]);
    if (cloud.has_normals()) out.normals.push_back(cloud.normals[idx]);
  }
  return out;
}

/// Statistical outlier removal: a point is dropped when its mean distance to
/// its k nearest neighbours (excluding itself) exceeds mean + ratio * std of
/// that statistic over the cloud. `std` is the unbiased (N-1) sample standard
/// deviation; a zero standard deviation removes nothing. Returns the filtered
/// cloud plus the kept indices (ascending).
///
/// Requires |cloud| > k so every point has k real neighbours.
struct OutlierRemovalResult {
  PointCloud cloud;
  std::vector<int> kept_indices;
};

inline OutlierRemovalResult remove_statistical_outliers(const PointCloud& cloud,
                                                        int k,
                                                        double std_ratio) {
  if (k < 1) throw ArgumentError("remove_statistical_outliers: k must be >= 1");
  if (!(std_ratio >= 0.0)) {
    throw ArgumentError("remove_statistical_outliers: std_ratio must be >= 0");
  }
  if (cloud.size() <= static_cast<std::size_t>(k)) {
    throw ArgumentError("remove_statistical_outliers: cloud must hold more than k points");
  }

  const SpatialIndex index(cloud);
  const std::size_t n = cloud.size();
  std::vector<double> mean_dist(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    // k+1 neighbours: the query point itself sits in the cloud. Skip it by
    // index (not by zero distance — duplicates are legitimate neighbours).
    const auto hits = index.knn(cloud.points[i], k + 1);
    double sum = 0.0;
    int used = 0;
    for (const auto& h : hits) {
      if (used == k) break;
      if (h.index == static_cast<int>(i)) continue;
      sum += h.distance;
      ++used;
    }
    mean_dist[i] = sum / static_cast<double>(k);
  }

  double mean = 0.0;
  for (const double d : mean_dist) mean += d;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const double d : mean_dist) var += (d - mean) * (d - mean);
  var = n > 1 ? var / static_cast<double>(n - 1) : 0.0;
  const double stddev = std::sqrt(var);

  OutlierRemovalResult out;
  const double cutoff = mean + std_ratio * stddev;
  for (std::size_t i = 0; i < n; ++i) {
    // std == 0 (all statistics identical) removes nothing: every value sits
    // exactly at the cutoff and the comparison below is strict.
    if (stddev > 0.0 && mean_dist[i] > cutoff) continue;
    out.kept_indices.push_back(static_cast<int>(i));
    out.cloud.points.push_back(cloud.points[i]);
    if (cloud.has_normals()) out.cloud.normals.push_back(cloud.normals[i]);
  }
  return out;
}

/// Scales both clouds (about the origin) by 1 / diameter(query) so the query
/// becomes unit-diameter. The ground-truth translation scales with the
/// clouds; the rotation is unaffected. `query_diameter` accumulates the scale
/// (see ScenePair). Throws DegenerateInputError when the query diameter is 0.
inline ScenePair normalize_pair(const ScenePair& pair) {
  const double d = diameter(pair.query);
  if (!(d > 0.0)) {
    throw DegenerateInputError("normalize_pair: query diameter must be positive");
  }
  const double scale = 1.0 / d;
  ScenePair out;
  out.query.points.reserve(pair.query.size());
  for (const Vec3& p : pair.query.points) out.query.points.push_back(scale * p);
  out.query.normals = pair.query.normals;
  out.target.points.reserve(pair.target.size());
  for (const Vec3& p : pair.target.points) out.target.points.push_back(scale * p);
  out.target.normals = pair.target.normals;
  if (pair.gt_pose) {
    RigidTransform gt = *pair.gt_pose;
    gt.translation *= scale;
    out.gt_pose = gt;
  }
  out.query_diameter = pair.query_diameter * d;
  return out;
}

/// Fixed-order preparation chain: sample -> outlier-remove (target only) ->
/// normalize by query diameter. Sampling streams for the two clouds are
/// derived from rng_seed independently. Outlier removal is skipped when the
/// target is too small to support the k-neighbour statistic.
inline ScenePair preprocess_pair(const ScenePair& pair, const PreprocessConfig& config) {
  ScenePair staged;
  staged.query = sample_points(pair.query, config.sample_count,
                               derive_stream(config.rng_seed, 1).next());
  staged.target = sample_points(pair.target, config.sample_count,
                                derive_stream(config.rng_seed, 2).next());
  staged.gt_pose = pair.gt_pose;
  staged.query_diameter = pair.query_diameter;
  if (staged.target.size() > static_cast<std::size_t>(config.outlier_neighbors)) {
    staged.target = remove_statistical_outliers(staged.target, config.outlier_neighbors,
                                                config.outlier_std_ratio)
                        .cloud;
  }
  return normalize_pair(staged);
}

}  // namespace distpose
