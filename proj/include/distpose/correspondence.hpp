#pragma once

// Ground-truth correspondence transfer: with a known pose, every observed
// (target) point is matched to its geometrically nearest query point, and
// query features can then be gathered onto the target cloud. This is the
// supervision path of the distillation setup — the "ideal" target features
// are exactly the transferred query features.

#include <cmath>
#include <vector>

#include "distpose/descriptors.hpp"
#include "distpose/error.hpp"
#include "distpose/geometry.hpp"

namespace distpose {

/// Gamma map: for each target point, the index of the nearest gt-transformed
/// query point and the metric residual of that match. Many target points may
/// map to the same query point; no mutual-consistency filtering is applied.
struct CorrespondenceMap {
  std::vector<int> target_to_query;
  std::vector<double> residuals;

  std::size_t size() const { return target_to_query.size(); }
};

/// Builds the gamma map under ground truth pose `gt` (query -> target frame):
/// target_to_query[i] = argmin_j | apply(gt, query_j) - target_i |, ties to
/// the lowest query index.
inline CorrespondenceMap build_gamma(const PointCloud& query,
                                     const PointCloud& target,
                                     const RigidTransform& gt) {
  if (query.empty()) throw EmptyInputError("build_gamma: query cloud is empty");
  if (target.empty()) throw EmptyInputError("build_gamma: target cloud is empty");

  const PointCloud transformed = apply(gt, query);
  const SpatialIndex index(transformed);

  CorrespondenceMap gamma;
  gamma.target_to_query.reserve(target.size());
  gamma.residuals.reserve(target.size());
  for (const Vec3& p : target.points) {
    const auto hit = index.nearest(p);
    gamma.target_to_query.push_back(hit.index);
    gamma.residuals.push_back(hit.distance);
  }
  return gamma;
}

/// Gathers query feature rows through the gamma map: row i of the result is
/// query_features.row(gamma[i]). Throws ConsistencyError when the map indexes
/// outside the feature matrix.
inline DescriptorSet transfer_features(const CorrespondenceMap& gamma,
                                       const DescriptorSet& query_features) {
  DescriptorSet out;
  out.source = query_features.source;
  out.vectors.resize(static_cast<Eigen::Index>(gamma.size()), query_features.vectors.cols());
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    const int j = gamma.target_to_query[i];
    if (j < 0 || j >= query_features.rows()) {
      throw ConsistencyError("transfer_features: gamma index out of range");
    }
    out.vectors.row(static_cast<Eigen::Index>(i)) = query_features.vectors.row(j);
  }
  return out;
}

/// Fraction of target points whose feature-space nearest query point is also
/// metrically correct: within tau1_fraction * diameter(query) of the target
/// point after ground-truth alignment. This is the quantity that upper-bounds
/// how much of the target a feature matcher can ever recover.
inline double matchable_fraction(const DescriptorSet& query_features,
                                 const DescriptorSet& target_features,
                                 const PointCloud& query,
                                 const PointCloud& target,
                                 const RigidTransform& gt,
                                 double tau1_fraction = 0.03) {
  if (query.empty() || target.empty()) {
    throw EmptyInputError("matchable_fraction: clouds must be non-empty");
  }
  if (query_features.rows() != static_cast<Eigen::Index>(query.size()) ||
      target_features.rows() != static_cast<Eigen::Index>(target.size())) {
    throw ArgumentError("matchable_fraction: feature rows must match cloud sizes");
  }
  if (query_features.dim() != target_features.dim()) {
    throw ArgumentError("matchable_fraction: feature dimension mismatch");
  }
  if (!(tau1_fraction > 0.0)) {
    throw ArgumentError("matchable_fraction: tau1_fraction must be positive");
  }

  const double threshold = tau1_fraction * diameter(query);
  const PointCloud transformed = apply(gt, query);
  std::size_t matched = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto [j, fdist] = detail::nearest_row(
        query_features.vectors, target_features.vectors.row(static_cast<Eigen::Index>(i)));
    (void)fdist;
    const double metric =
        (transformed.points[static_cast<std::size_t>(j)] - target.points[i]).norm();
    if (metric <= threshold) ++matched;
  }
  return static_cast<double>(matched) / static_cast<double>(target.size());
}

}  // namespace distpose
