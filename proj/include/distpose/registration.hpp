#pragma once

// Feature matching and pose solving: feature-space nearest-neighbor
// correspondences, triplet RANSAC with consistency rejection and least-squares
// fitting, inlier scoring, and ICP refinement (point-to-point / point-to-plane).

#include <Eigen/Dense>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "distpose/descriptors.hpp"
#include "distpose/error.hpp"
#include "distpose/geometry.hpp"
#include "distpose/preprocess.hpp"
#include "distpose/rng.hpp"

namespace distpose {

struct RansacConfig {
  int iterations = 100000;
  double inlier_threshold = 0.05;       // normalized (unit-diameter) units
  double triplet_consistency_tol = 0.1;  // relative edge-length mismatch
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (iterations < 1) throw ArgumentError("RansacConfig: iterations must be >= 1");
    if (!(inlier_threshold > 0.0) || !(triplet_consistency_tol > 0.0)) {
      throw ArgumentError("RansacConfig: thresholds must be positive");
    }
  }
};

enum class IcpVariant { point_to_point, point_to_plane };

struct IcpConfig {
  int max_iterations = 1000;
  double max_correspondence_distance = 0.05;
  double convergence_eps = 1e-8;
  IcpVariant variant = IcpVariant::point_to_point;

  void validate() const {
    if (max_iterations < 1) throw ArgumentError("IcpConfig: max_iterations must be >= 1");
    if (!(max_correspondence_distance > 0.0)) {
      throw ArgumentError("IcpConfig: max_correspondence_distance must be positive");
    }
    if (!(convergence_eps >= 0.0)) {
      throw ArgumentError("IcpConfig: convergence_eps must be non-negative");
    }
  }
};

struct FeatureMatch {
  int query_index = -1;
  int target_index = -1;
  double feature_distance = 0.0;
};

struct StageTimings {
  double match_seconds = 0.0;
  double ransac_seconds = 0.0;
  double icp_seconds = 0.0;
};

struct MatchReport {
  RigidTransform pose = RigidTransform::identity();
  double inlier_ratio = 0.0;  // selected hypothesis, over all correspondences
  int inlier_count = 0;
  int ransac_iterations_run = 0;
  double icp_rmse = 0.0;
  std::vector<double> icp_rmse_history;  // accepted objectives, non-increasing
  StageTimings timings;
};

// For each query row, its nearest target row in feature space (ties to the
// lowest target index).
inline std::vector<FeatureMatch> match_features(const DescriptorSet& query_features,
                                                const DescriptorSet& target_features) {
  if (query_features.rows() == 0 || target_features.rows() == 0) {
    throw EmptyInputError("match_features: empty descriptor set");
  }
  if (query_features.dim() != target_features.dim()) {
    throw ArgumentError("match_features: dimension mismatch (" +
                        std::to_string(query_features.dim()) + " vs " +
                        std::to_string(target_features.dim()) + ")");
  }
  std::vector<FeatureMatch> matches;
  matches.reserve(static_cast<std::size_t>(query_features.rows()));
  for (int i = 0; i < query_features.rows(); ++i) {
    const auto [index, distance] =
        detail::nearest_row(target_features.vectors, query_features.vectors.row(i));
    matches.push_back(FeatureMatch{i, static_cast<int>(index), distance});
  }
  return matches;
}

// True iff each of the three edge lengths agrees between the two triplets
// within a relative tolerance and no edge is degenerate.
inline bool triplet_consistent(const std::array<Vec3, 3>& q,
                               const std::array<Vec3, 3>& t, double tol) {
  constexpr std::array<std::array<int, 2>, 3> kEdges = {{{0, 1}, {0, 2}, {1, 2}}};
  for (const auto& edge : kEdges) {
    const double dq = (q[static_cast<std::size_t>(edge[0])] -
                       q[static_cast<std::size_t>(edge[1])])
                          .norm();
    const double dt = (t[static_cast<std::size_t>(edge[0])] -
                       t[static_cast<std::size_t>(edge[1])])
                          .norm();
    if (dq < 1e-9 || dt < 1e-9) return false;
    if (std::abs(dq - dt) > tol * std::max(dq, dt)) return false;
  }
  return true;
}

namespace detail {

// Three distinct correspondence indices drawn from one per-iteration stream.
// Exposed so tests can replay the exact sampling schedule.
inline std::array<std::size_t, 3> sample_triplet(SplitMix64& rng, std::size_t n) {
  std::array<std::size_t, 3> out{};
  out[0] = rng.below(n);
  do {
    out[1] = rng.below(n);
  } while (out[1] == out[0]);
  do {
    out[2] = rng.below(n);
  } while (out[2] == out[0] || out[2] == out[1]);
  return out;
}

}  // namespace detail

// Triplet RANSAC over precomputed correspondences. Each iteration draws its
// randomness from (seed, iteration index), so any evaluation schedule produces
// the same hypotheses; the winner is (most inliers, earliest iteration).
inline MatchReport ransac_register(const std::vector<FeatureMatch>& correspondences,
                                   const PointCloud& query, const PointCloud& target,
                                   const RansacConfig& config) {
  config.validate();
  if (correspondences.size() < 3) {
    throw InsufficientDataError("ransac_register: need at least 3 correspondences, got " +
                                std::to_string(correspondences.size()));
  }
  const std::size_t n = correspondences.size();
  std::vector<Vec3> qpts(n), tpts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const FeatureMatch& m = correspondences[i];
    if (m.query_index < 0 || static_cast<std::size_t>(m.query_index) >= query.size() ||
        m.target_index < 0 || static_cast<std::size_t>(m.target_index) >= target.size()) {
      throw ConsistencyError("ransac_register: correspondence index out of range");
    }
    qpts[i] = query.points[static_cast<std::size_t>(m.query_index)];
    tpts[i] = target.points[static_cast<std::size_t>(m.target_index)];
  }

  const double threshold_sq = config.inlier_threshold * config.inlier_threshold;
  auto count_inliers = [&](const RigidTransform& pose) {
    int count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (squared_distance(apply(pose, qpts[i]), tpts[i]) < threshold_sq) ++count;
    }
    return count;
  };

  int best_count = -1;
  int best_iteration = -1;
  RigidTransform best_pose = RigidTransform::identity();
  long evaluated = 0;
  long rejected_inconsistent = 0;
  long rejected_degenerate = 0;

  std::array<Vec3, 3> q3, t3;
  for (int it = 0; it < config.iterations; ++it) {
    SplitMix64 rng = derive_stream(config.rng_seed, static_cast<std::uint64_t>(it));
    const std::array<std::size_t, 3> pick = detail::sample_triplet(rng, n);
    for (int k = 0; k < 3; ++k) {
      q3[static_cast<std::size_t>(k)] = qpts[pick[static_cast<std::size_t>(k)]];
      t3[static_cast<std::size_t>(k)] = tpts[pick[static_cast<std::size_t>(k)]];
    }
    if (!triplet_consistent(q3, t3, config.triplet_consistency_tol)) {
      ++rejected_inconsistent;
      continue;
    }
    RigidTransform hypothesis;
    try {
      hypothesis = fit_rigid(std::span<const Vec3>(q3), std::span<const Vec3>(t3));
    } catch (const DegenerateInputError&) {
      ++rejected_degenerate;
      continue;
    }
    ++evaluated;
    const int count = count_inliers(hypothesis);
    if (count > best_count) {
      best_count = count;
      best_iteration = it;
      best_pose = hypothesis;
    }
  }

  if (evaluated == 0) {
    throw NoHypothesisError(
        "ransac_register: no consistent triplet in " + std::to_string(config.iterations) +
        " iterations (" + std::to_string(rejected_inconsistent) + " inconsistent, " +
        std::to_string(rejected_degenerate) + " degenerate)");
  }

  // Refit on every inlier of the winning hypothesis when enough survive.
  RigidTransform pose = best_pose;
  if (best_count >= 3) {
    std::vector<Vec3> in_q, in_t;
    in_q.reserve(static_cast<std::size_t>(best_count));
    in_t.reserve(static_cast<std::size_t>(best_count));
    for (std::size_t i = 0; i < n; ++i) {
      if (squared_distance(apply(best_pose, qpts[i]), tpts[i]) < threshold_sq) {
        in_q.push_back(qpts[i]);
        in_t.push_back(tpts[i]);
      }
    }
    try {
      pose = fit_rigid(in_q, in_t);
    } catch (const DegenerateInputError&) {
      pose = best_pose;  // inliers happen to be collinear; keep the triplet fit
    }
  }

  MatchReport report;
  report.pose = pose;
  report.inlier_count = best_count;
  report.inlier_ratio = static_cast<double>(best_count) / static_cast<double>(n);
  report.ransac_iterations_run = config.iterations;
  (void)best_iteration;
  return report;
}

namespace detail {

struct IcpPairs {
  std::vector<std::size_t> query_indices;
  std::vector<std::size_t> target_indices;
};

inline IcpPairs correspond_within(const PointCloud& query, const SpatialIndex& index,
                                  const RigidTransform& pose, double max_distance) {
  IcpPairs pairs;
  for (std::size_t i = 0; i < query.size(); ++i) {
    const SpatialIndex::Hit hit = index.nearest(apply(pose, query.points[i]));
    if (hit.distance <= max_distance) {
      pairs.query_indices.push_back(i);
      pairs.target_indices.push_back(static_cast<std::size_t>(hit.index));
    }
  }
  return pairs;
}

inline double icp_objective(const PointCloud& query, const PointCloud& target,
                            const IcpPairs& pairs, const RigidTransform& pose,
                            IcpVariant variant) {
  double sum = 0.0;
  for (std::size_t k = 0; k < pairs.query_indices.size(); ++k) {
    const Vec3 moved = apply(pose, query.points[pairs.query_indices[k]]);
    const Vec3& tgt = target.points[pairs.target_indices[k]];
    if (variant == IcpVariant::point_to_point) {
      sum += squared_distance(moved, tgt);
    } else {
      const double r = target.normals[pairs.target_indices[k]].dot(moved - tgt);
      sum += r * r;
    }
  }
  return std::sqrt(sum / static_cast<double>(pairs.query_indices.size()));
}

// One linearized point-to-plane step: solve the 6x6 normal equations for a
// small twist (rotation vector, translation) applied on top of `pose`.
inline RigidTransform point_to_plane_step(const PointCloud& query,
                                          const PointCloud& target,
                                          const IcpPairs& pairs,
                                          const RigidTransform& pose) {
  Eigen::Matrix<double, 6, 6> ata = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> atb = Eigen::Matrix<double, 6, 1>::Zero();
  for (std::size_t k = 0; k < pairs.query_indices.size(); ++k) {
    const Vec3 moved = apply(pose, query.points[pairs.query_indices[k]]);
    const Vec3& tgt = target.points[pairs.target_indices[k]];
    const Vec3& normal = target.normals[pairs.target_indices[k]];
    Eigen::Matrix<double, 6, 1> row;
    row.head<3>() = moved.cross(normal);
    row.tail<3>() = normal;
    const double residual = normal.dot(moved - tgt);
    ata += row * row.transpose();
    atb -= row * residual;
  }
  const Eigen::Matrix<double, 6, 1> twist = ata.ldlt().solve(atb);
  if (!twist.allFinite()) return pose;

  const Vec3 omega = twist.head<3>();
  const double angle = omega.norm();
  RigidTransform delta = RigidTransform::identity();
  if (angle > 0.0) {
    delta.rotation = Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix();
  }
  delta.translation = twist.tail<3>();
  return compose(delta, pose);
}

}  // namespace detail

// Iterative closest point refinement starting from `initial`. Only steps that
// do not increase the objective are accepted, so the recorded history is
// non-increasing; an increasing step reverts to the last accepted pose.
inline MatchReport icp_refine(const RigidTransform& initial, const PointCloud& query,
                              const PointCloud& target, const IcpConfig& config) {
  config.validate();
  if (query.empty() || target.empty()) {
    throw EmptyInputError("icp_refine: empty cloud");
  }
  if (config.variant == IcpVariant::point_to_plane && !target.has_normals()) {
    throw ArgumentError("icp_refine: point_to_plane requires target normals");
  }

  const SpatialIndex index(target);
  RigidTransform pose = initial;
  detail::IcpPairs pairs =
      detail::correspond_within(query, index, pose, config.max_correspondence_distance);
  if (pairs.query_indices.empty()) {
    throw NoOverlapError(
        "icp_refine: no target point within max_correspondence_distance of the "
        "initial alignment; pose left at the initial estimate");
  }

  MatchReport report;
  double objective = detail::icp_objective(query, target, pairs, pose, config.variant);
  report.icp_rmse_history.push_back(objective);

  for (int it = 0; it < config.max_iterations; ++it) {
    RigidTransform candidate;
    if (config.variant == IcpVariant::point_to_point) {
      std::vector<Vec3> src, dst;
      src.reserve(pairs.query_indices.size());
      dst.reserve(pairs.query_indices.size());
      for (std::size_t k = 0; k < pairs.query_indices.size(); ++k) {
        src.push_back(query.points[pairs.query_indices[k]]);
        dst.push_back(target.points[pairs.target_indices[k]]);
      }
      try {
        candidate = fit_rigid(src, dst);
      } catch (const Error&) {
        break;  // too few or degenerate pairs; keep the last accepted pose
      }
    } else {
      candidate = detail::point_to_plane_step(query, target, pairs, pose);
    }

    const detail::IcpPairs next_pairs = detail::correspond_within(
        query, index, candidate, config.max_correspondence_distance);
    if (next_pairs.query_indices.empty()) break;
    const double next_objective =
        detail::icp_objective(query, target, next_pairs, candidate, config.variant);
    if (next_objective > objective) break;  // uptick: revert, stop

    const double improvement = objective - next_objective;
    pose = candidate;
    pairs = next_pairs;
    objective = next_objective;
    report.icp_rmse_history.push_back(objective);
    if (improvement < config.convergence_eps) break;
  }

  report.pose = pose;
  report.icp_rmse = objective;
  report.inlier_count = static_cast<int>(pairs.query_indices.size());
  report.inlier_ratio =
      static_cast<double>(pairs.query_indices.size()) / static_cast<double>(query.size());
  return report;
}

// Full pipeline on a preprocessed pair: feature matching, RANSAC, ICP.
inline MatchReport estimate_pose(const ScenePair& pair,
                                 const DescriptorSet& query_features,
                                 const DescriptorSet& target_features,
                                 const RansacConfig& ransac, const IcpConfig& icp) {
  if (pair.query.empty() || pair.target.empty()) {
    throw EmptyInputError("estimate_pose: empty cloud in scene pair");
  }
  using Clock = std::chrono::steady_clock;
  const auto seconds_since = [](Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
  };

  auto t0 = Clock::now();
  const std::vector<FeatureMatch> matches =
      match_features(query_features, target_features);
  const double match_seconds = seconds_since(t0);

  t0 = Clock::now();
  MatchReport report = ransac_register(matches, pair.query, pair.target, ransac);
  const double ransac_seconds = seconds_since(t0);

  t0 = Clock::now();
  const MatchReport refined = icp_refine(report.pose, pair.query, pair.target, icp);
  report.timings.icp_seconds = seconds_since(t0);

  report.pose = refined.pose;
  report.icp_rmse = refined.icp_rmse;
  report.icp_rmse_history = refined.icp_rmse_history;
  report.timings.match_seconds = match_seconds;
  report.timings.ransac_seconds = ransac_seconds;
  return report;
}

}  // namespace distpose
