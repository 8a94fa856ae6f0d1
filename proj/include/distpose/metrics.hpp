#pragma once

// Feature-quality metrics (ratio of nearest points, feature-matching recall)
// and pose-error metrics (RRE, RTE, ADD, ADD-S, MSSD) with recall aggregation.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "distpose/descriptors.hpp"
#include "distpose/error.hpp"
#include "distpose/geometry.hpp"

namespace distpose {

struct MetricThresholds {
  double tau1_fraction = 0.03;  // metric gate as a fraction of query diameter
  double tau2 = 0.05;           // per-pair gate on the RON value
  std::vector<double> recall_thresholds = {0.05, 0.10, 0.15, 0.20, 0.25,
                                           0.30, 0.35, 0.40, 0.45, 0.50};

  void validate() const {
    if (!(tau1_fraction > 0.0) || !(tau2 > 0.0)) {
      throw ArgumentError("MetricThresholds: tau values must be positive");
    }
    if (recall_thresholds.empty()) {
      throw ArgumentError("MetricThresholds: recall_thresholds must be non-empty");
    }
    for (std::size_t i = 0; i < recall_thresholds.size(); ++i) {
      if (!(recall_thresholds[i] > 0.0)) {
        throw ArgumentError("MetricThresholds: recall thresholds must be positive");
      }
      if (i > 0 && recall_thresholds[i] < recall_thresholds[i - 1]) {
        throw ArgumentError("MetricThresholds: recall thresholds must be ascending");
      }
    }
  }
};

struct PoseErrors {
  double rre = 0.0;    // rotation geodesic error, radians
  double rte = 0.0;    // translation error
  double add = 0.0;    // mean per-point displacement
  double add_s = 0.0;  // mean nearest-point displacement (symmetric variant)
  double mssd = 0.0;   // max displacement, minimized over declared symmetries
};

struct EvalRecord {
  std::string scene_id;
  double ron = 0.0;
  PoseErrors errors;
  double diameter = 1.0;  // model diameter the recall thresholds scale with
  std::vector<bool> mssd_success;  // one flag per recall threshold
};

enum class RecallStatistic { mssd };

// Fraction of query points whose feature-space nearest neighbor in the target
// is geometrically correct: the matched target point must lie within
// tau1_fraction * diameter(query) of the ground-truth-transformed query point.
inline double ron(const DescriptorSet& query_features, const DescriptorSet& target_features,
                  const PointCloud& query, const PointCloud& target,
                  const RigidTransform& gt, double tau1_fraction = 0.03) {
  if (query.empty() || target.empty()) throw EmptyInputError("ron: empty cloud");
  if (query_features.rows() == 0 || target_features.rows() == 0) {
    throw EmptyInputError("ron: empty descriptor set");
  }
  if (query_features.dim() != target_features.dim()) {
    throw ArgumentError("ron: descriptor dimension mismatch");
  }
  if (static_cast<std::size_t>(query_features.rows()) != query.size() ||
      static_cast<std::size_t>(target_features.rows()) != target.size()) {
    throw ArgumentError("ron: descriptor rows must match cloud sizes");
  }
  if (!(tau1_fraction > 0.0)) throw ArgumentError("ron: tau1_fraction must be positive");

  const double threshold = tau1_fraction * diameter(query);
  const PointCloud transformed = apply(gt, query);
  int hits = 0;
  for (std::size_t i = 0; i < query.size(); ++i) {
    const auto [j, feature_dist] = detail::nearest_row(
        target_features.vectors, query_features.vectors.row(static_cast<Eigen::Index>(i)));
    (void)feature_dist;
    const double metric_dist =
        (target.points[static_cast<std::size_t>(j)] - transformed.points[i]).norm();
    if (metric_dist <= threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(query.size());
}

// Fraction of evaluation pairs whose RON strictly exceeds tau2.
inline double fmr(const std::vector<double>& ron_values, double tau2 = 0.05) {
  if (ron_values.empty()) throw EmptyInputError("fmr: empty RON list");
  int above = 0;
  for (const double value : ron_values) {
    if (value > tau2) ++above;
  }
  return static_cast<double>(above) / static_cast<double>(ron_values.size());
}

// Pose-error family between an estimate and the ground truth over a model
// cloud. The identity always participates in the MSSD minimization; the
// `symmetries` list declares additional transforms the object is invariant to.
inline PoseErrors pose_errors(const RigidTransform& est, const RigidTransform& gt,
                              const PointCloud& model,
                              const std::vector<RigidTransform>& symmetries = {}) {
  if (model.empty()) throw EmptyInputError("pose_errors: empty model cloud");

  PoseErrors out;
  out.rre = geodesic_angle(est.rotation, gt.rotation);
  out.rte = (est.translation - gt.translation).norm();

  const PointCloud est_pts = apply(est, model);
  const PointCloud gt_pts = apply(gt, model);

  double add_sum = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    add_sum += (est_pts.points[i] - gt_pts.points[i]).norm();
  }
  out.add = add_sum / static_cast<double>(model.size());

  const SpatialIndex gt_index(gt_pts);
  double adds_sum = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    adds_sum += gt_index.nearest(est_pts.points[i]).distance;
  }
  out.add_s = adds_sum / static_cast<double>(model.size());

  double best = std::numeric_limits<double>::infinity();
  std::vector<RigidTransform> refs;
  refs.push_back(gt);
  for (const RigidTransform& s : symmetries) refs.push_back(compose(gt, s));
  for (const RigidTransform& ref : refs) {
    const PointCloud ref_pts = apply(ref, model);
    double worst = 0.0;
    for (std::size_t i = 0; i < model.size(); ++i) {
      worst = std::max(worst, (est_pts.points[i] - ref_pts.points[i]).norm());
    }
    best = std::min(best, worst);
  }
  out.mssd = best;
  return out;
}

// Per-threshold pass flags: MSSD strictly below threshold * diameter.
inline std::vector<bool> mssd_success_flags(double mssd, double diameter,
                                            const std::vector<double>& thresholds) {
  std::vector<bool> flags;
  flags.reserve(thresholds.size());
  for (const double theta : thresholds) flags.push_back(mssd < theta * diameter);
  return flags;
}

// Mean over thresholds of the fraction of records passing at that threshold.
inline double average_recall(const std::vector<EvalRecord>& records,
                             const std::vector<double>& thresholds,
                             RecallStatistic statistic = RecallStatistic::mssd) {
  (void)statistic;  // MSSD is the only supported statistic
  if (records.empty()) throw EmptyInputError("average_recall: no records");
  if (thresholds.empty()) throw ArgumentError("average_recall: no thresholds");

  double recall_sum = 0.0;
  for (const double theta : thresholds) {
    int passed = 0;
    for (const EvalRecord& record : records) {
      if (record.errors.mssd < theta * record.diameter) ++passed;
    }
    recall_sum += static_cast<double>(passed) / static_cast<double>(records.size());
  }
  return recall_sum / static_cast<double>(thresholds.size());
}

}  // namespace distpose
