#pragma once

// Per-point feature vectors and the built-in "toy" geometric backend.
//
// The toy backend exists so the full matching/registration/evaluation chain
// can run end-to-end without any learned features: it summarizes each point's
// neighbourhood with rotation-invariant covariance statistics. Descriptor
// sets produced by a trained model are loaded from cache files instead
// (load_precomputed in store.hpp) and flow through the same interfaces.

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "distpose/error.hpp"
#include "distpose/geometry.hpp"

namespace distpose {

/// Row-major so each descriptor row is a contiguous span (serialization and
/// row gathers stay trivial).
using DescriptorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class DescriptorSource { precomputed, toy };

/// One descriptor row per point of the cloud it was extracted from.
struct DescriptorSet {
  DescriptorMatrix vectors;
  DescriptorSource source = DescriptorSource::toy;

  Eigen::Index rows() const { return vectors.rows(); }
  int dim() const { return static_cast<int>(vectors.cols()); }
};

/// Euclidean distance between two descriptor rows. For L2-normalized rows the
/// result lies in [0, 2].
inline double feature_distance(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                               const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  if (a.size() != b.size()) {
    throw ArgumentError("feature_distance: dimension mismatch");
  }
  return (a - b).norm();
}

namespace detail {

/// Index of the row of `haystack` nearest to `needle` in Euclidean feature
/// distance, with ties resolved to the lowest row index (strict < on an
/// ascending scan). Second element is the (non-squared) distance.
inline std::pair<Eigen::Index, double> nearest_row(
    const DescriptorMatrix& haystack,
    const Eigen::Ref<const Eigen::RowVectorXd>& needle) {
  Eigen::Index best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < haystack.rows(); ++j) {
    const double d2 = (haystack.row(j) - needle).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = j;
    }
  }
  return {best, std::sqrt(best_d2)};
}

}  // namespace detail

inline constexpr int kToyDescriptorDim = 32;

/// Rotation-invariant neighbourhood statistics, zero-padded to 32 dims and
/// L2-normalized per row.
///
/// `radius` is an absolute search radius in the cloud's units. The pipeline
/// operates on unit-diameter normalized pairs, where the default 0.3 reads as
/// "30% of the query diameter"; both clouds of a pair must use the same value
/// so their descriptors stay comparable. Valid range (0, 1].
///
/// Per point, over the neighbour set {q : |q - p| <= radius} (which contains
/// p itself):
///   0-2  covariance eigenvalues l1 >= l2 >= l3, normalized by their sum
///   3    linearity   (l1 - l2) / l1
///   4    planarity   (l2 - l3) / l1
///   5    sphericity   l3 / l1
///   6    anisotropy  (l1 - l3) / l1
///   7    omnivariance (l1 * l2 * l3)^(1/3)   (of the normalized eigenvalues)
///   8    neighbour count / cloud size
///   9-10 mean and std of neighbour distances, divided by radius
/// Points with fewer than 3 neighbours get the unit first-basis vector.
inline DescriptorSet extract_toy(const PointCloud& cloud, double radius = 0.3) {
  if (cloud.empty()) throw EmptyInputError("extract_toy: cloud is empty");
  if (!(radius > 0.0) || radius > 1.0) {
    throw ArgumentError("extract_toy: radius must lie in (0, 1]");
  }

  const SpatialIndex index(cloud);
  const std::size_t n = cloud.size();
  DescriptorSet out;
  out.source = DescriptorSource::toy;
  out.vectors.setZero(static_cast<Eigen::Index>(n), kToyDescriptorDim);

  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.vectors.row(static_cast<Eigen::Index>(i));
    const auto hits = index.radius(cloud.points[i], radius);
    if (hits.size() < 3) {
      row(0) = 1.0;
      continue;
    }

    Vec3 mu = Vec3::Zero();
    for (const auto& h : hits) mu += cloud.points[static_cast<std::size_t>(h.index)];
    mu /= static_cast<double>(hits.size());

    Mat3 cov = Mat3::Zero();
    double dist_sum = 0.0;
    for (const auto& h : hits) {
      const Vec3 d = cloud.points[static_cast<std::size_t>(h.index)] - mu;
      cov += d * d.transpose();
      dist_sum += h.distance;
    }
    cov /= static_cast<double>(hits.size());
    const double dist_mean = dist_sum / static_cast<double>(hits.size());
    double dist_var = 0.0;
    for (const auto& h : hits) {
      dist_var += (h.distance - dist_mean) * (h.distance - dist_mean);
    }
    dist_var /= static_cast<double>(hits.size());

    Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    // Eigen reports ascending order; negative round-off is clamped away.
    const double l1 = std::max(es.eigenvalues()(2), 0.0);
    const double l2 = std::max(es.eigenvalues()(1), 0.0);
    const double l3 = std::max(es.eigenvalues()(0), 0.0);
    const double sum = l1 + l2 + l3;
    const double e1 = sum > 0.0 ? l1 / sum : 0.0;
    const double e2 = sum > 0.0 ? l2 / sum : 0.0;
    const double e3 = sum > 0.0 ? l3 / sum : 0.0;

    row(0) = e1;
    row(1) = e2;
    row(2) = e3;
    if (e1 > 0.0) {
      row(3) = (e1 - e2) / e1;  // linearity
      row(4) = (e2 - e3) / e1;  // planarity
      row(5) = e3 / e1;         // sphericity
      row(6) = (e1 - e3) / e1;  // anisotropy
    }
    row(7) = std::cbrt(e1 * e2 * e3);  // omnivariance
    row(8) = static_cast<double>(hits.size()) / static_cast<double>(n);
    row(9) = dist_mean / radius;
    row(10) = std::sqrt(dist_var) / radius;

    const double norm = row.norm();
    if (norm > 0.0) {
      row /= norm;
    } else {
      row.setZero();
      row(0) = 1.0;
    }
  }
  return out;
}

/// Uniform interface over descriptor producers so the pipeline can swap the
/// toy backend for precomputed (distilled/teacher) features.
class DescriptorBackend {
 public:
  virtual ~DescriptorBackend() = default;
  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  virtual DescriptorSet extract(const PointCloud& cloud) const = 0;
};

class ToyDescriptorBackend final : public DescriptorBackend {
 public:
  explicit ToyDescriptorBackend(double radius = 0.3) : radius_(radius) {}

  std::string name() const override { return "toy-geometric"; }
  int dim() const override { return kToyDescriptorDim; }
  DescriptorSet extract(const PointCloud& cloud) const override {
    return extract_toy(cloud, radius_);
  }

 private:
  double radius_;
};

}  // namespace distpose
