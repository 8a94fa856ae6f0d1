#pragma once

// Seeded data augmentation: uniform random rotation, Gaussian coordinate
// jitter, and independent point dropout with a minimum-survivor floor.

#include <Eigen/Geometry>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "distpose/error.hpp"
#include "distpose/geometry.hpp"
#include "distpose/rng.hpp"

namespace distpose {

struct AugmentConfig {
  bool rotation = true;
  double jitter_sigma = 0.005;  // normalized (unit-diameter) units
  double dropout_prob = 0.2;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(jitter_sigma >= 0.0)) {
      throw ArgumentError("AugmentConfig: jitter_sigma must be non-negative");
    }
    if (!(dropout_prob >= 0.0) || !(dropout_prob < 1.0)) {
      throw ArgumentError("AugmentConfig: dropout_prob must lie in [0, 1)");
    }
  }
};

namespace detail {

// Distinct stream tags so the three augmentations draw independent randomness
// from one seed.
inline constexpr std::uint64_t kRotationStream = 0x726f7461;
inline constexpr std::uint64_t kJitterStream = 0x6a697474;
inline constexpr std::uint64_t kDropoutStream = 0x64726f70;

}  // namespace detail

// Rotation drawn uniformly over SO(3) by normalizing a 4-vector of Gaussians
// into a unit quaternion; translation stays zero.
inline RigidTransform random_rotation(std::uint64_t seed) {
  SplitMix64 rng = derive_stream(seed, detail::kRotationStream);
  Eigen::Vector4d q;
  do {
    q = Eigen::Vector4d(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  } while (q.norm() == 0.0);
  q.normalize();
  RigidTransform out = RigidTransform::identity();
  out.rotation = Eigen::Quaterniond(q(0), q(1), q(2), q(3)).toRotationMatrix();
  return out;
}

// Adds i.i.d. zero-mean Gaussian noise of standard deviation `sigma` to every
// coordinate; normals are passed through untouched.
inline PointCloud jitter(const PointCloud& cloud, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ArgumentError("jitter: sigma must be non-negative");
  if (sigma == 0.0) return cloud;
  SplitMix64 rng = derive_stream(seed, detail::kJitterStream);
  PointCloud out = cloud;
  for (Vec3& p : out.points) {
    p.x() += sigma * rng.normal();
    p.y() += sigma * rng.normal();
    p.z() += sigma * rng.normal();
  }
  return out;
}

struct DropoutResult {
  PointCloud cloud;
  std::vector<std::size_t> kept_indices;
};

// Keeps each point independently with probability 1 - prob, preserving order.
// At least 3 points always survive: if fewer do, the result is the 3
// lowest-index points of the input instead. Clouds of 3 or fewer points are
// returned unchanged.
inline DropoutResult point_dropout(const PointCloud& cloud, double prob,
                                   std::uint64_t seed) {
  if (!(prob >= 0.0) || !(prob < 1.0)) {
    throw ArgumentError("point_dropout: prob must lie in [0, 1)");
  }
  DropoutResult result;
  if (cloud.size() <= 3) {
    result.cloud = cloud;
    for (std::size_t i = 0; i < cloud.size(); ++i) result.kept_indices.push_back(i);
    return result;
  }

  SplitMix64 rng = derive_stream(seed, detail::kDropoutStream);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (rng.uniform() >= prob) result.kept_indices.push_back(i);
  }
  if (result.kept_indices.size() < 3) {
    result.kept_indices = {0, 1, 2};
  }
  for (const std::size_t i : result.kept_indices) {
    result.cloud.points.push_back(cloud.points[i]);
    if (cloud.has_normals()) result.cloud.normals.push_back(cloud.normals[i]);
  }
  return result;
}

}  // namespace distpose
