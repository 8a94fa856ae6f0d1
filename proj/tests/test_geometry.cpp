#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "distpose/geometry.hpp"
#include "distpose/rng.hpp"
#include "test_util.hpp"

using namespace distpose;
using Catch::Approx;

namespace {

Mat3 rot_z(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

}  // namespace

TEST_CASE("diameter of trivial clouds", "[geometry]") {
  PointCloud single;
  single.points = {Vec3(0.3, -0.2, 5.0)};
  CHECK(diameter(single) == 0.0);

  PointCloud pair;
  pair.points = {Vec3(0, 0, 0), Vec3(2, 0, 0)};
  CHECK(diameter(pair) == 2.0);

  PointCloud cube;
  for (int x = 0; x <= 1; ++x)
    for (int y = 0; y <= 1; ++y)
      for (int z = 0; z <= 1; ++z) cube.points.emplace_back(x, y, z);
  CHECK(diameter(cube) == Approx(std::sqrt(3.0)).margin(1e-12));
}

TEST_CASE("diameter equals exhaustive oracle on random clouds", "[geometry]") {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const PointCloud cloud = testutil::random_cloud(rng, 300);
    double best = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      for (std::size_t j = i + 1; j < cloud.size(); ++j) {
        const double dx = cloud.points[i].x() - cloud.points[j].x();
        const double dy = cloud.points[i].y() - cloud.points[j].y();
        const double dz = cloud.points[i].z() - cloud.points[j].z();
        best = std::max(best, dx * dx + dy * dy + dz * dz);
      }
    }
    CHECK(diameter(cloud) == std::sqrt(best));
  }
}

TEST_CASE("diameter is invariant under rigid motion", "[geometry]") {
  SplitMix64 rng(12);
  const PointCloud cloud = testutil::random_cloud(rng, 200);
  const RigidTransform t = testutil::random_transform(rng, 5.0);
  CHECK(diameter(apply(t, cloud)) == Approx(diameter(cloud)).margin(1e-9));
}

TEST_CASE("apply: identity, translation, rotation", "[geometry]") {
  const Vec3 p(1.0, 0.0, 0.0);
  CHECK(apply(RigidTransform::identity(), p) == p);

  RigidTransform shift;
  shift.translation = Vec3(0.5, -1.0, 2.0);
  CHECK((apply(shift, p) - Vec3(1.5, -1.0, 2.0)).norm() == 0.0);

  RigidTransform quarter;
  quarter.rotation = rot_z(std::numbers::pi / 2);
  CHECK((apply(quarter, p) - Vec3(0.0, 1.0, 0.0)).norm() < 1e-12);
}

TEST_CASE("apply rotates normals but never translates them", "[geometry]") {
  PointCloud cloud;
  cloud.points = {Vec3(1, 2, 3)};
  cloud.normals = {Vec3(1, 0, 0)};

  RigidTransform shift;
  shift.translation = Vec3(10, 20, 30);
  const PointCloud shifted = apply(shift, cloud);
  CHECK(shifted.normals[0] == Vec3(1, 0, 0));

  RigidTransform quarter;
  quarter.rotation = rot_z(std::numbers::pi / 2);
  quarter.translation = Vec3(5, 5, 5);
  const PointCloud rotated = apply(quarter, cloud);
  CHECK((rotated.normals[0] - Vec3(0, 1, 0)).norm() < 1e-12);
  CHECK(rotated.normals[0].norm() == Approx(1.0).margin(1e-12));
}

TEST_CASE("compose applies right-hand transform first", "[geometry]") {
  SplitMix64 rng(13);
  const RigidTransform a = testutil::random_transform(rng);
  const RigidTransform b = testutil::random_transform(rng);
  const Vec3 p(0.3, -0.7, 0.2);
  CHECK((apply(compose(a, b), p) - apply(a, apply(b, p))).norm() < 1e-12);
}

TEST_CASE("inverse composes to the identity", "[geometry]") {
  SplitMix64 rng(14);
  const RigidTransform t = testutil::random_transform(rng, 3.0);
  const RigidTransform id = compose(t, t.inverse());
  CHECK((id.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(id.translation.norm() < 1e-12);
  CHECK(t.is_rigid());
}

TEST_CASE("is_rigid rejects scaled and reflected blocks", "[geometry]") {
  RigidTransform scaled;
  scaled.rotation = 2.0 * Mat3::Identity();
  CHECK_FALSE(scaled.is_rigid());

  RigidTransform reflected;
  reflected.rotation = Mat3::Identity();
  reflected.rotation(2, 2) = -1.0;
  CHECK_FALSE(reflected.is_rigid());
}

TEST_CASE("geodesic_angle basics", "[geometry]") {
  CHECK(geodesic_angle(Mat3::Identity(), Mat3::Identity()) == 0.0);
  CHECK(geodesic_angle(rot_z(std::numbers::pi / 2), Mat3::Identity()) ==
        Approx(std::numbers::pi / 2).margin(1e-12));
  // Round-off must not push acos out of domain.
  SplitMix64 rng(15);
  for (int i = 0; i < 50; ++i) {
    const Mat3 r = testutil::random_rotation_matrix(rng);
    const double self = geodesic_angle(r, r);
    CHECK(std::isfinite(self));
    CHECK(self < 1e-7);
  }
}

TEST_CASE("fit_rigid recovers a known quarter turn", "[geometry]") {
  std::vector<Vec3> source = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0),
                              Vec3(0, 0, 1)};
  RigidTransform gt;
  gt.rotation = rot_z(std::numbers::pi / 2);
  gt.translation = Vec3(0.1, -0.2, 0.3);
  std::vector<Vec3> target;
  for (const Vec3& p : source) target.push_back(apply(gt, p));

  const RigidTransform fit = fit_rigid(source, target);
  CHECK(geodesic_angle(fit.rotation, gt.rotation) < 1e-10);
  CHECK((fit.translation - gt.translation).norm() < 1e-10);
}

TEST_CASE("fit_rigid input validation", "[geometry]") {
  std::vector<Vec3> three = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  std::vector<Vec3> two = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  CHECK_THROWS_AS(fit_rigid(three, two), ArgumentError);
  CHECK_THROWS_AS(fit_rigid(two, two), ArgumentError);

  // Collinear points leave the rotation about their axis unobservable.
  std::vector<Vec3> line = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0),
                            Vec3(3, 0, 0)};
  CHECK_THROWS_AS(fit_rigid(line, line), DegenerateInputError);

  // Coincident points cannot even fix an axis.
  std::vector<Vec3> same(4, Vec3(0.5, 0.5, 0.5));
  CHECK_THROWS_AS(fit_rigid(same, same), DegenerateInputError);
}

TEST_CASE("fit_rigid on a planar (non-collinear) set is well posed", "[geometry]") {
  std::vector<Vec3> source = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0),
                              Vec3(1, 1, 0)};
  RigidTransform gt;
  gt.rotation = rot_z(1.1);
  gt.translation = Vec3(0.4, 0.0, -0.3);
  std::vector<Vec3> target;
  for (const Vec3& p : source) target.push_back(apply(gt, p));
  const RigidTransform fit = fit_rigid(source, target);
  CHECK(geodesic_angle(fit.rotation, gt.rotation) < 1e-10);
  CHECK((fit.translation - gt.translation).norm() < 1e-10);
}

TEST_CASE("fit_rigid never returns a reflection", "[geometry]") {
  SplitMix64 rng(16);
  std::vector<Vec3> source;
  std::vector<Vec3> mirrored;
  for (int i = 0; i < 30; ++i) {
    const Vec3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    source.push_back(p);
    mirrored.emplace_back(-p.x(), p.y(), p.z());
  }
  const RigidTransform fit = fit_rigid(source, mirrored);
  CHECK(fit.rotation.determinant() == Approx(1.0).margin(1e-9));
}

TEST_CASE("fit_rigid recovers random noise-free transforms to 1e-9", "[geometry]") {
  SplitMix64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(40));
    std::vector<Vec3> source;
    for (int i = 0; i < n; ++i) {
      source.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1),
                          rng.uniform(-1, 1));
    }
    // Reject near-degenerate draws: the criterion targets generic position.
    PointCloud pc;
    pc.points = source;
    if (diameter(pc) < 0.3) continue;
    const RigidTransform gt = testutil::random_transform(rng, 2.0);
    std::vector<Vec3> target;
    for (const Vec3& p : source) target.push_back(apply(gt, p));
    RigidTransform fit;
    try {
      fit = fit_rigid(source, target);
    } catch (const DegenerateInputError&) {
      continue;  // random triple landed (numerically) on a line
    }
    REQUIRE(geodesic_angle(fit.rotation, gt.rotation) < 1e-9);
    REQUIRE((fit.translation - gt.translation).norm() < 1e-9);
  }
}

TEST_CASE("SpatialIndex rejects empty clouds", "[geometry]") {
  PointCloud empty;
  CHECK_THROWS_AS(SpatialIndex(empty), EmptyInputError);
}

TEST_CASE("SpatialIndex nearest: basics and tie-breaking", "[geometry]") {
  PointCloud cloud;
  cloud.points = {Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 2, 0)};
  SpatialIndex index(cloud);

  // Equidistant pair: the lower index must win.
  const auto tie = index.nearest(Vec3(0, 0, 0));
  CHECK(tie.index == 0);
  CHECK(tie.distance == 1.0);

  const auto near2 = index.nearest(Vec3(0, 1.9, 0));
  CHECK(near2.index == 2);
}

TEST_CASE("SpatialIndex nearest equals exhaustive scan exactly", "[geometry]") {
  SplitMix64 rng(18);
  int pairs = 0;
  while (pairs < 1000) {
    const int n = 1 + static_cast<int>(rng.below(500));
    PointCloud cloud = testutil::random_cloud(rng, n);
    // Fold in exact duplicates so distance ties actually occur.
    for (int d = 0; d < n / 10; ++d) {
      cloud.points.push_back(cloud.points[rng.below(cloud.points.size())]);
    }
    SpatialIndex index(cloud);
    for (int q = 0; q < 20 && pairs < 1000; ++q, ++pairs) {
      Vec3 query(rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2),
                 rng.uniform(-1.2, 1.2));
      if (rng.below(4) == 0) query = cloud.points[rng.below(cloud.points.size())];
      const auto got = index.nearest(query);
      const auto [want_idx, want_dist] = testutil::brute_nearest(cloud, query);
      REQUIRE(got.index == want_idx);
      REQUIRE(got.distance == want_dist);
    }
  }
}

TEST_CASE("SpatialIndex nearest on an integer grid (forced ties)", "[geometry]") {
  PointCloud grid;
  for (int x = 0; x < 5; ++x)
    for (int y = 0; y < 5; ++y)
      for (int z = 0; z < 5; ++z) grid.points.emplace_back(x, y, z);
  SpatialIndex index(grid);
  SplitMix64 rng(19);
  for (int q = 0; q < 200; ++q) {
    // Cell centres and lattice points: many exactly-equidistant candidates.
    const Vec3 query(0.5 * static_cast<double>(rng.below(9)),
                     0.5 * static_cast<double>(rng.below(9)),
                     0.5 * static_cast<double>(rng.below(9)));
    const auto got = index.nearest(query);
    const auto [want_idx, want_dist] = testutil::brute_nearest(grid, query);
    REQUIRE(got.index == want_idx);
    REQUIRE(got.distance == want_dist);
  }
}

TEST_CASE("SpatialIndex knn equals sorted exhaustive scan", "[geometry]") {
  SplitMix64 rng(20);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(300));
    PointCloud cloud = testutil::random_cloud(rng, n);
    for (int d = 0; d < n / 8; ++d) {
      cloud.points.push_back(cloud.points[rng.below(cloud.points.size())]);
    }
    SpatialIndex index(cloud);
    const Vec3 query(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    for (const int k : {1, 5, static_cast<int>(cloud.size())}) {
      const auto got = index.knn(query, k);
      const auto want = testutil::brute_knn(cloud, query, k);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        REQUIRE(got[i].index == want[i].second);
        REQUIRE(got[i].distance == std::sqrt(want[i].first));
      }
    }
  }
  PointCloud tiny;
  tiny.points = {Vec3(0, 0, 0)};
  CHECK_THROWS_AS(SpatialIndex(tiny).knn(Vec3(0, 0, 0), 0), ArgumentError);
}

TEST_CASE("SpatialIndex radius equals exhaustive scan (inclusive)", "[geometry]") {
  SplitMix64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(300));
    const PointCloud cloud = testutil::random_cloud(rng, n);
    SpatialIndex index(cloud);
    const Vec3 query(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double r = rng.uniform(0.0, 1.5);
    const auto got = index.radius(query, r);
    std::vector<int> want;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const double dx = query.x() - cloud.points[i].x();
      const double dy = query.y() - cloud.points[i].y();
      const double dz = query.z() - cloud.points[i].z();
      if (dx * dx + dy * dy + dz * dz <= r * r) want.push_back(static_cast<int>(i));
    }
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) REQUIRE(got[i].index == want[i]);
  }

  // Boundary point is included (<=).
  PointCloud pair;
  pair.points = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  const auto hits = SpatialIndex(pair).radius(Vec3(0, 0, 0), 1.0);
  REQUIRE(hits.size() == 2);
}

TEST_CASE("matrix round trip", "[geometry]") {
  SplitMix64 rng(22);
  const RigidTransform t = testutil::random_transform(rng, 2.0);
  const RigidTransform back = RigidTransform::from_matrix(t.matrix());
  CHECK((back.rotation - t.rotation).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.translation - t.translation).norm() == 0.0);
}
