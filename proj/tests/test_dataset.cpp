#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "distpose/correspondence.hpp"
#include "distpose/dataset.hpp"
#include "distpose/error.hpp"
#include "distpose/geometry.hpp"
#include "distpose/rng.hpp"

#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;
using namespace distpose;

fs::path test_dir() {
  const fs::path dir = fs::temp_directory_path() / "distpose_dataset_tests";
  fs::create_directories(dir);
  return dir;
}

void spit(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// Quantize a double through float32 so that file round trips can be compared
// with exact equality.
double through_float(double v) { return static_cast<double>(static_cast<float>(v)); }

PointCloud float_exact_cloud(std::uint64_t seed, std::size_t n, bool with_normals) {
  SplitMix64 rng(seed);
  PointCloud cloud;
  for (std::size_t i = 0; i < n; ++i) {
    cloud.points.emplace_back(through_float(rng.uniform(-2.0, 2.0)),
                              through_float(rng.uniform(-2.0, 2.0)),
                              through_float(rng.uniform(-2.0, 2.0)));
    if (with_normals) {
      Vec3 n3;
      do {
        n3 = Vec3(rng.normal(), rng.normal(), rng.normal());
      } while (n3.norm() < 1e-6);
      n3.normalize();
      cloud.normals.emplace_back(through_float(n3.x()), through_float(n3.y()),
                                 through_float(n3.z()));
    }
  }
  return cloud;
}

bool clouds_identical(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size() || a.normals.size() != b.normals.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.points[i].x() != b.points[i].x() || a.points[i].y() != b.points[i].y() ||
        a.points[i].z() != b.points[i].z()) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.normals.size(); ++i) {
    if (a.normals[i].x() != b.normals[i].x() || a.normals[i].y() != b.normals[i].y() ||
        a.normals[i].z() != b.normals[i].z()) {
      return false;
    }
  }
  return true;
}

constexpr char kAsciiFixture[] =
    "ply\n"
    "format ascii 1.0\n"
    "comment three hand-written vertices\n"
    "element vertex 3\n"
    "property float x\n"
    "property float y\n"
    "property float z\n"
    "end_header\n"
    "0.5 -1.25 2\n"
    "0 0 0\n"
    "1e-3 -250 0.25\n";

}  // namespace

TEST_CASE("ascii ply parses a hand-written fixture", "[dataset]") {
  const fs::path path = test_dir() / "fixture_ascii.ply";
  spit(path, kAsciiFixture);

  const PointCloud cloud = load_ply(path.string());
  REQUIRE(cloud.size() == 3);
  REQUIRE_FALSE(cloud.has_normals());
  CHECK(cloud.points[0].x() == 0.5);
  CHECK(cloud.points[0].y() == -1.25);
  CHECK(cloud.points[0].z() == 2.0);
  CHECK(cloud.points[1] == Vec3(0, 0, 0));
  CHECK(cloud.points[2].x() == through_float(1e-3));  // float32 storage
  CHECK(cloud.points[2].y() == -250.0);
  CHECK(cloud.points[2].z() == 0.25);

  SECTION("normals variant") {
    const std::string with_normals =
        "ply\nformat ascii 1.0\nelement vertex 2\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property float nx\nproperty float ny\nproperty float nz\n"
        "end_header\n"
        "1 2 3 1 0 0\n"
        "-1 0.5 0 0 0 -1\n";
    const fs::path npath = test_dir() / "fixture_normals.ply";
    spit(npath, with_normals);
    const PointCloud nc = load_ply(npath.string());
    REQUIRE(nc.size() == 2);
    REQUIRE(nc.has_normals());
    CHECK(nc.points[1] == Vec3(-1.0, 0.5, 0.0));
    CHECK(nc.normals[0] == Vec3(1, 0, 0));
    CHECK(nc.normals[1] == Vec3(0, 0, -1));
  }
}

TEST_CASE("binary ply round trip is bitwise", "[dataset]") {
  const PointCloud cloud = float_exact_cloud(11, 1000, true);
  const fs::path path = test_dir() / "roundtrip_binary.ply";
  save_ply(path.string(), cloud, PlyFormat::binary_little_endian);
  const PointCloud loaded = load_ply(path.string());
  REQUIRE(clouds_identical(loaded, cloud));

  SECTION("file layout: header text plus packed float32 payload") {
    const std::string bytes = slurp(path);
    const std::string expected_header =
        "ply\nformat binary_little_endian 1.0\nelement vertex 1000\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property float nx\nproperty float ny\nproperty float nz\n"
        "end_header\n";
    REQUIRE(bytes.substr(0, expected_header.size()) == expected_header);
    REQUIRE(bytes.size() == expected_header.size() + 1000 * 6 * 4);

    // Decode the first vertex by hand (little-endian float32 x, y, z).
    const auto read_f32 = [&bytes](std::size_t offset) {
      std::uint32_t bits = 0;
      for (int k = 3; k >= 0; --k) {
        bits = (bits << 8) |
               static_cast<unsigned char>(bytes[offset + static_cast<std::size_t>(k)]);
      }
      float f;
      std::memcpy(&f, &bits, 4);
      return static_cast<double>(f);
    };
    CHECK(read_f32(expected_header.size()) == cloud.points[0].x());
    CHECK(read_f32(expected_header.size() + 4) == cloud.points[0].y());
    CHECK(read_f32(expected_header.size() + 8) == cloud.points[0].z());
  }

  SECTION("points-only cloud") {
    const PointCloud plain = float_exact_cloud(12, 257, false);
    const fs::path ppath = test_dir() / "roundtrip_plain.ply";
    save_ply(ppath.string(), plain);
    REQUIRE(clouds_identical(load_ply(ppath.string()), plain));
    const std::string bytes = slurp(ppath);
    const std::size_t header = bytes.find("end_header\n") + 11;
    REQUIRE(bytes.size() == header + 257 * 3 * 4);
  }

  SECTION("empty cloud") {
    const fs::path epath = test_dir() / "roundtrip_empty.ply";
    save_ply(epath.string(), PointCloud{});
    CHECK(load_ply(epath.string()).size() == 0);
  }
}

TEST_CASE("ascii ply round trip is bitwise at float32 precision", "[dataset]") {
  const PointCloud cloud = float_exact_cloud(13, 400, true);
  const fs::path path = test_dir() / "roundtrip_ascii.ply";
  save_ply(path.string(), cloud, PlyFormat::ascii);
  REQUIRE(clouds_identical(load_ply(path.string()), cloud));
}

TEST_CASE("ply loader rejects malformed files", "[dataset]") {
  const fs::path dir = test_dir();

  SECTION("missing file") {
    REQUIRE_THROWS_AS(load_ply((dir / "no_such.ply").string()), NotFoundError);
  }
  SECTION("face element") {
    spit(dir / "faces.ply",
         "ply\nformat ascii 1.0\nelement face 5\n"
         "property float x\nend_header\n");
    REQUIRE_THROWS_AS(load_ply((dir / "faces.ply").string()), FormatError);
  }
  SECTION("no vertex element") {
    spit(dir / "novertex.ply", "ply\nformat ascii 1.0\nend_header\n");
    REQUIRE_THROWS_AS(load_ply((dir / "novertex.ply").string()), FormatError);
  }
  SECTION("unsupported property type") {
    spit(dir / "doubleprop.ply",
         "ply\nformat ascii 1.0\nelement vertex 1\n"
         "property double x\nproperty double y\nproperty double z\n"
         "end_header\n0 0 0\n");
    REQUIRE_THROWS_AS(load_ply((dir / "doubleprop.ply").string()), FormatError);
  }
  SECTION("unknown property layout") {
    spit(dir / "layout.ply",
         "ply\nformat ascii 1.0\nelement vertex 1\n"
         "property float x\nproperty float y\nproperty float intensity\n"
         "end_header\n0 0 0\n");
    REQUIRE_THROWS_AS(load_ply((dir / "layout.ply").string()), FormatError);
  }
  SECTION("bad magic") {
    spit(dir / "magic.ply", "png\nformat ascii 1.0\nend_header\n");
    REQUIRE_THROWS_AS(load_ply((dir / "magic.ply").string()), FormatError);
  }
  SECTION("unsupported format line") {
    spit(dir / "bigendian.ply",
         "ply\nformat binary_big_endian 1.0\nelement vertex 0\n"
         "property float x\nproperty float y\nproperty float z\nend_header\n");
    REQUIRE_THROWS_AS(load_ply((dir / "bigendian.ply").string()), FormatError);
  }
  SECTION("unterminated header") {
    spit(dir / "unterminated.ply", "ply\nformat ascii 1.0\nelement vertex 3\n");
    REQUIRE_THROWS_AS(load_ply((dir / "unterminated.ply").string()), FormatError);
  }
  SECTION("truncated ascii body") {
    spit(dir / "short_ascii.ply",
         "ply\nformat ascii 1.0\nelement vertex 2\n"
         "property float x\nproperty float y\nproperty float z\n"
         "end_header\n1 2 3\n");
    REQUIRE_THROWS_AS(load_ply((dir / "short_ascii.ply").string()), FormatError);
  }
  SECTION("trailing ascii body") {
    spit(dir / "long_ascii.ply",
         "ply\nformat ascii 1.0\nelement vertex 1\n"
         "property float x\nproperty float y\nproperty float z\n"
         "end_header\n1 2 3 4\n");
    REQUIRE_THROWS_AS(load_ply((dir / "long_ascii.ply").string()), FormatError);
  }
  SECTION("unparseable ascii number") {
    spit(dir / "garbage_ascii.ply",
         "ply\nformat ascii 1.0\nelement vertex 1\n"
         "property float x\nproperty float y\nproperty float z\n"
         "end_header\n1 2 banana\n");
    REQUIRE_THROWS_AS(load_ply((dir / "garbage_ascii.ply").string()), FormatError);
  }
  SECTION("truncated and trailing binary payloads") {
    const PointCloud cloud = float_exact_cloud(14, 8, false);
    const fs::path good = dir / "payload_good.ply";
    save_ply(good.string(), cloud);
    const std::string bytes = slurp(good);
    spit(dir / "payload_short.ply", bytes.substr(0, bytes.size() - 5));
    REQUIRE_THROWS_AS(load_ply((dir / "payload_short.ply").string()), FormatError);
    spit(dir / "payload_long.ply", bytes + std::string(3, '\0'));
    REQUIRE_THROWS_AS(load_ply((dir / "payload_long.ply").string()), FormatError);
  }
  SECTION("non-finite coordinate in binary data") {
    const PointCloud cloud = float_exact_cloud(15, 4, false);
    const fs::path good = dir / "nan_src.ply";
    save_ply(good.string(), cloud);
    std::string bytes = slurp(good);
    const std::size_t header = bytes.find("end_header\n") + 11;
    // Overwrite the first float with a quiet NaN (0x7fc00000, little-endian).
    bytes[header + 0] = '\x00';
    bytes[header + 1] = '\x00';
    bytes[header + 2] = '\xc0';
    bytes[header + 3] = '\x7f';
    spit(dir / "nan_binary.ply", bytes);
    REQUIRE_THROWS_AS(load_ply((dir / "nan_binary.ply").string()), ValidationError);
  }
  SECTION("non-finite coordinate in ascii data") {
    spit(dir / "nan_ascii.ply",
         "ply\nformat ascii 1.0\nelement vertex 1\n"
         "property float x\nproperty float y\nproperty float z\n"
         "end_header\nnan 0 0\n");
    REQUIRE_THROWS_AS(load_ply((dir / "nan_ascii.ply").string()), ValidationError);
  }
  SECTION("non-unit normal") {
    spit(dir / "badnormal.ply",
         "ply\nformat ascii 1.0\nelement vertex 1\n"
         "property float x\nproperty float y\nproperty float z\n"
         "property float nx\nproperty float ny\nproperty float nz\n"
         "end_header\n0 0 0 0 0 0.5\n");
    REQUIRE_THROWS_AS(load_ply((dir / "badnormal.ply").string()), ValidationError);
  }
  SECTION("duplicate vertex element") {
    spit(dir / "dupvertex.ply",
         "ply\nformat ascii 1.0\nelement vertex 1\nelement vertex 1\n"
         "property float x\nproperty float y\nproperty float z\n"
         "end_header\n0 0 0\n");
    REQUIRE_THROWS_AS(load_ply((dir / "dupvertex.ply").string()), FormatError);
  }
  SECTION("implausible vertex count") {
    spit(dir / "huge.ply",
         "ply\nformat binary_little_endian 1.0\nelement vertex 99999999999\n"
         "property float x\nproperty float y\nproperty float z\nend_header\n");
    REQUIRE_THROWS_AS(load_ply((dir / "huge.ply").string()), FormatError);
  }
}

TEST_CASE("pose files hold sixteen numbers row-major", "[dataset]") {
  const fs::path dir = test_dir();

  SECTION("round trip is exact") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SplitMix64 rng(seed);
      const RigidTransform pose = testutil::random_transform(rng);
      const fs::path path = dir / ("pose_" + std::to_string(seed) + ".txt");
      save_pose(path.string(), pose);
      const RigidTransform loaded = load_pose(path.string());
      REQUIRE(loaded.rotation == pose.rotation);
      REQUIRE(loaded.translation == pose.translation);
    }
  }
  SECTION("hand-written identity with free-form whitespace") {
    spit(dir / "identity.txt", "1 0 0 0\n0 1 0   0\n0 0 1 0\n\n0 0 0\t1\n");
    const RigidTransform pose = load_pose((dir / "identity.txt").string());
    CHECK(pose.rotation == Mat3::Identity());
    CHECK(pose.translation == Vec3::Zero());
  }
  SECTION("translation column is the fourth column") {
    spit(dir / "trans.txt", "1 0 0 0.25\n0 1 0 -2\n0 0 1 0.5\n0 0 0 1\n");
    const RigidTransform pose = load_pose((dir / "trans.txt").string());
    CHECK(pose.translation == Vec3(0.25, -2.0, 0.5));
  }
  SECTION("missing file") {
    REQUIRE_THROWS_AS(load_pose((dir / "no_pose.txt").string()), NotFoundError);
  }
  SECTION("wrong number count") {
    spit(dir / "fifteen.txt", "1 0 0 0 0 1 0 0 0 0 1 0 0 0 0\n");
    REQUIRE_THROWS_AS(load_pose((dir / "fifteen.txt").string()), FormatError);
    spit(dir / "seventeen.txt", "1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 1 7\n");
    REQUIRE_THROWS_AS(load_pose((dir / "seventeen.txt").string()), FormatError);
  }
  SECTION("reflection is rejected") {
    spit(dir / "reflect.txt", "1 0 0 0\n0 1 0 0\n0 0 -1 0\n0 0 0 1\n");
    REQUIRE_THROWS_AS(load_pose((dir / "reflect.txt").string()), ValidationError);
  }
  SECTION("non-orthogonal rotation is rejected") {
    spit(dir / "skewed.txt", "1.001 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n");
    REQUIRE_THROWS_AS(load_pose((dir / "skewed.txt").string()), ValidationError);
  }
  SECTION("bad bottom row is rejected") {
    spit(dir / "bottom.txt", "1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 2\n");
    REQUIRE_THROWS_AS(load_pose((dir / "bottom.txt").string()), ValidationError);
  }
  SECTION("tiny orthogonality error within tolerance is accepted") {
    SplitMix64 rng(77);
    RigidTransform pose = testutil::random_transform(rng);
    pose.rotation(0, 0) += 1e-8;
    const fs::path path = dir / "nearly.txt";
    save_pose(path.string(), pose);
    const RigidTransform loaded = load_pose(path.string());
    CHECK(loaded.rotation == pose.rotation);
  }
}

TEST_CASE("scene bundles round trip through a directory", "[dataset]") {
  SynthConfig config;
  config.shape = SynthShape::composite;
  config.point_count = 300;
  config.partial_fraction = 0.8;
  config.noise_sigma = 0.002;
  config.rng_seed = 99;
  const ScenePair pair = synth_scene(config);

  const fs::path dir = test_dir() / "bundle_roundtrip";
  fs::remove_all(dir);
  save_scene(dir.string(), pair, "composite-99");

  REQUIRE(fs::exists(dir / "query.ply"));
  REQUIRE(fs::exists(dir / "target.ply"));
  REQUIRE(fs::exists(dir / "pose.txt"));
  REQUIRE(fs::exists(dir / "meta.json"));

  const ScenePair loaded = load_scene(dir.string());
  REQUIRE(loaded.query.size() == pair.query.size());
  REQUIRE(loaded.target.size() == pair.target.size());
  REQUIRE(loaded.gt_pose.has_value());
  // Poses are stored as shortest-round-trip doubles, so they reload exactly.
  CHECK(loaded.gt_pose->rotation == pair.gt_pose->rotation);
  CHECK(loaded.gt_pose->translation == pair.gt_pose->translation);
  CHECK(loaded.query_diameter == pair.query_diameter);
  // Clouds are stored as float32, so they reload at float precision.
  for (std::size_t i = 0; i < pair.query.size(); ++i) {
    REQUIRE(loaded.query.points[i].x() == through_float(pair.query.points[i].x()));
    REQUIRE(loaded.query.points[i].y() == through_float(pair.query.points[i].y()));
    REQUIRE(loaded.query.points[i].z() == through_float(pair.query.points[i].z()));
  }

  SECTION("missing target file") {
    fs::remove(dir / "target.ply");
    REQUIRE_THROWS_AS(load_scene(dir.string()), NotFoundError);
  }
  SECTION("missing pose file") {
    fs::remove(dir / "pose.txt");
    REQUIRE_THROWS_AS(load_scene(dir.string()), NotFoundError);
  }
  SECTION("meta.json is optional") {
    fs::remove(dir / "meta.json");
    const ScenePair again = load_scene(dir.string());
    CHECK(again.query_diameter == 1.0);
  }
  SECTION("malformed meta.json") {
    spit(dir / "meta.json", "{not json");
    REQUIRE_THROWS_AS(load_scene(dir.string()), FormatError);
  }
  SECTION("scene without ground truth cannot be saved") {
    ScenePair no_gt = pair;
    no_gt.gt_pose.reset();
    REQUIRE_THROWS_AS(save_scene((test_dir() / "no_gt").string(), no_gt),
                      ArgumentError);
  }
}

TEST_CASE("synthetic scenes are deterministic per seed", "[dataset]") {
  SynthConfig config;
  config.shape = SynthShape::composite;
  config.point_count = 500;
  config.partial_fraction = 0.7;
  config.noise_sigma = 0.01;
  config.rng_seed = 42;

  const ScenePair a = synth_scene(config);
  const ScenePair b = synth_scene(config);
  REQUIRE(clouds_identical(a.query, b.query));
  REQUIRE(clouds_identical(a.target, b.target));
  REQUIRE(a.gt_pose->rotation == b.gt_pose->rotation);
  REQUIRE(a.gt_pose->translation == b.gt_pose->translation);

  config.rng_seed = 43;
  const ScenePair c = synth_scene(config);
  CHECK_FALSE(clouds_identical(a.query, c.query));
  CHECK_FALSE(a.gt_pose->rotation == c.gt_pose->rotation);
}

TEST_CASE("noise-free full-coverage scene reproduces the transformed query",
          "[dataset]") {
  SynthConfig config;
  config.shape = SynthShape::sphere;
  config.point_count = 600;
  config.partial_fraction = 1.0;
  config.noise_sigma = 0.0;
  config.rng_seed = 7;

  const ScenePair pair = synth_scene(config);
  REQUIRE(pair.target.size() == pair.query.size());
  const PointCloud moved = apply(*pair.gt_pose, pair.query);
  REQUIRE(clouds_identical(pair.target, moved));

  // Correspondence transfer recovers the identity mapping with zero residuals.
  const CorrespondenceMap gamma = build_gamma(pair.query, pair.target, *pair.gt_pose);
  for (std::size_t i = 0; i < gamma.target_to_query.size(); ++i) {
    REQUIRE(gamma.target_to_query[i] == static_cast<int>(i));
    REQUIRE(gamma.residuals[i] == 0.0);
  }
}

TEST_CASE("half-space crop keeps the requested fraction", "[dataset]") {
  SynthConfig config;
  config.shape = SynthShape::sphere;
  config.point_count = 4000;
  config.partial_fraction = 0.5;
  config.noise_sigma = 0.0;
  config.rng_seed = 3;

  const ScenePair pair = synth_scene(config);
  CHECK(pair.target.size() == 2000);  // exactly round(0.5 * 4000)
  CHECK(pair.target.size() >= 1400);
  CHECK(pair.target.size() <= 2600);

  SECTION("kept points are the top-k along the crop stream's direction") {
    const PointCloud moved = apply(*pair.gt_pose, pair.query);
    SplitMix64 crop_rng = derive_stream(config.rng_seed, detail::kCropStream);
    const Vec3 direction = detail::random_unit_vector(crop_rng);
    std::vector<std::size_t> order(moved.size());
    for (std::size_t i = 0; i < moved.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double pa = direction.dot(moved.points[a]);
      const double pb = direction.dot(moved.points[b]);
      if (pa != pb) return pa > pb;
      return a < b;
    });
    order.resize(2000);
    std::sort(order.begin(), order.end());
    for (std::size_t j = 0; j < order.size(); ++j) {
      REQUIRE(pair.target.points[j] == moved.points[order[j]]);
      REQUIRE(pair.target.normals[j] == moved.normals[order[j]]);
    }
  }

  SECTION("crop that would keep fewer than 10 points fails") {
    SynthConfig tiny;
    tiny.point_count = 100;
    tiny.partial_fraction = 0.05;  // keeps 5
    REQUIRE_THROWS_AS(synth_scene(tiny), GenerationError);
  }
}

TEST_CASE("synthetic shapes lie on their analytic surfaces", "[dataset]") {
  SynthConfig config;
  config.point_count = 800;
  config.partial_fraction = 1.0;
  config.noise_sigma = 0.0;
  config.rng_seed = 21;

  SECTION("sphere") {
    config.shape = SynthShape::sphere;
    const ScenePair pair = synth_scene(config);
    REQUIRE(pair.query.size() == 800);
    for (std::size_t i = 0; i < pair.query.size(); ++i) {
      const Vec3& p = pair.query.points[i];
      REQUIRE(std::abs(p.norm() - 0.5) < 1e-12);
      REQUIRE((pair.query.normals[i] - p / p.norm()).norm() < 1e-9);
    }
  }
  SECTION("box") {
    config.shape = SynthShape::box;
    const ScenePair pair = synth_scene(config);
    const Vec3 half(0.35, 0.25, 0.15);
    for (std::size_t i = 0; i < pair.query.size(); ++i) {
      const Vec3& p = pair.query.points[i];
      const Vec3& n = pair.query.normals[i];
      // The normal is a signed axis and the matching coordinate is pinned to
      // the face; the other two stay inside the face rectangle.
      int axis = -1;
      for (int a = 0; a < 3; ++a) {
        if (n(a) != 0.0) {
          REQUIRE(axis == -1);
          axis = a;
          REQUIRE(std::abs(n(a)) == 1.0);
        }
      }
      REQUIRE(axis >= 0);
      REQUIRE(p(axis) == n(axis) * half(axis));
      for (int a = 0; a < 3; ++a) {
        REQUIRE(std::abs(p(a)) <= half(a) + 1e-12);
      }
    }
  }
  SECTION("cylinder") {
    config.shape = SynthShape::cylinder;
    const ScenePair pair = synth_scene(config);
    std::size_t side = 0, caps = 0;
    for (std::size_t i = 0; i < pair.query.size(); ++i) {
      const Vec3& p = pair.query.points[i];
      const Vec3& n = pair.query.normals[i];
      const double radial = std::hypot(p.x(), p.y());
      if (n.z() == 0.0) {
        ++side;
        REQUIRE(std::abs(radial - 0.2) < 1e-12);
        REQUIRE(std::abs(p.z()) <= 0.3 + 1e-12);
        REQUIRE((n - Vec3(p.x() / radial, p.y() / radial, 0.0)).norm() < 1e-9);
      } else {
        ++caps;
        REQUIRE(std::abs(std::abs(p.z()) - 0.3) < 1e-12);
        REQUIRE(radial <= 0.2 + 1e-12);
        REQUIRE(std::abs(n.z()) == 1.0);
      }
    }
    // Area split: side 2*pi*r*h = 0.754, caps 2*pi*r^2 = 0.251 -> ~75% side.
    CHECK(side > caps);
    CHECK(caps > 80);
  }
  SECTION("composite spans several sub-shapes") {
    config.shape = SynthShape::composite;
    config.point_count = 2000;
    const ScenePair pair = synth_scene(config);
    std::size_t near_big = 0, near_small = 0, near_rod = 0, near_slab = 0;
    for (const Vec3& p : pair.query.points) {
      if (std::abs((p - Vec3(-0.30, 0.0, 0.0)).norm() - 0.26) < 1e-9) ++near_big;
      if (std::abs((p - Vec3(0.32, 0.18, -0.10)).norm() - 0.13) < 1e-9) ++near_small;
      const double rod_radial = std::hypot(p.x() - 0.25, p.y() + 0.18);
      if (rod_radial < 0.08 + 1e-9 && std::abs(p.z() - 0.12) <= 0.225 + 1e-9) ++near_rod;
      const Vec3 d = p - Vec3(0.02, 0.02, -0.26);
      if (std::abs(d.x()) <= 0.22 + 1e-9 && std::abs(d.y()) <= 0.14 + 1e-9 &&
          std::abs(d.z()) <= 0.07 + 1e-9) {
        ++near_slab;
      }
    }
    // Every point lies on one of the four sub-surfaces, and each sub-shape
    // receives a meaningful share (areas: 0.85 / 0.21 / 0.27 / 0.45).
    CHECK(near_big + near_small + near_rod + near_slab >= pair.query.size());
    CHECK(near_big > 600);
    CHECK(near_small > 120);
    CHECK(near_rod > 150);
    CHECK(near_slab > 300);
  }
}

TEST_CASE("synthetic poses are uniform rigid transforms", "[dataset]") {
  SynthConfig config;
  config.shape = SynthShape::box;
  config.point_count = 50;
  config.partial_fraction = 1.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    config.rng_seed = seed;
    const ScenePair pair = synth_scene(config);
    REQUIRE(pair.gt_pose.has_value());
    REQUIRE(pair.gt_pose->is_rigid(1e-12));
    for (int a = 0; a < 3; ++a) {
      REQUIRE(pair.gt_pose->translation(a) >= -0.5);
      REQUIRE(pair.gt_pose->translation(a) <= 0.5);
    }
  }
}

TEST_CASE("noise stays within the advertised correspondence budget", "[dataset]") {
  SynthConfig config;
  config.shape = SynthShape::composite;
  config.point_count = 3000;
  config.partial_fraction = 0.7;
  config.noise_sigma = 0.01;
  config.rng_seed = 5;

  const ScenePair pair = synth_scene(config);
  REQUIRE(pair.target.size() == 2100);

  const CorrespondenceMap gamma = build_gamma(pair.query, pair.target, *pair.gt_pose);
  std::size_t within = 0;
  double sum_sq = 0.0;
  for (const double r : gamma.residuals) {
    if (r <= 3.0 * config.noise_sigma) ++within;
    sum_sq += r * r;
  }
  const double fraction = static_cast<double>(within) /
                          static_cast<double>(gamma.residuals.size());
  REQUIRE(fraction >= 0.99);
  // The RMS residual cannot exceed the RMS noise norm (nearest-neighbour
  // distance is bounded by the distance back to the true source point).
  CHECK(std::sqrt(sum_sq / static_cast<double>(gamma.residuals.size())) <=
        config.noise_sigma * 1.05);
}

TEST_CASE("synth config validation", "[dataset]") {
  SynthConfig config;
  config.point_count = 9;
  REQUIRE_THROWS_AS(synth_scene(config), ArgumentError);
  config.point_count = 100;
  config.partial_fraction = 0.0;
  REQUIRE_THROWS_AS(synth_scene(config), ArgumentError);
  config.partial_fraction = 1.0001;
  REQUIRE_THROWS_AS(synth_scene(config), ArgumentError);
  config.partial_fraction = 0.5;
  config.noise_sigma = -0.1;
  REQUIRE_THROWS_AS(synth_scene(config), ArgumentError);
  config.noise_sigma = 0.0;
  REQUIRE_NOTHROW(synth_scene(config));
}
