#pragma once

// Point-cloud file I/O (ASCII / binary-little-endian PLY), pose files, scene
// bundles on disk, and the seeded synthetic scene generator.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "distpose/error.hpp"
#include "distpose/geometry.hpp"
#include "distpose/preprocess.hpp"
#include "distpose/rng.hpp"

namespace distpose {

enum class PlyFormat { ascii, binary_little_endian };

enum class SynthShape { sphere, box, cylinder, composite };

struct SynthConfig {
  SynthShape shape = SynthShape::composite;
  int point_count = 4000;
  double partial_fraction = 0.6;
  double noise_sigma = 0.005;  // RMS of the 3D displacement norm
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (point_count < 10) throw ArgumentError("SynthConfig: point_count must be >= 10");
    if (!(partial_fraction > 0.0) || !(partial_fraction <= 1.0)) {
      throw ArgumentError("SynthConfig: partial_fraction must lie in (0, 1]");
    }
    if (!(noise_sigma >= 0.0)) {
      throw ArgumentError("SynthConfig: noise_sigma must be non-negative");
    }
  }
};

// On-disk layout of one scene: a directory with fixed file names.
struct SceneBundle {
  std::filesystem::path directory;
  std::string object_id = "object";
  std::string units = "model";

  std::filesystem::path query_path() const { return directory / "query.ply"; }
  std::filesystem::path target_path() const { return directory / "target.ply"; }
  std::filesystem::path pose_path() const { return directory / "pose.txt"; }
  std::filesystem::path meta_path() const { return directory / "meta.json"; }
};

namespace detail {

inline void append_float_text(std::string& out, float value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, res.ptr);
}

inline float parse_float_token(const std::string& token, const std::string& path) {
  float value = 0.0f;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    throw FormatError("load_ply: invalid number '" + token + "' in " + path);
  }
  return value;
}

inline void validate_loaded_cloud(const PointCloud& cloud, const std::string& path) {
  for (const Vec3& p : cloud.points) {
    if (!p.allFinite()) {
      throw ValidationError("load_ply: non-finite coordinate in " + path);
    }
  }
  for (const Vec3& n : cloud.normals) {
    if (!n.allFinite()) {
      throw ValidationError("load_ply: non-finite normal in " + path);
    }
    if (std::abs(n.norm() - 1.0) > 1e-6) {
      throw ValidationError("load_ply: normal is not unit length in " + path);
    }
  }
}

}  // namespace detail

inline void save_ply(const std::string& path, const PointCloud& cloud,
                     PlyFormat format = PlyFormat::binary_little_endian) {
  const bool with_normals = cloud.has_normals();
  std::string header = "ply\nformat ";
  header += (format == PlyFormat::ascii) ? "ascii" : "binary_little_endian";
  header += " 1.0\nelement vertex " + std::to_string(cloud.size()) + "\n";
  header += "property float x\nproperty float y\nproperty float z\n";
  if (with_normals) {
    header += "property float nx\nproperty float ny\nproperty float nz\n";
  }
  header += "end_header\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("save_ply: cannot open " + path + " for writing");
  out << header;

  if (format == PlyFormat::ascii) {
    std::string body;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3& p = cloud.points[i];
      detail::append_float_text(body, static_cast<float>(p.x()));
      body.push_back(' ');
      detail::append_float_text(body, static_cast<float>(p.y()));
      body.push_back(' ');
      detail::append_float_text(body, static_cast<float>(p.z()));
      if (with_normals) {
        const Vec3& n = cloud.normals[i];
        for (const double v : {n.x(), n.y(), n.z()}) {
          body.push_back(' ');
          detail::append_float_text(body, static_cast<float>(v));
        }
      }
      body.push_back('\n');
    }
    out << body;
  } else {
    std::string body;
    body.reserve(cloud.size() * (with_normals ? 24 : 12));
    const auto append = [&body](double v) {
      const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      body.push_back(static_cast<char>(bits & 0xffu));
      body.push_back(static_cast<char>((bits >> 8) & 0xffu));
      body.push_back(static_cast<char>((bits >> 16) & 0xffu));
      body.push_back(static_cast<char>((bits >> 24) & 0xffu));
    };
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      append(cloud.points[i].x());
      append(cloud.points[i].y());
      append(cloud.points[i].z());
      if (with_normals) {
        append(cloud.normals[i].x());
        append(cloud.normals[i].y());
        append(cloud.normals[i].z());
      }
    }
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
  }
  out.flush();
  if (!out) throw StorageError("save_ply: I/O failure writing " + path);
}

inline PointCloud load_ply(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw NotFoundError("load_ply: no such file: " + path);
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("load_ply: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  // ---- header ----
  std::size_t cursor = 0;
  const auto next_line = [&]() {
    const std::size_t end = bytes.find('\n', cursor);
    if (end == std::string::npos) {
      throw FormatError("load_ply: unterminated header in " + path);
    }
    std::string line = bytes.substr(cursor, end - cursor);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    cursor = end + 1;
    return line;
  };

  if (next_line() != "ply") throw FormatError("load_ply: missing 'ply' magic in " + path);
  const std::string format_line = next_line();
  PlyFormat format;
  if (format_line == "format ascii 1.0") {
    format = PlyFormat::ascii;
  } else if (format_line == "format binary_little_endian 1.0") {
    format = PlyFormat::binary_little_endian;
  } else {
    throw FormatError("load_ply: unsupported format line '" + format_line + "' in " + path);
  }

  long vertex_count = -1;
  std::vector<std::string> properties;
  bool in_vertex_element = false;
  while (true) {
    const std::string line = next_line();
    if (line == "end_header") break;
    std::istringstream words(line);
    std::string word;
    words >> word;
    if (word == "comment" || word.empty()) continue;
    if (word == "element") {
      std::string name;
      long count = 0;
      words >> name >> count;
      if (name == "vertex") {
        if (vertex_count >= 0) {
          throw FormatError("load_ply: duplicate vertex element in " + path);
        }
        vertex_count = count;
        in_vertex_element = true;
      } else {
        throw FormatError("load_ply: unsupported element '" + name + "' in " + path);
      }
      continue;
    }
    if (word == "property") {
      std::string type, name;
      words >> type >> name;
      if (!in_vertex_element) {
        throw FormatError("load_ply: property outside vertex element in " + path);
      }
      if (type != "float" && type != "float32") {
        throw FormatError("load_ply: unsupported property type '" + type + "' in " + path);
      }
      properties.push_back(name);
      continue;
    }
    throw FormatError("load_ply: unexpected header line '" + line + "' in " + path);
  }

  if (vertex_count < 0) throw FormatError("load_ply: no vertex element in " + path);
  if (vertex_count > 100'000'000) {
    throw FormatError("load_ply: implausible vertex count in " + path);
  }
  const std::vector<std::string> plain = {"x", "y", "z"};
  const std::vector<std::string> with_normals = {"x", "y", "z", "nx", "ny", "nz"};
  bool has_normals;
  if (properties == plain) {
    has_normals = false;
  } else if (properties == with_normals) {
    has_normals = true;
  } else {
    throw FormatError("load_ply: unsupported vertex property layout in " + path);
  }
  const std::size_t values_per_vertex = has_normals ? 6 : 3;

  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(vertex_count));
  if (has_normals) cloud.normals.reserve(static_cast<std::size_t>(vertex_count));

  if (format == PlyFormat::ascii) {
    std::istringstream body(bytes.substr(cursor));
    std::vector<float> row(values_per_vertex);
    for (long i = 0; i < vertex_count; ++i) {
      for (std::size_t k = 0; k < values_per_vertex; ++k) {
        std::string token;
        if (!(body >> token)) {
          throw FormatError("load_ply: truncated vertex data in " + path);
        }
        row[k] = detail::parse_float_token(token, path);
      }
      cloud.points.emplace_back(row[0], row[1], row[2]);
      if (has_normals) cloud.normals.emplace_back(row[3], row[4], row[5]);
    }
    std::string trailing;
    if (body >> trailing) {
      throw FormatError("load_ply: trailing vertex data in " + path);
    }
  } else {
    const std::size_t payload = bytes.size() - cursor;
    const std::size_t expected =
        static_cast<std::size_t>(vertex_count) * values_per_vertex * 4;
    if (payload < expected) throw FormatError("load_ply: truncated payload in " + path);
    if (payload > expected) throw FormatError("load_ply: trailing bytes in " + path);
    const unsigned char* raw = reinterpret_cast<const unsigned char*>(bytes.data()) + cursor;
    const auto take = [&raw]() {
      const std::uint32_t bits = static_cast<std::uint32_t>(raw[0]) |
                                 (static_cast<std::uint32_t>(raw[1]) << 8) |
                                 (static_cast<std::uint32_t>(raw[2]) << 16) |
                                 (static_cast<std::uint32_t>(raw[3]) << 24);
      raw += 4;
      return static_cast<double>(std::bit_cast<float>(bits));
    };
    for (long i = 0; i < vertex_count; ++i) {
      const double x = take(), y = take(), z = take();
      cloud.points.emplace_back(x, y, z);
      if (has_normals) {
        const double nx = take(), ny = take(), nz = take();
        cloud.normals.emplace_back(nx, ny, nz);
      }
    }
  }

  detail::validate_loaded_cloud(cloud, path);
  return cloud;
}

// Pose files hold 16 whitespace-separated numbers: a row-major 4x4 rigid
// transform whose rotation block must be in SO(3) within 1e-6.
inline void save_pose(const std::string& path, const RigidTransform& pose) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw StorageError("save_pose: cannot open " + path + " for writing");
  const Eigen::Matrix4d m = pose.matrix();
  char buf[64];
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), m(r, c));
      out.write(buf, res.ptr - buf);
      out.put(c == 3 ? '\n' : ' ');
    }
  }
  if (!out) throw StorageError("save_pose: I/O failure writing " + path);
}

inline RigidTransform load_pose(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw NotFoundError("load_pose: no such file: " + path);
  }
  std::ifstream in(path);
  if (!in) throw StorageError("load_pose: cannot open " + path);
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      if (!(in >> m(r, c))) {
        throw FormatError("load_pose: expected 16 numbers in " + path);
      }
    }
  }
  double extra;
  if (in >> extra) throw FormatError("load_pose: trailing numbers in " + path);
  if (!m.allFinite()) throw ValidationError("load_pose: non-finite entries in " + path);
  if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).norm() > 1e-9) {
    throw ValidationError("load_pose: bottom row must be 0 0 0 1 in " + path);
  }
  RigidTransform pose;
  pose.rotation = m.topLeftCorner<3, 3>();
  pose.translation = m.topRightCorner<3, 1>();
  if (!pose.is_rigid(1e-6)) {
    throw ValidationError("load_pose: rotation block is not in SO(3) in " + path);
  }
  return pose;
}

inline void save_scene(const std::string& dir, const ScenePair& pair,
                       const std::string& object_id = "object") {
  if (!pair.gt_pose.has_value()) {
    throw ArgumentError("save_scene: scene pair has no ground-truth pose");
  }
  SceneBundle bundle;
  bundle.directory = dir;
  bundle.object_id = object_id;
  std::filesystem::create_directories(bundle.directory);
  save_ply(bundle.query_path().string(), pair.query);
  save_ply(bundle.target_path().string(), pair.target);
  save_pose(bundle.pose_path().string(), *pair.gt_pose);
  nlohmann::json meta = {{"object_id", bundle.object_id},
                         {"units", bundle.units},
                         {"query_diameter", pair.query_diameter}};
  std::ofstream out(bundle.meta_path(), std::ios::trunc);
  if (!out) throw StorageError("save_scene: cannot write " + bundle.meta_path().string());
  out << meta.dump(2) << "\n";
}

inline ScenePair load_scene(const std::string& dir) {
  SceneBundle bundle;
  bundle.directory = dir;
  for (const auto& p : {bundle.query_path(), bundle.target_path(), bundle.pose_path()}) {
    if (!std::filesystem::exists(p)) {
      throw NotFoundError("load_scene: missing " + p.string());
    }
  }
  ScenePair pair;
  pair.query = load_ply(bundle.query_path().string());
  pair.target = load_ply(bundle.target_path().string());
  pair.gt_pose = load_pose(bundle.pose_path().string());
  if (std::filesystem::exists(bundle.meta_path())) {
    std::ifstream in(bundle.meta_path());
    nlohmann::json meta;
    try {
      in >> meta;
      pair.query_diameter = meta.value("query_diameter", 1.0);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("load_scene: invalid meta.json in " + dir + ": " + e.what());
    }
  }
  return pair;
}

namespace detail {

inline constexpr std::uint64_t kSurfaceStream = 0x73757266;
inline constexpr std::uint64_t kPoseStream = 0x706f7365;
inline constexpr std::uint64_t kCropStream = 0x63726f70;
inline constexpr std::uint64_t kNoiseStream = 0x6e6f6973;

inline Vec3 random_unit_vector(SplitMix64& rng) {
  Vec3 v;
  do {
    v = Vec3(rng.normal(), rng.normal(), rng.normal());
  } while (v.norm() == 0.0);
  return v.normalized();
}

struct SurfaceSample {
  Vec3 point;
  Vec3 normal;
};

struct SphereSpec {
  Vec3 center;
  double radius;
  double area() const { return 4.0 * std::numbers::pi * radius * radius; }
  SurfaceSample sample(SplitMix64& rng) const {
    const Vec3 dir = random_unit_vector(rng);
    return {center + radius * dir, dir};
  }
};

struct BoxSpec {
  Vec3 center;
  Vec3 half;  // half-extents
  double area() const {
    return 8.0 * (half.y() * half.z() + half.x() * half.z() + half.x() * half.y());
  }
  SurfaceSample sample(SplitMix64& rng) const {
    const double faces[3] = {4.0 * half.y() * half.z(), 4.0 * half.x() * half.z(),
                             4.0 * half.x() * half.y()};
    const double pick = rng.uniform(0.0, 2.0 * (faces[0] + faces[1] + faces[2]));
    int axis = 2;
    double sign = -1.0;
    double acc = 0.0;
    bool chosen = false;
    for (int a = 0; a < 3 && !chosen; ++a) {
      for (const double s : {1.0, -1.0}) {
        acc += faces[a];
        if (pick < acc) {
          axis = a;
          sign = s;
          chosen = true;
          break;
        }
      }
    }
    const int u_axis = (axis + 1) % 3;
    const int v_axis = (axis + 2) % 3;
    Vec3 p = center;
    p(axis) += sign * half(axis);
    p(u_axis) += rng.uniform(-half(u_axis), half(u_axis));
    p(v_axis) += rng.uniform(-half(v_axis), half(v_axis));
    Vec3 n = Vec3::Zero();
    n(axis) = sign;
    return {p, n};
  }
};

struct CylinderSpec {
  Vec3 center;  // axis along z
  double radius;
  double height;
  double side_area() const { return 2.0 * std::numbers::pi * radius * height; }
  double cap_area() const { return std::numbers::pi * radius * radius; }
  double area() const { return side_area() + 2.0 * cap_area(); }
  SurfaceSample sample(SplitMix64& rng) const {
    const double pick = rng.uniform(0.0, area());
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double c = std::cos(phi), s = std::sin(phi);
    if (pick < side_area()) {
      const double z = rng.uniform(-0.5 * height, 0.5 * height);
      return {center + Vec3(radius * c, radius * s, z), Vec3(c, s, 0.0)};
    }
    const double sign = (pick < side_area() + cap_area()) ? 1.0 : -1.0;
    const double rho = radius * std::sqrt(rng.uniform());
    return {center + Vec3(rho * c, rho * s, sign * 0.5 * height), Vec3(0, 0, sign)};
  }
};

// The composite shape is deliberately asymmetric (no rotation maps it onto
// itself), with a mix of curvatures so local geometry descriptors can tell
// its regions apart.
struct CompositeSpec {
  SphereSpec big{Vec3(-0.30, 0.0, 0.0), 0.26};
  SphereSpec small{Vec3(0.32, 0.18, -0.10), 0.13};
  CylinderSpec rod{Vec3(0.25, -0.18, 0.12), 0.08, 0.45};
  BoxSpec slab{Vec3(0.02, 0.02, -0.26), Vec3(0.22, 0.14, 0.07)};

  SurfaceSample sample(SplitMix64& rng) const {
    const double a0 = big.area(), a1 = small.area(), a2 = rod.area(), a3 = slab.area();
    const double pick = rng.uniform(0.0, a0 + a1 + a2 + a3);
    if (pick < a0) return big.sample(rng);
    if (pick < a0 + a1) return small.sample(rng);
    if (pick < a0 + a1 + a2) return rod.sample(rng);
    return slab.sample(rng);
  }
};

inline PointCloud sample_shape_surface(SynthShape shape, int count, SplitMix64& rng) {
  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(count));
  cloud.normals.reserve(static_cast<std::size_t>(count));
  const SphereSpec sphere{Vec3::Zero(), 0.5};
  const BoxSpec box{Vec3::Zero(), Vec3(0.35, 0.25, 0.15)};
  const CylinderSpec cylinder{Vec3::Zero(), 0.2, 0.6};
  const CompositeSpec composite;
  for (int i = 0; i < count; ++i) {
    SurfaceSample s;
    switch (shape) {
      case SynthShape::sphere:
        s = sphere.sample(rng);
        break;
      case SynthShape::box:
        s = box.sample(rng);
        break;
      case SynthShape::cylinder:
        s = cylinder.sample(rng);
        break;
      case SynthShape::composite:
        s = composite.sample(rng);
        break;
    }
    cloud.points.push_back(s.point);
    cloud.normals.push_back(s.normal);
  }
  return cloud;
}

}  // namespace detail

// Generates one synthetic scene: query points on the configured surface, a
// uniform random pose, a half-space crop of the transformed cloud keeping
// round(partial_fraction * point_count) points, and Gaussian noise whose RMS
// displacement norm is noise_sigma.
inline ScenePair synth_scene(const SynthConfig& config) {
  config.validate();

  SplitMix64 surface_rng = derive_stream(config.rng_seed, detail::kSurfaceStream);
  SplitMix64 pose_rng = derive_stream(config.rng_seed, detail::kPoseStream);
  SplitMix64 crop_rng = derive_stream(config.rng_seed, detail::kCropStream);
  SplitMix64 noise_rng = derive_stream(config.rng_seed, detail::kNoiseStream);

  ScenePair pair;
  pair.query = detail::sample_shape_surface(config.shape, config.point_count, surface_rng);

  RigidTransform gt;
  Eigen::Vector4d q;
  do {
    q = Eigen::Vector4d(pose_rng.normal(), pose_rng.normal(), pose_rng.normal(),
                        pose_rng.normal());
  } while (q.norm() == 0.0);
  q.normalize();
  gt.rotation = Eigen::Quaterniond(q(0), q(1), q(2), q(3)).toRotationMatrix();
  gt.translation = Vec3(pose_rng.uniform(-0.5, 0.5), pose_rng.uniform(-0.5, 0.5),
                        pose_rng.uniform(-0.5, 0.5));
  pair.gt_pose = gt;

  const PointCloud moved = apply(gt, pair.query);

  // Half-space crop: keep the k points with the largest projection onto a
  // random direction — the quantile offset retains the requested fraction
  // exactly, so a too-small k is a configuration problem, not bad luck.
  const long k = std::llround(config.partial_fraction * config.point_count);
  if (k < 10) {
    throw GenerationError("synth_scene: crop would keep " + std::to_string(k) +
                          " points; need at least 10");
  }
  const Vec3 direction = detail::random_unit_vector(crop_rng);
  std::vector<std::size_t> order(moved.size());
  for (std::size_t i = 0; i < moved.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double pa = direction.dot(moved.points[a]);
    const double pb = direction.dot(moved.points[b]);
    if (pa != pb) return pa > pb;
    return a < b;
  });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());

  pair.target.points.reserve(order.size());
  pair.target.normals.reserve(order.size());
  for (const std::size_t i : order) {
    pair.target.points.push_back(moved.points[i]);
    pair.target.normals.push_back(moved.normals[i]);
  }

  if (config.noise_sigma > 0.0) {
    const double per_coord = config.noise_sigma / std::sqrt(3.0);
    for (Vec3& p : pair.target.points) {
      p.x() += per_coord * noise_rng.normal();
      p.y() += per_coord * noise_rng.normal();
      p.z() += per_coord * noise_rng.normal();
    }
  }
  return pair;
}

}  // namespace distpose
