#pragma once

// Query-only feature cache: a fixed little-endian binary file format for
// descriptor matrices (optionally with point coordinates), a human-readable
// JSON manifest with content checksums, and storage accounting helpers.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "distpose/descriptors.hpp"
#include "distpose/error.hpp"
#include "distpose/geometry.hpp"

namespace distpose {

inline constexpr char kCacheMagic[4] = {'D', 'G', 'D', 'F'};
inline constexpr std::uint32_t kCacheVersion = 1;
inline constexpr std::uint32_t kCacheFlagCoords = 1u;
inline constexpr std::size_t kCacheHeaderBytes = 20;

namespace detail {

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t fnv1a64(const unsigned char* data, std::size_t size) {
  std::uint64_t hash = kFnvOffset;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= static_cast<std::uint64_t>(data[i]);
    hash *= kFnvPrime;
  }
  return hash;
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
  return fnv1a64(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
}

inline void append_u32_le(std::string& out, std::uint32_t value) {
  out.push_back(static_cast<char>(value & 0xffu));
  out.push_back(static_cast<char>((value >> 8) & 0xffu));
  out.push_back(static_cast<char>((value >> 16) & 0xffu));
  out.push_back(static_cast<char>((value >> 24) & 0xffu));
}

inline void append_f32_le(std::string& out, float value) {
  append_u32_le(out, std::bit_cast<std::uint32_t>(value));
}

inline std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline float read_f32_le(const unsigned char* p) {
  return std::bit_cast<float>(read_u32_le(p));
}

inline std::string checksum_hex(std::uint64_t checksum) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[checksum & 0xfu];
    checksum >>= 4;
  }
  return out;
}

inline std::uint64_t checksum_from_hex(const std::string& hex) {
  if (hex.size() != 16) throw FormatError("manifest: checksum must be 16 hex digits");
  std::uint64_t value = 0;
  for (const char c : hex) {
    value <<= 4;
    if (c >= '0' && c <= '9') {
      value |= static_cast<std::uint64_t>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      value |= static_cast<std::uint64_t>(c - 'a' + 10);
    } else {
      throw FormatError("manifest: invalid checksum digit");
    }
  }
  return value;
}

}  // namespace detail

// Writes header + row-major float32 payload (features, then coordinates when
// present) and returns the FNV-1a checksum of the payload bytes.
inline std::uint64_t write_cache(const std::string& path, const DescriptorSet& features,
                                 const PointCloud* coords = nullptr) {
  const int rows = features.rows();
  const int dim = features.dim();
  if (rows == 0 || dim == 0) throw EmptyInputError("write_cache: empty descriptor set");
  if (coords != nullptr && coords->size() != static_cast<std::size_t>(rows)) {
    throw ArgumentError("write_cache: coordinate count " +
                        std::to_string(coords->size()) + " does not match row count " +
                        std::to_string(rows));
  }

  std::string payload;
  payload.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(dim) * 4 +
                  (coords != nullptr ? static_cast<std::size_t>(rows) * 12 : 0));
  for (int i = 0; i < rows; ++i) {
    for (int c = 0; c < dim; ++c) {
      detail::append_f32_le(payload, static_cast<float>(features.vectors(i, c)));
    }
  }
  if (coords != nullptr) {
    for (const Vec3& p : coords->points) {
      detail::append_f32_le(payload, static_cast<float>(p.x()));
      detail::append_f32_le(payload, static_cast<float>(p.y()));
      detail::append_f32_le(payload, static_cast<float>(p.z()));
    }
  }

  std::string header;
  header.reserve(kCacheHeaderBytes);
  header.append(kCacheMagic, 4);
  detail::append_u32_le(header, kCacheVersion);
  detail::append_u32_le(header, static_cast<std::uint32_t>(rows));
  detail::append_u32_le(header, static_cast<std::uint32_t>(dim));
  detail::append_u32_le(header, coords != nullptr ? kCacheFlagCoords : 0u);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("write_cache: cannot open " + path + " for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  out.flush();
  if (!out) throw StorageError("write_cache: I/O failure writing " + path);
  return detail::fnv1a64(payload);
}

struct CacheContents {
  DescriptorSet features;
  std::optional<PointCloud> coords;
  std::uint64_t checksum = 0;
};

// Parses a cache file. A non-negative expected_dim must match the stored
// dimension; a supplied checksum must match the payload.
inline CacheContents read_cache(
    const std::string& path, int expected_dim = -1,
    const std::optional<std::uint64_t>& expected_checksum = std::nullopt) {
  if (!std::filesystem::exists(path)) {
    throw NotFoundError("read_cache: no such file: " + path);
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("read_cache: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < kCacheHeaderBytes) {
    throw FormatError("read_cache: truncated header in " + path);
  }
  const unsigned char* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  if (!std::equal(kCacheMagic, kCacheMagic + 4, bytes.data())) {
    throw FormatError("read_cache: bad magic in " + path);
  }
  const std::uint32_t version = detail::read_u32_le(raw + 4);
  const std::uint32_t point_count = detail::read_u32_le(raw + 8);
  const std::uint32_t dim = detail::read_u32_le(raw + 12);
  const std::uint32_t flags = detail::read_u32_le(raw + 16);
  if (version != kCacheVersion) {
    throw FormatError("read_cache: unsupported version " + std::to_string(version));
  }
  if (point_count == 0 || dim == 0) {
    throw FormatError("read_cache: zero point count or dimension in " + path);
  }
  if ((flags & ~kCacheFlagCoords) != 0) {
    throw FormatError("read_cache: unknown flags in " + path);
  }
  if (expected_dim >= 0 && dim != static_cast<std::uint32_t>(expected_dim)) {
    throw FormatError("read_cache: dimension mismatch: file has " + std::to_string(dim) +
                      ", expected " + std::to_string(expected_dim));
  }
  const bool has_coords = (flags & kCacheFlagCoords) != 0;
  const std::size_t feature_bytes =
      static_cast<std::size_t>(point_count) * static_cast<std::size_t>(dim) * 4;
  const std::size_t coord_bytes = has_coords ? static_cast<std::size_t>(point_count) * 12 : 0;
  const std::size_t expected_size = kCacheHeaderBytes + feature_bytes + coord_bytes;
  if (bytes.size() < expected_size) {
    throw FormatError("read_cache: truncated payload in " + path);
  }
  if (bytes.size() > expected_size) {
    throw FormatError("read_cache: trailing bytes in " + path);
  }

  const std::uint64_t checksum =
      detail::fnv1a64(raw + kCacheHeaderBytes, bytes.size() - kCacheHeaderBytes);
  if (expected_checksum.has_value() && checksum != *expected_checksum) {
    throw CorruptionError("read_cache: checksum mismatch in " + path);
  }

  CacheContents contents;
  contents.checksum = checksum;
  contents.features.source = DescriptorSource::precomputed;
  contents.features.vectors.resize(static_cast<Eigen::Index>(point_count),
                                   static_cast<Eigen::Index>(dim));
  const unsigned char* cursor = raw + kCacheHeaderBytes;
  for (std::uint32_t i = 0; i < point_count; ++i) {
    for (std::uint32_t c = 0; c < dim; ++c) {
      contents.features.vectors(static_cast<Eigen::Index>(i),
                                static_cast<Eigen::Index>(c)) =
          static_cast<double>(detail::read_f32_le(cursor));
      cursor += 4;
    }
  }
  if (has_coords) {
    PointCloud cloud;
    cloud.points.reserve(point_count);
    for (std::uint32_t i = 0; i < point_count; ++i) {
      const double x = static_cast<double>(detail::read_f32_le(cursor));
      const double y = static_cast<double>(detail::read_f32_le(cursor + 4));
      const double z = static_cast<double>(detail::read_f32_le(cursor + 8));
      cursor += 12;
      cloud.points.emplace_back(x, y, z);
    }
    contents.coords = std::move(cloud);
  }
  return contents;
}

// Descriptor-loading surface used by pipelines that consume precomputed
// features instead of running an extractor.
inline DescriptorSet load_precomputed(const std::string& path, int expected_dim) {
  return read_cache(path, expected_dim).features;
}

struct CacheEntry {
  std::string path;
  int dim = 0;
  int point_count = 0;
  double query_diameter = 1.0;
  std::uint64_t checksum = 0;

  bool operator==(const CacheEntry&) const = default;
};

struct CacheManifest {
  std::map<std::string, CacheEntry> entries;  // object id -> cache entry

  bool operator==(const CacheManifest&) const = default;
};

inline void save_manifest(const std::string& path, const CacheManifest& manifest) {
  nlohmann::json doc;
  doc["version"] = 1;
  doc["entries"] = nlohmann::json::object();
  for (const auto& [id, entry] : manifest.entries) {
    doc["entries"][id] = {{"path", entry.path},
                          {"dim", entry.dim},
                          {"point_count", entry.point_count},
                          {"query_diameter", entry.query_diameter},
                          {"checksum", detail::checksum_hex(entry.checksum)}};
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw StorageError("save_manifest: cannot open " + path + " for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw StorageError("save_manifest: I/O failure writing " + path);
}

inline CacheManifest load_manifest(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw NotFoundError("load_manifest: no such file: " + path);
  }
  std::ifstream in(path);
  if (!in) throw StorageError("load_manifest: cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("load_manifest: invalid JSON in " + path + ": " + e.what());
  }
  CacheManifest manifest;
  try {
    if (doc.at("version").get<int>() != 1) {
      throw FormatError("load_manifest: unsupported manifest version");
    }
    for (const auto& [id, body] : doc.at("entries").items()) {
      CacheEntry entry;
      entry.path = body.at("path").get<std::string>();
      entry.dim = body.at("dim").get<int>();
      entry.point_count = body.at("point_count").get<int>();
      entry.query_diameter = body.at("query_diameter").get<double>();
      entry.checksum = detail::checksum_from_hex(body.at("checksum").get<std::string>());
      manifest.entries.emplace(id, std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("load_manifest: missing or mistyped field in " + path + ": " +
                      e.what());
  }
  return manifest;
}

// Loads one object's features through the manifest, enforcing the declared
// dimension and content checksum.
inline CacheContents load_from_manifest(const CacheManifest& manifest,
                                        const std::string& object_id) {
  const auto it = manifest.entries.find(object_id);
  if (it == manifest.entries.end()) {
    throw NotFoundError("load_from_manifest: no entry for object '" + object_id + "'");
  }
  return read_cache(it->second.path, it->second.dim, it->second.checksum);
}

struct StorageReport {
  std::uint64_t query_only_bytes = 0;
  std::uint64_t full_bytes = 0;
  double reduction_ratio = 1.0;
};

// Ratio of two measured byte totals (how much larger full storage is than the
// query-only cache).
inline double storage_ratio(double full_bytes, double query_only_bytes) {
  if (!(full_bytes > 0.0) || !(query_only_bytes > 0.0)) {
    throw ArgumentError("storage_ratio: byte totals must be positive");
  }
  return full_bytes / query_only_bytes;
}

// Byte totals for caching query features only versus features for every
// query object and target instance.
inline StorageReport storage_report(std::uint64_t num_query_objects,
                                    std::uint64_t num_target_instances,
                                    std::uint64_t points_per_cloud, std::uint64_t dim,
                                    std::uint64_t bytes_per_scalar) {
  if (num_query_objects == 0 || points_per_cloud == 0 || dim == 0 ||
      bytes_per_scalar == 0) {
    throw ArgumentError("storage_report: counts must be positive");
  }
  const double per_cloud = static_cast<double>(points_per_cloud) *
                           static_cast<double>(dim) *
                           static_cast<double>(bytes_per_scalar);
  const double query_only = static_cast<double>(num_query_objects) * per_cloud;
  const double full =
      (static_cast<double>(num_query_objects) + static_cast<double>(num_target_instances)) *
      per_cloud;
  if (full >= 1.8e19) throw ArgumentError("storage_report: byte totals overflow");

  StorageReport report;
  report.query_only_bytes =
      num_query_objects * points_per_cloud * dim * bytes_per_scalar;
  report.full_bytes =
      (num_query_objects + num_target_instances) * points_per_cloud * dim * bytes_per_scalar;
  report.reduction_ratio = storage_ratio(full, query_only);
  return report;
}

}  // namespace distpose
