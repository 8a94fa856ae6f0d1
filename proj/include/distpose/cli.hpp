#pragma once

// Command-line front end: wires the pipeline end-to-end and emits
// machine-readable JSON reports (schema documented in docs/report_schema.md).
//
// Subcommands: synth, preprocess, extract, cache, transfer, match, eval,
// report, storage-report. Exit codes: 0 success, 1 any scene failure (the
// per-scene status is in the report), 2 usage error.
//
// Every command is a pure function of (inputs, flags, seed): reruns produce
// identical reports except for the wall-clock fields, which all live under
// object keys named "timings".

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "distpose/augment.hpp"
#include "distpose/correspondence.hpp"
#include "distpose/dataset.hpp"
#include "distpose/descriptors.hpp"
#include "distpose/error.hpp"
#include "distpose/geometry.hpp"
#include "distpose/loss.hpp"
#include "distpose/metrics.hpp"
#include "distpose/preprocess.hpp"
#include "distpose/registration.hpp"
#include "distpose/rng.hpp"
#include "distpose/store.hpp"

namespace distpose::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kReportVersion = 1;

namespace detail {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Small shared helpers

inline std::string double_text(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Removes every object member named "timings", recursively. Reports compared
// across reruns must be identical after this pass.
inline void strip_timings(json& j) {
  if (j.is_object()) {
    j.erase("timings");
    for (auto& [key, value] : j.items()) strip_timings(value);
  } else if (j.is_array()) {
    for (auto& value : j) strip_timings(value);
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw StorageError("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw StorageError("I/O failure writing " + path);
}

inline json read_json_file(const std::string& path) {
  if (!fs::exists(path)) throw NotFoundError("no such file: " + path);
  std::ifstream in(path);
  if (!in) throw StorageError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

inline json report_envelope(const std::string& command, const json& config) {
  json j;
  j["command"] = command;
  j["tool_version"] = kToolVersion;
  j["report_version"] = kReportVersion;
  j["config"] = config;
  return j;
}

// Emits the report to stdout and, when requested, to a file.
inline void deliver_report(const json& report, const std::string& report_path) {
  if (!report_path.empty()) write_json_file(report_path, report);
  std::cout << report.dump(2) << "\n";
}

inline bool any_row_failed(const json& rows) {
  for (const auto& row : rows) {
    if (row.value("status", "ok") != "ok") return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Scene discovery and per-scene seeding

struct SceneRef {
  std::string id;
  fs::path dir;
};

inline std::vector<SceneRef> discover_scenes(const std::string& root) {
  if (!fs::exists(root)) throw NotFoundError("scene directory not found: " + root);
  std::vector<SceneRef> out;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "query.ply")) {
      out.push_back({entry.path().filename().string(), entry.path()});
    }
  }
  if (out.empty()) throw NotFoundError("no scene bundles under " + root);
  std::sort(out.begin(), out.end(),
            [](const SceneRef& a, const SceneRef& b) { return a.id < b.id; });
  return out;
}

inline constexpr std::uint64_t kStagePreprocess = 1;
inline constexpr std::uint64_t kStageRansac = 2;

// Deterministic per-scene, per-stage seed independent of scene order.
inline std::uint64_t scene_seed(std::uint64_t base, const std::string& scene_id,
                                std::uint64_t stage) {
  const std::uint64_t id_hash = distpose::detail::fnv1a64(scene_id);
  return derive_stream(derive_stream(base, id_hash).next(), stage).next();
}

// Runs fn(0..count-1), either inline or on `jobs` worker threads. fn must not
// throw; per-scene failures are captured in the row status instead.
template <typename Fn>
inline void for_each_index(int jobs, std::size_t count, Fn&& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        fn(i);
      }
    });
  }
  for (std::thread& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Pose <-> JSON (16 numbers, row-major 4x4, same convention as pose files)

inline json pose_to_json(const RigidTransform& pose) {
  const Eigen::Matrix4d m = pose.matrix();
  json a = json::array();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) a.push_back(m(r, c));
  }
  return a;
}

inline RigidTransform pose_from_json(const json& a) {
  if (!a.is_array() || a.size() != 16) {
    throw FormatError("pose must be an array of 16 numbers");
  }
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) m(r, c) = a.at(static_cast<std::size_t>(4 * r + c)).get<double>();
  }
  if (!m.allFinite()) throw ValidationError("pose has non-finite entries");
  if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).norm() > 1e-9) {
    throw ValidationError("pose bottom row must be 0 0 0 1");
  }
  RigidTransform pose;
  pose.rotation = m.topLeftCorner<3, 3>();
  pose.translation = m.topRightCorner<3, 1>();
  if (!pose.is_rigid(1e-6)) throw ValidationError("pose rotation is not in SO(3)");
  return pose;
}

// ---------------------------------------------------------------------------
// Shared scene-data loading for match/eval: either recompute the preprocessed
// clouds and toy descriptors, or pull both from a feature cache.

struct SceneData {
  PointCloud query;
  PointCloud target;
  DescriptorSet query_features;
  DescriptorSet target_features;
  RigidTransform gt;          // in the same normalized frame as the clouds
  double original_diameter = 1.0;
  double extract_seconds = 0.0;
};

struct PipelineOptions {
  std::string cache_dir;  // empty -> recompute features inline
  double radius = 0.3;
  std::size_t points = 4000;
  std::uint64_t seed = 0;
};

inline double bundle_meta_diameter(const fs::path& dir) {
  const fs::path meta = dir / "meta.json";
  if (!fs::exists(meta)) return 1.0;
  return read_json_file(meta.string()).value("query_diameter", 1.0);
}

inline CacheContents read_manifest_entry(const std::string& cache_dir,
                                         const CacheManifest& manifest,
                                         const std::string& object_id) {
  const auto it = manifest.entries.find(object_id);
  if (it == manifest.entries.end()) {
    throw NotFoundError("manifest has no entry '" + object_id + "'");
  }
  const CacheEntry& entry = it->second;
  const fs::path file = fs::path(entry.path).is_absolute()
                            ? fs::path(entry.path)
                            : fs::path(cache_dir) / entry.path;
  return read_cache(file.string(), entry.dim,
                    entry.checksum);
}

inline SceneData load_scene_data(const SceneRef& ref, const PipelineOptions& opt,
                                 const CacheManifest* manifest) {
  SceneData data;
  if (manifest != nullptr) {
    CacheContents qc = read_manifest_entry(opt.cache_dir, *manifest, ref.id + "/query");
    CacheContents tc = read_manifest_entry(opt.cache_dir, *manifest, ref.id + "/target");
    if (!qc.coords || !tc.coords) {
      throw FormatError("cache entries for '" + ref.id +
                        "' lack point coordinates; re-run extract");
    }
    data.query = std::move(*qc.coords);
    data.target = std::move(*tc.coords);
    data.query_features = std::move(qc.features);
    data.target_features = std::move(tc.features);

    // The bundle pose is expressed in the bundle's own units; the cached
    // clouds are normalized. meta_diameter/entry_diameter is exactly the
    // scale extract applied, so it converts the translation.
    const RigidTransform raw = load_pose((ref.dir / "pose.txt").string());
    const double meta_diameter = bundle_meta_diameter(ref.dir);
    const CacheEntry& qe = manifest->entries.at(ref.id + "/query");
    if (!(qe.query_diameter > 0.0)) {
      throw ValidationError("cache entry for '" + ref.id + "' has no diameter");
    }
    data.gt = raw;
    data.gt.translation *= meta_diameter / qe.query_diameter;
    data.original_diameter = qe.query_diameter;
  } else {
    const ScenePair pair = load_scene(ref.dir.string());
    // Sample and normalize only. Statistical outlier removal is reserved for
    // the explicit `preprocess` command: silently dropping points here would
    // shift every neighbourhood descriptor and make RON unrepresentative of
    // the stored clouds.
    const std::uint64_t sample_seed = scene_seed(opt.seed, ref.id, kStagePreprocess);
    ScenePair staged;
    staged.query = sample_points(pair.query, opt.points, derive_stream(sample_seed, 1).next());
    staged.target = sample_points(pair.target, opt.points, derive_stream(sample_seed, 2).next());
    staged.gt_pose = pair.gt_pose;
    staged.query_diameter = pair.query_diameter;
    const ScenePair prepped = normalize_pair(staged);
    if (!prepped.gt_pose.has_value()) {
      throw ValidationError("scene '" + ref.id + "' has no ground-truth pose");
    }
    const auto t0 = std::chrono::steady_clock::now();
    data.query_features = extract_toy(prepped.query, opt.radius);
    data.target_features = extract_toy(prepped.target, opt.radius);
    data.extract_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    data.query = prepped.query;
    data.target = prepped.target;
    data.gt = *prepped.gt_pose;
    data.original_diameter = prepped.query_diameter;
  }
  return data;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// RunReport: per-scene evaluation rows plus aggregates that are always
// recomputable from the rows.

struct RunReport {
  std::string tool_version = kToolVersion;
  int report_version = kReportVersion;
  nlohmann::json config;
  std::vector<EvalRecord> records;            // rows with status == "ok"
  std::vector<std::string> statuses;          // parallel to scene ids
  std::vector<std::string> scene_ids;
  double mean_ron = 0.0;
  double fmr_value = 0.0;
  double average_recall_value = 0.0;
};

namespace detail {

inline json eval_row_to_json(const EvalRecord& record) {
  json row;
  row["scene"] = record.scene_id;
  row["ron"] = record.ron;
  row["rre"] = record.errors.rre;
  row["rte"] = record.errors.rte;
  row["add"] = record.errors.add;
  row["add_s"] = record.errors.add_s;
  row["mssd"] = record.errors.mssd;
  row["diameter"] = record.diameter;
  row["status"] = "ok";
  return row;
}

inline EvalRecord eval_row_from_json(const json& row) {
  EvalRecord record;
  try {
    record.scene_id = row.at("scene").get<std::string>();
    record.ron = row.at("ron").get<double>();
    record.errors.rre = row.at("rre").get<double>();
    record.errors.rte = row.at("rte").get<double>();
    record.errors.add = row.at("add").get<double>();
    record.errors.add_s = row.at("add_s").get<double>();
    record.errors.mssd = row.at("mssd").get<double>();
    record.diameter = row.at("diameter").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed evaluation row: ") + e.what());
  }
  return record;
}

// Aggregates (mean RON, FMR, average recall) recomputed from rows.
inline void aggregate_eval(RunReport& report, double tau2,
                           const MetricThresholds& thresholds) {
  if (report.records.empty()) {
    report.mean_ron = 0.0;
    report.fmr_value = 0.0;
    report.average_recall_value = 0.0;
    return;
  }
  std::vector<double> rons;
  rons.reserve(report.records.size());
  double sum = 0.0;
  for (const EvalRecord& r : report.records) {
    rons.push_back(r.ron);
    sum += r.ron;
  }
  report.mean_ron = sum / static_cast<double>(report.records.size());
  report.fmr_value = fmr(rons, tau2);
  report.average_recall_value = average_recall(report.records, thresholds.recall_thresholds);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommand option bundles

struct SynthOptions {
  std::string out;
  std::string report_path;
  int count = 10;
  std::uint64_t seed = 0;
  std::string shape = "composite";
  int points = 4000;
  double partial = 0.6;
  double noise = 0.005;
};

struct PreprocessOptions {
  std::string scenes;
  std::string out;
  std::string report_path;
  std::size_t points = 4000;
  int outlier_neighbors = 20;
  double outlier_std_ratio = 2.0;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct ExtractOptions {
  std::string scenes;
  std::string cache_dir;
  std::string report_path;
  double radius = 0.3;
  std::size_t points = 4000;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct CacheOptions {
  std::string cache_dir;
  std::string report_path;
};

struct TransferOptions {
  std::string scenes;
  std::string cache_dir;
  std::string report_path;
  int jobs = 1;
};

struct MatchOptions {
  std::string scenes;
  std::string cache_dir;
  std::string report_path;
  bool no_cache = false;
  int ransac_iters = 100000;
  double inlier_threshold = 0.05;
  double triplet_tol = 0.1;
  int icp_iters = 1000;
  double icp_gate = 0.05;
  std::string icp_variant = "point";
  double radius = 0.3;
  std::size_t points = 4000;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct EvalOptions {
  std::string scenes;
  std::string cache_dir;
  std::string poses_path;
  std::string report_path;
  bool no_cache = false;
  bool use_gt = false;
  double tau1 = 0.03;
  double tau2 = 0.05;
  double radius = 0.3;
  std::size_t points = 4000;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct ReportOptions {
  std::vector<std::string> inputs;
  std::string csv_path;
  std::string json_path;
};

struct StorageReportOptions {
  std::string report_path;
  std::uint64_t query_clouds = 0;
  std::uint64_t target_clouds = 0;
  std::uint64_t points = 4000;
  std::uint64_t dim = 32;
  std::uint64_t bytes_per_value = 4;
};

// ---------------------------------------------------------------------------
// Subcommand implementations. Each returns the process exit code.

inline int run_synth(const SynthOptions& opt) {
  using detail::json;
  static const std::map<std::string, SynthShape> kShapes = {
      {"sphere", SynthShape::sphere},
      {"box", SynthShape::box},
      {"cylinder", SynthShape::cylinder},
      {"composite", SynthShape::composite}};

  json config = {{"out", opt.out},         {"count", opt.count},
                 {"seed", opt.seed},       {"shape", opt.shape},
                 {"points", opt.points},   {"partial", opt.partial},
                 {"noise", opt.noise}};
  json report = detail::report_envelope("synth", config);
  json rows = json::array();

  for (int i = 0; i < opt.count; ++i) {
    char suffix[32];
    std::snprintf(suffix, sizeof(suffix), "scene_%04d", i);
    const std::string id = suffix;

    SynthConfig sc;
    sc.shape = kShapes.at(opt.shape);
    sc.point_count = opt.points;
    sc.partial_fraction = opt.partial;
    sc.noise_sigma = opt.noise;
    sc.rng_seed = derive_stream(opt.seed, static_cast<std::uint64_t>(i)).next();

    const ScenePair pair = synth_scene(sc);
    const std::string dir = (std::filesystem::path(opt.out) / id).string();
    save_scene(dir, pair, opt.shape + "-" + std::to_string(i));
    rows.push_back({{"scene", id},
                    {"query_points", pair.query.size()},
                    {"target_points", pair.target.size()},
                    {"status", "ok"}});
  }
  report["rows"] = rows;
  detail::deliver_report(report, opt.report_path);
  return kExitOk;
}

inline int run_preprocess(const PreprocessOptions& opt) {
  using detail::json;
  const std::vector<detail::SceneRef> scenes = detail::discover_scenes(opt.scenes);

  json config = {{"scenes", opt.scenes},
                 {"out", opt.out},
                 {"points", opt.points},
                 {"outlier_neighbors", opt.outlier_neighbors},
                 {"outlier_std_ratio", opt.outlier_std_ratio},
                 {"seed", opt.seed}};
  json report = detail::report_envelope("preprocess", config);
  std::vector<json> rows(scenes.size());

  detail::for_each_index(opt.jobs, scenes.size(), [&](std::size_t i) {
    const detail::SceneRef& ref = scenes[i];
    json row = {{"scene", ref.id}, {"status", "ok"}};
    try {
      const ScenePair pair = load_scene(ref.dir.string());
      PreprocessConfig config2;
      config2.sample_count = opt.points;
      config2.outlier_neighbors = opt.outlier_neighbors;
      config2.outlier_std_ratio = opt.outlier_std_ratio;
      config2.rng_seed = detail::scene_seed(opt.seed, ref.id, detail::kStagePreprocess);
      const ScenePair prepped = preprocess_pair(pair, config2);
      save_scene((std::filesystem::path(opt.out) / ref.id).string(), prepped, ref.id);
      row["query_points"] = prepped.query.size();
      row["target_points"] = prepped.target.size();
      row["diameter"] = prepped.query_diameter;
    } catch (const Error& e) {
      row["status"] = std::string("error: ") + e.what();
    }
    rows[i] = std::move(row);
  });

  report["rows"] = rows;
  detail::deliver_report(report, opt.report_path);
  return detail::any_row_failed(report["rows"]) ? kExitFailure : kExitOk;
}

inline int run_extract(const ExtractOptions& opt) {
  using detail::json;
  const std::vector<detail::SceneRef> scenes = detail::discover_scenes(opt.scenes);
  std::filesystem::create_directories(opt.cache_dir);

  json config = {{"scenes", opt.scenes}, {"cache_dir", opt.cache_dir},
                 {"radius", opt.radius}, {"points", opt.points},
                 {"seed", opt.seed}};
  json report = detail::report_envelope("extract", config);

  struct Extracted {
    json row;
    std::optional<CacheEntry> query_entry;
    std::optional<CacheEntry> target_entry;
  };
  std::vector<Extracted> results(scenes.size());

  detail::for_each_index(opt.jobs, scenes.size(), [&](std::size_t i) {
    const detail::SceneRef& ref = scenes[i];
    Extracted& slot = results[i];
    slot.row = {{"scene", ref.id}, {"status", "ok"}};
    try {
      detail::PipelineOptions popt;
      popt.radius = opt.radius;
      popt.points = opt.points;
      popt.seed = opt.seed;
      const detail::SceneData data = detail::load_scene_data(ref, popt, nullptr);

      const auto store_one = [&](const std::string& role, const DescriptorSet& features,
                                 const PointCloud& coords) {
        const std::string file = ref.id + "_" + role + ".dgdf";
        const std::string full = (std::filesystem::path(opt.cache_dir) / file).string();
        const std::uint64_t checksum = write_cache(full, features, &coords);
        CacheEntry entry;
        entry.path = file;  // manifest-relative
        entry.dim = features.dim();
        entry.point_count = static_cast<int>(features.rows());
        entry.query_diameter = data.original_diameter;
        entry.checksum = checksum;
        return entry;
      };
      slot.query_entry = store_one("query", data.query_features, data.query);
      slot.target_entry = store_one("target", data.target_features, data.target);
      slot.row["query_points"] = data.query.size();
      slot.row["target_points"] = data.target.size();
      slot.row["dim"] = data.query_features.dim();
      slot.row["diameter"] = data.original_diameter;
      slot.row["timings"] = {{"extract_seconds", data.extract_seconds}};
    } catch (const Error& e) {
      slot.row["status"] = std::string("error: ") + e.what();
    }
  });

  CacheManifest manifest;
  const std::string manifest_path =
      (std::filesystem::path(opt.cache_dir) / "manifest.json").string();
  if (std::filesystem::exists(manifest_path)) {
    manifest = load_manifest(manifest_path);
  }
  json rows = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].query_entry) {
      manifest.entries[scenes[i].id + "/query"] = *results[i].query_entry;
      manifest.entries[scenes[i].id + "/target"] = *results[i].target_entry;
    }
    rows.push_back(std::move(results[i].row));
  }
  save_manifest(manifest_path, manifest);

  report["rows"] = rows;
  report["manifest"] = manifest_path;
  detail::deliver_report(report, opt.report_path);
  return detail::any_row_failed(report["rows"]) ? kExitFailure : kExitOk;
}

inline int run_cache(const CacheOptions& opt) {
  using detail::json;
  const std::string manifest_path =
      (std::filesystem::path(opt.cache_dir) / "manifest.json").string();
  const CacheManifest manifest = load_manifest(manifest_path);

  json config = {{"cache_dir", opt.cache_dir}};
  json report = detail::report_envelope("cache", config);
  json rows = json::array();

  for (const auto& [id, entry] : manifest.entries) {
    json row = {{"id", id},
                {"path", entry.path},
                {"dim", entry.dim},
                {"point_count", entry.point_count},
                {"checksum", distpose::detail::checksum_hex(entry.checksum)},
                {"status", "ok"}};
    try {
      const CacheContents contents =
          detail::read_manifest_entry(opt.cache_dir, manifest, id);
      row["rows"] = contents.features.rows();
      row["has_coords"] = contents.coords.has_value();
    } catch (const Error& e) {
      row["status"] = std::string("error: ") + e.what();
    }
    rows.push_back(std::move(row));
  }

  report["rows"] = rows;
  report["entry_count"] = manifest.entries.size();
  detail::deliver_report(report, opt.report_path);
  return detail::any_row_failed(report["rows"]) ? kExitFailure : kExitOk;
}

inline int run_transfer(const TransferOptions& opt) {
  using detail::json;
  const std::vector<detail::SceneRef> scenes = detail::discover_scenes(opt.scenes);
  const std::string manifest_path =
      (std::filesystem::path(opt.cache_dir) / "manifest.json").string();
  CacheManifest manifest = load_manifest(manifest_path);

  json config = {{"scenes", opt.scenes}, {"cache_dir", opt.cache_dir}};
  json report = detail::report_envelope("transfer", config);

  struct Transferred {
    json row;
    std::optional<CacheEntry> entry;
  };
  std::vector<Transferred> results(scenes.size());

  detail::for_each_index(opt.jobs, scenes.size(), [&](std::size_t i) {
    const detail::SceneRef& ref = scenes[i];
    Transferred& slot = results[i];
    slot.row = {{"scene", ref.id}, {"status", "ok"}};
    try {
      detail::PipelineOptions popt;
      popt.cache_dir = opt.cache_dir;
      const detail::SceneData data = detail::load_scene_data(ref, popt, &manifest);

      const CorrespondenceMap gamma = build_gamma(data.query, data.target, data.gt);
      const DescriptorSet transferred = transfer_features(gamma, data.query_features);

      const std::string file = ref.id + "_transferred.dgdf";
      const std::string full = (std::filesystem::path(opt.cache_dir) / file).string();
      const std::uint64_t checksum = write_cache(full, transferred, &data.target);

      CacheEntry entry;
      entry.path = file;
      entry.dim = transferred.dim();
      entry.point_count = static_cast<int>(transferred.rows());
      entry.query_diameter = data.original_diameter;
      entry.checksum = checksum;
      slot.entry = entry;

      double residual_sum = 0.0;
      for (const double r : gamma.residuals) residual_sum += r;
      slot.row["rows"] = transferred.rows();
      slot.row["mean_residual"] =
          gamma.residuals.empty()
              ? 0.0
              : residual_sum / static_cast<double>(gamma.residuals.size());
      slot.row["checksum"] = distpose::detail::checksum_hex(entry.checksum);
    } catch (const Error& e) {
      slot.row["status"] = std::string("error: ") + e.what();
    }
  });

  json rows = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].entry) {
      manifest.entries[scenes[i].id + "/transferred"] = *results[i].entry;
    }
    rows.push_back(std::move(results[i].row));
  }
  save_manifest(manifest_path, manifest);

  report["rows"] = rows;
  detail::deliver_report(report, opt.report_path);
  return detail::any_row_failed(report["rows"]) ? kExitFailure : kExitOk;
}

inline int run_match(const MatchOptions& opt) {
  using detail::json;
  const std::vector<detail::SceneRef> scenes = detail::discover_scenes(opt.scenes);

  const bool use_cache = !opt.no_cache && !opt.cache_dir.empty();
  CacheManifest manifest;
  if (use_cache) {
    manifest = load_manifest(
        (std::filesystem::path(opt.cache_dir) / "manifest.json").string());
  }

  json config = {{"scenes", opt.scenes},
                 {"cache_dir", use_cache ? opt.cache_dir : ""},
                 {"ransac_iters", opt.ransac_iters},
                 {"inlier_threshold", opt.inlier_threshold},
                 {"triplet_tol", opt.triplet_tol},
                 {"icp_iters", opt.icp_iters},
                 {"icp_gate", opt.icp_gate},
                 {"icp_variant", opt.icp_variant},
                 {"radius", opt.radius},
                 {"points", opt.points},
                 {"seed", opt.seed}};
  json report = detail::report_envelope("match", config);
  std::vector<json> rows(scenes.size());

  detail::for_each_index(opt.jobs, scenes.size(), [&](std::size_t i) {
    const detail::SceneRef& ref = scenes[i];
    json row = {{"scene", ref.id}, {"status", "ok"}};
    try {
      detail::PipelineOptions popt;
      popt.cache_dir = use_cache ? opt.cache_dir : "";
      popt.radius = opt.radius;
      popt.points = opt.points;
      popt.seed = opt.seed;
      const detail::SceneData data =
          detail::load_scene_data(ref, popt, use_cache ? &manifest : nullptr);

      RansacConfig ransac;
      ransac.iterations = opt.ransac_iters;
      ransac.inlier_threshold = opt.inlier_threshold;
      ransac.triplet_consistency_tol = opt.triplet_tol;
      ransac.rng_seed = detail::scene_seed(opt.seed, ref.id, detail::kStageRansac);

      IcpConfig icp;
      icp.max_iterations = opt.icp_iters;
      icp.max_correspondence_distance = opt.icp_gate;
      icp.variant = (opt.icp_variant == "plane") ? IcpVariant::point_to_plane
                                                 : IcpVariant::point_to_point;

      ScenePair pair;
      pair.query = data.query;
      pair.target = data.target;
      pair.gt_pose = data.gt;
      const MatchReport result =
          estimate_pose(pair, data.query_features, data.target_features, ransac, icp);

      row["pose"] = detail::pose_to_json(result.pose);
      row["inlier_count"] = result.inlier_count;
      row["inlier_ratio"] = result.inlier_ratio;
      row["ransac_iterations_run"] = result.ransac_iterations_run;
      row["icp_rmse"] = result.icp_rmse;
      row["rre"] = geodesic_angle(result.pose.rotation, data.gt.rotation);
      row["rte"] = (result.pose.translation - data.gt.translation).norm();
      row["diameter"] = data.original_diameter;
      row["timings"] = {{"extract_seconds", data.extract_seconds},
                        {"match_seconds", result.timings.match_seconds},
                        {"ransac_seconds", result.timings.ransac_seconds},
                        {"icp_seconds", result.timings.icp_seconds}};
    } catch (const Error& e) {
      row["status"] = std::string("error: ") + e.what();
    }
    rows[i] = std::move(row);
  });

  // Aggregates recomputed from the rows (failed scenes excluded).
  double sum_rre = 0.0, sum_rte = 0.0, sum_inlier = 0.0, max_rre = 0.0;
  double sum_extract = 0.0, sum_match = 0.0, sum_ransac = 0.0, sum_icp = 0.0;
  std::size_t ok = 0;
  for (const json& row : rows) {
    if (row.at("status").get<std::string>() != "ok") continue;
    ++ok;
    sum_rre += row.at("rre").get<double>();
    sum_rte += row.at("rte").get<double>();
    sum_inlier += row.at("inlier_ratio").get<double>();
    max_rre = std::max(max_rre, row.at("rre").get<double>());
    const json& t = row.at("timings");
    sum_extract += t.at("extract_seconds").get<double>();
    sum_match += t.at("match_seconds").get<double>();
    sum_ransac += t.at("ransac_seconds").get<double>();
    sum_icp += t.at("icp_seconds").get<double>();
  }
  json aggregate;
  aggregate["scene_count"] = scenes.size();
  aggregate["ok_count"] = ok;
  if (ok > 0) {
    const double n = static_cast<double>(ok);
    aggregate["mean_rre"] = sum_rre / n;
    aggregate["mean_rte"] = sum_rte / n;
    aggregate["max_rre"] = max_rre;
    aggregate["mean_inlier_ratio"] = sum_inlier / n;
    report["timings"] = {{"extract_seconds_mean", sum_extract / n},
                         {"match_seconds_mean", sum_match / n},
                         {"ransac_seconds_mean", sum_ransac / n},
                         {"icp_seconds_mean", sum_icp / n}};
  }
  report["rows"] = rows;
  report["aggregate"] = aggregate;
  detail::deliver_report(report, opt.report_path);
  return detail::any_row_failed(report["rows"]) ? kExitFailure : kExitOk;
}

inline int run_eval(const EvalOptions& opt) {
  using detail::json;
  if (!opt.use_gt && opt.poses_path.empty()) {
    std::cerr << "distpose eval: provide either --poses or --use-gt\n";
    return kExitUsage;
  }
  if (opt.use_gt && !opt.poses_path.empty()) {
    std::cerr << "distpose eval: --poses and --use-gt are mutually exclusive\n";
    return kExitUsage;
  }
  const std::vector<detail::SceneRef> scenes = detail::discover_scenes(opt.scenes);

  const bool use_cache = !opt.no_cache && !opt.cache_dir.empty();
  CacheManifest manifest;
  if (use_cache) {
    manifest = load_manifest(
        (std::filesystem::path(opt.cache_dir) / "manifest.json").string());
  }

  // Estimated poses come from a match report.
  std::map<std::string, RigidTransform> estimates;
  if (!opt.use_gt) {
    const json match_report = detail::read_json_file(opt.poses_path);
    if (!match_report.contains("rows")) {
      throw FormatError("poses file has no rows: " + opt.poses_path);
    }
    for (const json& row : match_report.at("rows")) {
      if (row.value("status", "ok") != "ok" || !row.contains("pose")) continue;
      estimates[row.at("scene").get<std::string>()] =
          detail::pose_from_json(row.at("pose"));
    }
  }

  json config = {{"scenes", opt.scenes},
                 {"cache_dir", use_cache ? opt.cache_dir : ""},
                 {"poses", opt.poses_path},
                 {"use_gt", opt.use_gt},
                 {"tau1", opt.tau1},
                 {"tau2", opt.tau2},
                 {"radius", opt.radius},
                 {"points", opt.points},
                 {"seed", opt.seed}};

  MetricThresholds thresholds;
  thresholds.tau1_fraction = opt.tau1;
  thresholds.tau2 = opt.tau2;

  struct EvalSlot {
    json row;
    std::optional<EvalRecord> record;
    double extract_seconds = 0.0;
  };
  std::vector<EvalSlot> slots(scenes.size());

  detail::for_each_index(opt.jobs, scenes.size(), [&](std::size_t i) {
    const detail::SceneRef& ref = scenes[i];
    EvalSlot& slot = slots[i];
    try {
      detail::PipelineOptions popt;
      popt.cache_dir = use_cache ? opt.cache_dir : "";
      popt.radius = opt.radius;
      popt.points = opt.points;
      popt.seed = opt.seed;
      const detail::SceneData data =
          detail::load_scene_data(ref, popt, use_cache ? &manifest : nullptr);

      RigidTransform est;
      if (opt.use_gt) {
        est = data.gt;
      } else {
        const auto it = estimates.find(ref.id);
        if (it == estimates.end()) {
          throw NotFoundError("poses file has no estimate for scene '" + ref.id + "'");
        }
        est = it->second;
      }

      EvalRecord record;
      record.scene_id = ref.id;
      record.ron = ron(data.query_features, data.target_features, data.query,
                       data.target, data.gt, opt.tau1);
      record.errors = pose_errors(est, data.gt, data.query);
      record.diameter = diameter(data.query);
      record.mssd_success =
          mssd_success_flags(record.errors.mssd, record.diameter,
                             thresholds.recall_thresholds);

      slot.record = record;
      slot.extract_seconds = data.extract_seconds;
      slot.row = detail::eval_row_to_json(record);
      slot.row["timings"] = {{"extract_seconds", data.extract_seconds}};
    } catch (const Error& e) {
      slot.row = {{"scene", ref.id}, {"status", std::string("error: ") + e.what()}};
    }
  });

  RunReport run;
  run.config = config;
  json rows = json::array();
  double sum_extract = 0.0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    run.scene_ids.push_back(scenes[i].id);
    run.statuses.push_back(slots[i].row.value("status", "ok"));
    if (slots[i].record) {
      run.records.push_back(*slots[i].record);
      sum_extract += slots[i].extract_seconds;
    }
    rows.push_back(std::move(slots[i].row));
  }
  detail::aggregate_eval(run, opt.tau2, thresholds);

  json report = detail::report_envelope("eval", config);
  report["rows"] = rows;
  report["aggregate"] = {{"scene_count", scenes.size()},
                         {"ok_count", run.records.size()},
                         {"mean_ron", run.mean_ron},
                         {"fmr", run.fmr_value},
                         {"average_recall", run.average_recall_value}};
  if (!run.records.empty()) {
    report["timings"] = {
        {"extract_seconds_mean",
         sum_extract / static_cast<double>(run.records.size())}};
  }
  detail::deliver_report(report, opt.report_path);
  return detail::any_row_failed(report["rows"]) ? kExitFailure : kExitOk;
}

inline int run_report(const ReportOptions& opt) {
  using detail::json;

  // Merge rows from all evaluation reports; aggregates are recomputed from
  // the merged rows, never copied from the inputs.
  std::vector<json> merged;
  double tau2 = 0.05;
  bool tau2_seen = false;
  for (const std::string& input : opt.inputs) {
    const json j = detail::read_json_file(input);
    if (!j.contains("rows")) throw FormatError("input has no rows: " + input);
    if (!tau2_seen && j.contains("config") && j.at("config").contains("tau2")) {
      tau2 = j.at("config").at("tau2").get<double>();
      tau2_seen = true;
    }
    for (const json& row : j.at("rows")) {
      json copy = row;
      copy.erase("timings");
      copy["source"] = input;
      merged.push_back(std::move(copy));
    }
  }
  std::stable_sort(merged.begin(), merged.end(), [](const json& a, const json& b) {
    return a.value("scene", "") < b.value("scene", "");
  });

  RunReport run;
  std::size_t failed = 0;
  for (const json& row : merged) {
    if (row.value("status", "ok") != "ok") {
      ++failed;
      continue;
    }
    run.records.push_back(detail::eval_row_from_json(row));
  }
  MetricThresholds thresholds;
  thresholds.tau2 = tau2;
  detail::aggregate_eval(run, tau2, thresholds);

  // Comma-separated form with a fixed header row.
  std::string csv = "scene,ron,rre,rte,add,add_s,mssd,diameter,status\n";
  for (const json& row : merged) {
    const std::string status = row.value("status", "ok");
    csv += row.value("scene", "");
    csv += ',';
    if (status == "ok") {
      for (const char* key : {"ron", "rre", "rte", "add", "add_s", "mssd", "diameter"}) {
        csv += detail::double_text(row.at(key).get<double>());
        csv += ',';
      }
    } else {
      csv += ",,,,,,,";
    }
    csv += (status == "ok") ? "ok" : "failed";
    csv += '\n';
  }
  if (!opt.csv_path.empty()) {
    std::ofstream out(opt.csv_path, std::ios::trunc);
    if (!out) throw StorageError("cannot open " + opt.csv_path + " for writing");
    out << csv;
  }

  json summary = detail::report_envelope(
      "report", {{"inputs", opt.inputs}, {"tau2", tau2}});
  summary["rows"] = merged;
  summary["aggregate"] = {{"row_count", merged.size()},
                          {"ok_count", run.records.size()},
                          {"failed_count", failed},
                          {"mean_ron", run.mean_ron},
                          {"fmr", run.fmr_value},
                          {"average_recall", run.average_recall_value}};
  if (!opt.json_path.empty()) detail::write_json_file(opt.json_path, summary);

  // Structured text table.
  std::ostringstream table;
  table << "scene                 ron      rre(rad)   rte       mssd      status\n";
  for (const json& row : merged) {
    const std::string status = row.value("status", "ok");
    char line[160];
    if (status == "ok") {
      std::snprintf(line, sizeof(line), "%-20s  %-7.4f  %-9.6f  %-8.5f  %-8.5f  ok\n",
                    row.value("scene", "").c_str(), row.at("ron").get<double>(),
                    row.at("rre").get<double>(), row.at("rte").get<double>(),
                    row.at("mssd").get<double>());
    } else {
      std::snprintf(line, sizeof(line), "%-20s  %-7s  %-9s  %-8s  %-8s  failed\n",
                    row.value("scene", "").c_str(), "-", "-", "-", "-");
    }
    table << line;
  }
  table << "\nscenes: " << merged.size() << " (" << failed << " failed)"
        << "\nmean RON:       " << detail::double_text(run.mean_ron)
        << "\nFMR(tau2=" << detail::double_text(tau2)
        << "): " << detail::double_text(run.fmr_value)
        << "\naverage recall: " << detail::double_text(run.average_recall_value) << "\n";
  std::cout << table.str();

  return failed > 0 ? kExitFailure : kExitOk;
}

inline int run_storage_report(const StorageReportOptions& opt) {
  using detail::json;
  const StorageReport result =
      storage_report(opt.query_clouds, opt.target_clouds, opt.points, opt.dim,
                     opt.bytes_per_value);
  json report = detail::report_envelope(
      "storage-report", {{"query_clouds", opt.query_clouds},
                         {"target_clouds", opt.target_clouds},
                         {"points", opt.points},
                         {"dim", opt.dim},
                         {"bytes_per_value", opt.bytes_per_value}});
  report["query_only_bytes"] = result.query_only_bytes;
  report["full_bytes"] = result.full_bytes;
  report["reduction_ratio"] = result.reduction_ratio;
  detail::deliver_report(report, opt.report_path);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Dispatch

inline int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"distillation-style zero-shot 6D pose estimation pipeline", "distpose"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("distpose ") + kToolVersion);

  SynthOptions synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate synthetic scene bundles");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--count", synth.count, "Number of scenes")
      ->check(CLI::Range(1, 100000));
  synth_cmd->add_option("--seed", synth.seed, "Master RNG seed");
  synth_cmd->add_option("--shape", synth.shape, "Surface shape")
      ->check(CLI::IsMember({"sphere", "box", "cylinder", "composite"}));
  synth_cmd->add_option("--points", synth.points, "Points per query cloud")
      ->check(CLI::Range(10, 10000000));
  synth_cmd->add_option("--partial", synth.partial, "Kept fraction of the target")
      ->check(CLI::Range(1e-6, 1.0));
  synth_cmd->add_option("--noise", synth.noise, "RMS noise displacement")
      ->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--report", synth.report_path, "Write the JSON report here");

  PreprocessOptions preprocess;
  CLI::App* preprocess_cmd =
      app.add_subcommand("preprocess", "Sample, clean, and normalize scene bundles");
  preprocess_cmd->add_option("--scenes", preprocess.scenes, "Scene bundle directory")
      ->required();
  preprocess_cmd->add_option("--out", preprocess.out, "Output directory")->required();
  preprocess_cmd->add_option("--points", preprocess.points, "Sample size per cloud")
      ->check(CLI::PositiveNumber);
  preprocess_cmd
      ->add_option("--outlier-neighbors", preprocess.outlier_neighbors,
                   "k for the outlier statistic")
      ->check(CLI::PositiveNumber);
  preprocess_cmd
      ->add_option("--outlier-std", preprocess.outlier_std_ratio,
                   "Outlier cut in standard deviations")
      ->check(CLI::NonNegativeNumber);
  preprocess_cmd->add_option("--seed", preprocess.seed, "Sampling seed");
  preprocess_cmd->add_option("--jobs", preprocess.jobs, "Scene-level parallelism")
      ->check(CLI::Range(1, 256));
  preprocess_cmd->add_option("--report", preprocess.report_path,
                             "Write the JSON report here");

  ExtractOptions extract;
  CLI::App* extract_cmd =
      app.add_subcommand("extract", "Compute toy descriptors and fill the feature cache");
  extract_cmd->add_option("--scenes", extract.scenes, "Scene bundle directory")
      ->required();
  extract_cmd
      ->add_option("--cache-dir", extract.cache_dir, "Feature cache directory")
      ->envname("DISTPOSE_CACHE_DIR")
      ->required();
  extract_cmd->add_option("--radius", extract.radius, "Descriptor radius fraction")
      ->check(CLI::Range(1e-9, 1.0));
  extract_cmd->add_option("--points", extract.points, "Sample size per cloud")
      ->check(CLI::PositiveNumber);
  extract_cmd->add_option("--seed", extract.seed, "Sampling seed");
  extract_cmd->add_option("--jobs", extract.jobs, "Scene-level parallelism")
      ->check(CLI::Range(1, 256));
  extract_cmd->add_option("--report", extract.report_path, "Write the JSON report here");

  CacheOptions cache;
  CLI::App* cache_cmd =
      app.add_subcommand("cache", "List and verify the feature cache manifest");
  cache_cmd->add_option("--cache-dir", cache.cache_dir, "Feature cache directory")
      ->envname("DISTPOSE_CACHE_DIR")
      ->required();
  cache_cmd->add_option("--report", cache.report_path, "Write the JSON report here");

  TransferOptions transfer;
  CLI::App* transfer_cmd = app.add_subcommand(
      "transfer", "Project cached query features onto targets via ground truth");
  transfer_cmd->add_option("--scenes", transfer.scenes, "Scene bundle directory")
      ->required();
  transfer_cmd->add_option("--cache-dir", transfer.cache_dir, "Feature cache directory")
      ->envname("DISTPOSE_CACHE_DIR")
      ->required();
  transfer_cmd->add_option("--jobs", transfer.jobs, "Scene-level parallelism")
      ->check(CLI::Range(1, 256));
  transfer_cmd->add_option("--report", transfer.report_path,
                           "Write the JSON report here");

  MatchOptions match;
  CLI::App* match_cmd =
      app.add_subcommand("match", "Estimate poses for every scene bundle");
  match_cmd->add_option("--scenes", match.scenes, "Scene bundle directory")->required();
  match_cmd->add_option("--cache-dir", match.cache_dir, "Feature cache directory")
      ->envname("DISTPOSE_CACHE_DIR");
  match_cmd->add_flag("--no-cache", match.no_cache,
                      "Recompute features even when a cache directory is set");
  match_cmd->add_option("--ransac-iters", match.ransac_iters, "RANSAC iterations")
      ->check(CLI::PositiveNumber);
  match_cmd
      ->add_option("--inlier-threshold", match.inlier_threshold,
                   "RANSAC inlier distance")
      ->check(CLI::PositiveNumber);
  match_cmd->add_option("--triplet-tol", match.triplet_tol, "Triplet consistency tolerance")
      ->check(CLI::PositiveNumber);
  match_cmd->add_option("--icp-iters", match.icp_iters, "ICP iteration cap")
      ->check(CLI::PositiveNumber);
  match_cmd->add_option("--icp-gate", match.icp_gate, "ICP correspondence gate")
      ->check(CLI::PositiveNumber);
  match_cmd->add_option("--icp-variant", match.icp_variant, "ICP objective")
      ->check(CLI::IsMember({"point", "plane"}));
  match_cmd->add_option("--radius", match.radius, "Descriptor radius fraction")
      ->check(CLI::Range(1e-9, 1.0));
  match_cmd->add_option("--points", match.points, "Sample size per cloud")
      ->check(CLI::PositiveNumber);
  match_cmd->add_option("--seed", match.seed, "Pipeline seed");
  match_cmd->add_option("--jobs", match.jobs, "Scene-level parallelism")
      ->check(CLI::Range(1, 256));
  match_cmd->add_option("--report", match.report_path, "Write the JSON report here");

  EvalOptions eval;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Score estimated poses against ground truth");
  eval_cmd->add_option("--scenes", eval.scenes, "Scene bundle directory")->required();
  eval_cmd->add_option("--cache-dir", eval.cache_dir, "Feature cache directory")
      ->envname("DISTPOSE_CACHE_DIR");
  eval_cmd->add_flag("--no-cache", eval.no_cache,
                     "Recompute features even when a cache directory is set");
  eval_cmd->add_option("--poses", eval.poses_path, "Match report with estimated poses");
  eval_cmd->add_flag("--use-gt", eval.use_gt, "Evaluate the ground-truth pose itself");
  eval_cmd->add_option("--tau1", eval.tau1, "RON distance fraction")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--tau2", eval.tau2, "FMR threshold on RON")
      ->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_option("--radius", eval.radius, "Descriptor radius fraction")
      ->check(CLI::Range(1e-9, 1.0));
  eval_cmd->add_option("--points", eval.points, "Sample size per cloud")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", eval.seed, "Pipeline seed");
  eval_cmd->add_option("--jobs", eval.jobs, "Scene-level parallelism")
      ->check(CLI::Range(1, 256));
  eval_cmd->add_option("--report", eval.report_path, "Write the JSON report here");

  ReportOptions reportopt;
  CLI::App* report_cmd =
      app.add_subcommand("report", "Merge evaluation reports into a summary table");
  report_cmd->add_option("--inputs", reportopt.inputs, "Evaluation report files")
      ->required()
      ->expected(1, 1000);
  report_cmd->add_option("--csv", reportopt.csv_path, "Write the CSV table here");
  report_cmd->add_option("--json", reportopt.json_path, "Write the JSON summary here");

  StorageReportOptions storage;
  CLI::App* storage_cmd = app.add_subcommand(
      "storage-report", "Bytes needed for query-only versus full feature caching");
  storage_cmd->add_option("--query-clouds", storage.query_clouds, "Query cloud count")
      ->required()
      ->check(CLI::PositiveNumber);
  storage_cmd->add_option("--target-clouds", storage.target_clouds, "Target cloud count")
      ->required();
  storage_cmd->add_option("--points", storage.points, "Points per cloud")
      ->check(CLI::PositiveNumber);
  storage_cmd->add_option("--dim", storage.dim, "Descriptor dimension")
      ->check(CLI::PositiveNumber);
  storage_cmd->add_option("--bytes", storage.bytes_per_value, "Bytes per value")
      ->check(CLI::PositiveNumber);
  storage_cmd->add_option("--report", storage.report_path, "Write the JSON report here");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("distpose");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) return run_synth(synth);
    if (preprocess_cmd->parsed()) return run_preprocess(preprocess);
    if (extract_cmd->parsed()) return run_extract(extract);
    if (cache_cmd->parsed()) return run_cache(cache);
    if (transfer_cmd->parsed()) return run_transfer(transfer);
    if (match_cmd->parsed()) return run_match(match);
    if (eval_cmd->parsed()) return run_eval(eval);
    if (report_cmd->parsed()) return run_report(reportopt);
    if (storage_cmd->parsed()) return run_storage_report(storage);
  } catch (const Error& e) {
    std::cerr << "distpose: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "distpose: unexpected error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

inline int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args);
}

}  // namespace distpose::cli
