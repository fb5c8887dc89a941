#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cordmorph/drift.hpp"
#include "cordmorph/geometry.hpp"
#include "cordmorph/manifest.hpp"

namespace cordmorph {

/// Shard k of n: processes manifest rows with row_index % n == k.
struct Shard {
  std::size_t index = 0;
  std::size_t count = 1;

  /// Parses "k/n"; throws InvalidConfig unless 0 <= k < n.
  static Shard parse(std::string_view text);
  bool owns(std::size_t row_index) const { return row_index % count == index; }
  std::string str() const { return std::to_string(index) + "/" + std::to_string(count); }
};

struct RunConfig {
  std::set<int> levels{2, 3};
  std::vector<Metric> metrics{kAllMetrics.begin(), kAllMetrics.end()};
  std::vector<std::string> contrasts{"T2w", "T1w", "T2*w", "MT-on", "GRE-T1w", "DWI"};
  GatePolicy policy;
  std::filesystem::path out_dir = "out";
  Shard shard;
  std::uint64_t seed = 0;
  bool stamp = false;
  std::size_t threads = 0;  // 0 = hardware concurrency
  bool per_slice_records = true;
  std::optional<std::string> base_version;
  std::optional<std::string> candidate_version;
  std::pair<std::string, std::string> agreement_pair{"T1w", "T2w"};
  std::map<std::string, ModelVersion> versions;

  /// Throws InvalidConfig / InvalidPolicy.
  void validate() const;
  LevelKey level_key() const { return LevelKey::range(level_range_tag(levels)); }
  /// SHA-256 of a canonical rendering of every setting that affects outputs.
  std::string digest() const;

  /// TOML keys: levels, metrics, contrasts, out, shard, seed, threads,
  /// per_slice_records, base_version, candidate_version, agreement_pair,
  /// [gate] bounds and [versions.<id>] metadata. Unknown keys are rejected.
  static RunConfig from_toml(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);
};

enum class Partition { Train, Test };

struct SplitAssignment {
  std::map<std::string, Partition> partition;
  double ratio = 0.2;
  std::uint64_t seed = 0;

  std::size_t test_count() const;
};

/// Subject-wise split; |TEST| = round(ratio * n). Deterministic under seed
/// (std::mt19937_64 shuffle of the sorted unique subject ids).
SplitAssignment split_subjects(std::vector<std::string> subjects, double ratio, std::uint64_t seed);

struct SliceRow {
  std::string subject_id;
  std::string contrast;
  std::string version_id;
  SliceMorphometrics slice;
};

struct RowError {
  std::size_t row_index = 0;
  std::string subject_id;
  std::string contrast;
  std::string version_id;
  std::string path;
  std::string code;
  std::string message;
};

struct RunResult {
  DriftStore store;
  std::vector<SliceRow> per_slice;
  std::vector<RowError> errors;
  std::size_t manifest_rows = 0;
  std::size_t shard_rows = 0;
  std::size_t processed = 0;
  std::size_t failed = 0;
  std::vector<std::string> warnings;
};

/// parse -> reorient to RPI -> binarize(0.5) -> per-slice morphometrics ->
/// level aggregates, for every manifest row owned by the shard. Row
/// failures are collected, never thrown.
RunResult run_morphometrics(const DatasetManifest& manifest, const RunConfig& config);

/// Writes store.ndjson (+ versions manifest), per_slice.csv, errors.csv and
/// summary.json under config.out_dir.
void write_run_outputs(const RunResult& result, const RunConfig& config);

std::string per_slice_csv(const std::vector<SliceRow>& rows);
std::string errors_csv(const std::vector<RowError>& errors);

struct VersionPoint {
  std::string subject_id;
  std::string contrast;
  double base = 0.0;
  double candidate = 0.0;
};

/// Per (subject, contrast) CSA of both versions at the level key.
std::vector<VersionPoint> version_agreement_points(const DriftStore& store, const std::string& base,
                                                   const std::string& candidate, const LevelKey& level_key);

struct SliceCurvePoint {
  std::int64_t slice_index = 0;
  double base_mean = 0.0;
  double candidate_mean = 0.0;
  double ratio_mean = 0.0;
  double ratio_std = 0.0;
  std::size_t n = 0;
};

/// Per-slice metric means of both versions and the scaling-factor band.
std::vector<SliceCurvePoint> slice_curves(const DriftStore& store, const std::string& base,
                                          const std::string& candidate, std::string_view metric);

struct EmitResult {
  DriftReport report;
  std::vector<std::filesystem::path> files;  // relative to out_dir, sorted
};

/// Report JSON/CSV, scaling-factor table, plots and a release/ bundle with
/// SHA256SUMS and the gate verdict.
EmitResult emit_reports(const DriftStore& store, const std::string& base, const std::string& candidate,
                        const RunConfig& config);

/// Reads a report and applies the policy. Returns 0 on PASS, 2 on drift
/// FAIL and 1 on operational errors; reasons go to `err`.
int gate_cli(const std::filesystem::path& report_path, const GatePolicy& policy, std::ostream& err);

}  // namespace cordmorph
