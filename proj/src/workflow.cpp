#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "cordmorph/csv.hpp"
#include "cordmorph/error.hpp"
#include "cordmorph/fileio.hpp"
#include "cordmorph/nifti.hpp"
#include "cordmorph/orientation.hpp"
#include "cordmorph/workflow.hpp"

namespace cordmorph {

namespace {

struct RowOutcome {
  std::size_t row_index = 0;
  std::vector<MorphometricRecord> records;
  std::vector<SliceRow> slices;
  std::optional<RowError> error;
};

RowOutcome process_row(const DatasetManifest& manifest, std::size_t row_index, const RunConfig& config) {
  const ManifestRow& row = manifest.rows[row_index];
  RowOutcome outcome;
  outcome.row_index = row_index;
  const std::filesystem::path mask_path = manifest.resolve(row.mask_path);
  try {
    const BinaryMask mask = binarize(reorient(read_nifti(mask_path), OrientationCode::RPI()), 0.5);
    if (!row.labels_path) {
      throw Error(ErrorCode::InvalidManifest, "labels_path is required for level-restricted metrics");
    }
    const Volume label_volume = reorient(read_nifti(manifest.resolve(*row.labels_path)), OrientationCode::RPI());
    if (label_volume.extents() != mask.extents()) {
      throw Error(ErrorCode::GridMismatch, "label volume extents differ from the mask");
    }
    const LevelLabels labels = LevelLabels::from_volume(label_volume);
    const std::vector<SliceMorphometrics> per_slice = compute_morphometrics(mask, &labels);

    auto record = [&](std::string_view metric, LevelKey key, double value) {
      outcome.records.push_back({row.subject_id, row.contrast, row.version_id, std::string(metric), std::move(key), value});
    };
    const LevelKey level_key = config.level_key();
    for (Metric m : config.metrics) record(metric_name(m), level_key, aggregate_over_levels(per_slice, config.levels, m));
    record(metric_name(Metric::Area), LevelKey::range(std::string(kAllSlicesTag)), mean_csa_all_slices(per_slice));
    if (config.per_slice_records) {
      for (const SliceMorphometrics& s : per_slice) {
        if (s.empty()) continue;
        for (Metric m : config.metrics) record(metric_name(m), LevelKey::slice(s.slice_index), *s.value(m));
      }
    }
    for (const SliceMorphometrics& s : per_slice) outcome.slices.push_back({row.subject_id, row.contrast, row.version_id, s});
  } catch (const Error& e) {
    outcome.records.clear();
    outcome.slices.clear();
    outcome.error = RowError{row_index, row.subject_id, row.contrast, row.version_id, mask_path.generic_string(),
                             std::string(to_string(e.code())), e.what()};
  } catch (const std::exception& e) {
    outcome.records.clear();
    outcome.slices.clear();
    outcome.error = RowError{row_index, row.subject_id, row.contrast, row.version_id, mask_path.generic_string(),
                             "Internal", e.what()};
  }
  return outcome;
}

std::string optional_cell(const std::optional<double>& v) { return v ? csv::format_number(*v) : std::string(); }

}  // namespace

RunResult run_morphometrics(const DatasetManifest& manifest, const RunConfig& config) {
  config.validate();
  RunResult result;
  result.manifest_rows = manifest.rows.size();
  for (const auto& [id, version] : config.versions) result.store.add_version(version);

  std::vector<std::size_t> owned;
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    if (config.shard.owns(i)) owned.push_back(i);
  }
  result.shard_rows = owned.size();
  if (manifest.rows.empty()) result.warnings.push_back("manifest has no rows");

  std::vector<RowOutcome> outcomes(owned.size());
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::max<std::size_t>(1, std::min(owned.size(), config.threads ? config.threads : hw));
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers && !owned.empty(); ++w) {
      pool.emplace_back([&] {
        for (std::size_t slot = next++; slot < owned.size(); slot = next++) {
          outcomes[slot] = process_row(manifest, owned[slot], config);
        }
      });
    }
  }

  // merge in manifest order so the result does not depend on scheduling
  for (RowOutcome& o : outcomes) {
    if (o.error) {
      result.errors.push_back(std::move(*o.error));
      ++result.failed;
      continue;
    }
    const auto clash = std::find_if(o.records.begin(), o.records.end(),
                                    [&](const MorphometricRecord& r) { return result.store.records().contains(r.key()); });
    if (clash != o.records.end()) {
      const ManifestRow& row = manifest.rows[o.row_index];
      result.errors.push_back({o.row_index, row.subject_id, row.contrast, row.version_id,
                               manifest.resolve(row.mask_path).generic_string(),
                               std::string(to_string(ErrorCode::DuplicateRecord)), "record key produced twice"});
      ++result.failed;
      continue;
    }
    for (MorphometricRecord& r : o.records) result.store.add(std::move(r));
    for (SliceRow& s : o.slices) result.per_slice.push_back(std::move(s));
    ++result.processed;
  }
  std::sort(result.per_slice.begin(), result.per_slice.end(), [](const SliceRow& a, const SliceRow& b) {
    return std::tie(a.subject_id, a.contrast, a.version_id, a.slice.slice_index) <
           std::tie(b.subject_id, b.contrast, b.version_id, b.slice.slice_index);
  });
  if (result.failed > 0) result.warnings.push_back(std::to_string(result.failed) + " manifest row(s) failed");
  return result;
}

std::string per_slice_csv(const std::vector<SliceRow>& rows) {
  std::string out = csv::format_row({"subject", "contrast", "model_version", "slice_index", "level", "area_mm2",
                                     "ap_diameter_mm", "transverse_diameter_mm", "compression_ratio", "eccentricity",
                                     "solidity"});
  for (const SliceRow& r : rows) {
    const SliceMorphometrics& s = r.slice;
    out += csv::format_row({r.subject_id, r.contrast, r.version_id, std::to_string(s.slice_index),
                            s.level ? std::to_string(*s.level) : std::string(),
                            s.empty() ? std::string() : csv::format_number(s.area), optional_cell(s.ap_diameter),
                            optional_cell(s.transverse_diameter), optional_cell(s.compression_ratio),
                            optional_cell(s.eccentricity), optional_cell(s.solidity)});
  }
  return out;
}

std::string errors_csv(const std::vector<RowError>& errors) {
  std::string out = csv::format_row({"row_index", "subject", "contrast", "model_version", "path", "error", "message"});
  for (const RowError& e : errors) {
    out += csv::format_row({std::to_string(e.row_index), e.subject_id, e.contrast, e.version_id, e.path, e.code, e.message});
  }
  return out;
}

void write_run_outputs(const RunResult& result, const RunConfig& config) {
  const std::filesystem::path& out = config.out_dir;
  result.store.append_to(out / "store.ndjson");
  write_file_atomic(out / "per_slice.csv", per_slice_csv(result.per_slice));
  write_file_atomic(out / "errors.csv", errors_csv(result.errors));
  nlohmann::ordered_json summary;
  summary["manifest_rows"] = result.manifest_rows;
  summary["shard"] = config.shard.str();
  summary["shard_rows"] = result.shard_rows;
  summary["processed"] = result.processed;
  summary["failed"] = result.failed;
  summary["records"] = result.store.size();
  summary["warnings"] = result.warnings;
  summary["config_digest"] = config.digest();
  write_file_atomic(out / "summary.json", summary.dump(2) + "\n");
}

}  // namespace cordmorph
