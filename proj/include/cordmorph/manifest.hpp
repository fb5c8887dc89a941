#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cordmorph {

struct ManifestRow {
  std::string subject_id;
  std::string contrast;
  std::string version_id;
  std::filesystem::path mask_path;
  std::optional<std::filesystem::path> labels_path;
  std::optional<std::string> site;
  std::optional<std::string> pathology;
};

/// CSV dataset index. Columns: subject_id, contrast, version_id, mask_path,
/// labels_path, site, pathology. Relative paths resolve against the
/// manifest's own directory.
struct DatasetManifest {
  std::filesystem::path base_dir;
  std::vector<ManifestRow> rows;

  /// Throws InvalidManifest on a bad header, missing required fields or a
  /// repeated (subject, contrast, version).
  static DatasetManifest parse(std::string_view text, std::filesystem::path base_dir);
  static DatasetManifest read(const std::filesystem::path& path);

  std::string to_csv() const;
  void write(const std::filesystem::path& path) const;

  std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : base_dir / p; }
};

}  // namespace cordmorph
