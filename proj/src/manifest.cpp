#include "cordmorph/manifest.hpp"

#include <array>
#include <set>
#include <tuple>

#include "cordmorph/csv.hpp"
#include "cordmorph/error.hpp"
#include "cordmorph/fileio.hpp"

namespace cordmorph {

namespace {

constexpr std::array<std::string_view, 7> kColumns{"subject_id", "contrast", "version_id", "mask_path",
                                                   "labels_path", "site", "pathology"};

std::optional<std::string> optional_field(const csv::Row& row, std::size_t i) {
  if (i >= row.size() || row[i].empty()) return std::nullopt;
  return row[i];
}

}  // namespace

DatasetManifest DatasetManifest::parse(std::string_view text, std::filesystem::path base_dir) {
  DatasetManifest manifest;
  manifest.base_dir = std::move(base_dir);
  const auto rows = csv::parse(text);
  if (rows.empty()) throw Error(ErrorCode::InvalidManifest, "manifest has no header");
  const csv::Row& header = rows.front();
  if (header.size() < 4) throw Error(ErrorCode::InvalidManifest, "manifest header needs at least 4 columns");
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i >= kColumns.size() || header[i] != kColumns[i]) {
      throw Error(ErrorCode::InvalidManifest, "unexpected manifest column '" + header[i] + "'");
    }
  }
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const csv::Row& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() < 4 || row.size() > header.size()) {
      throw Error(ErrorCode::InvalidManifest, "manifest line " + std::to_string(r + 1) + " has " + std::to_string(row.size()) + " fields");
    }
    ManifestRow m;
    m.subject_id = row[0];
    m.contrast = row[1];
    m.version_id = row[2];
    m.mask_path = row[3];
    if (m.subject_id.empty() || m.contrast.empty() || m.version_id.empty() || row[3].empty()) {
      throw Error(ErrorCode::InvalidManifest, "manifest line " + std::to_string(r + 1) + " has an empty required field");
    }
    if (auto p = optional_field(row, 4)) m.labels_path = *p;
    m.site = optional_field(row, 5);
    m.pathology = optional_field(row, 6);
    if (!seen.emplace(m.subject_id, m.contrast, m.version_id).second) {
      throw Error(ErrorCode::InvalidManifest, "duplicate manifest entry for " + m.subject_id + "/" + m.contrast + "/" + m.version_id);
    }
    manifest.rows.push_back(std::move(m));
  }
  return manifest;
}

DatasetManifest DatasetManifest::read(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  return parse(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), path.parent_path());
}

std::string DatasetManifest::to_csv() const {
  std::string out;
  out += csv::format_row(csv::Row(kColumns.begin(), kColumns.end()));
  for (const ManifestRow& m : rows) {
    out += csv::format_row({m.subject_id, m.contrast, m.version_id, m.mask_path.generic_string(),
                            m.labels_path ? m.labels_path->generic_string() : std::string(), m.site.value_or(""),
                            m.pathology.value_or("")});
  }
  return out;
}

void DatasetManifest::write(const std::filesystem::path& path) const { write_file_atomic(path, to_csv()); }

}  // namespace cordmorph
