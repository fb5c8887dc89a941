#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

namespace cordmorph {

struct ModelVersion {
  std::string version_id;
  std::optional<std::string> source_url;
  std::string created;  // ISO-8601 date, may be empty when unstamped
};

/// Either a vertebral level-range tag ("C2-C3") or a slice index.
class LevelKey {
 public:
  static LevelKey range(std::string tag);
  static LevelKey slice(std::int64_t index) { return LevelKey(index); }
  /// Inverse of str(): "slice:<n>" or a range tag.
  static LevelKey parse(std::string_view text);

  bool is_slice() const { return std::holds_alternative<std::int64_t>(value_); }
  const std::string& tag() const { return std::get<std::string>(value_); }
  std::int64_t slice_index() const { return std::get<std::int64_t>(value_); }
  std::string str() const;

  auto operator<=>(const LevelKey&) const = default;
  bool operator==(const LevelKey&) const = default;

 private:
  explicit LevelKey(std::variant<std::string, std::int64_t> v) : value_(std::move(v)) {}
  std::variant<std::string, std::int64_t> value_;
};

/// Vertebral name of a numeric level: 1-7 -> C, 8-19 -> T, 20-24 -> L.
std::string vertebral_name(int level);
/// "C2-C3" for a contiguous set, "C2,C4" otherwise.
std::string level_range_tag(const std::set<int>& levels);

/// Tag used for the mean over every non-empty slice.
inline constexpr std::string_view kAllSlicesTag = "all";

struct MorphometricRecord {
  std::string subject_id;
  std::string contrast;
  std::string version_id;
  std::string metric;
  LevelKey level_key = LevelKey::range("C2-C3");
  double value = 0.0;

  using Key = std::tuple<std::string, std::string, std::string, std::string, LevelKey>;
  Key key() const { return {subject_id, contrast, version_id, metric, level_key}; }
};

std::string record_to_json_line(const MorphometricRecord& record);
/// Throws InvalidRecord on malformed lines or non-finite values.
MorphometricRecord record_from_json_line(std::string_view line);

/// Newline-delimited JSON ledger of morphometric records plus a versions
/// manifest. Keys are unique; adding a duplicate is a hard error.
class DriftStore {
 public:
  void add_version(ModelVersion version);
  void add(MorphometricRecord record);
  void merge(const DriftStore& other);

  const std::map<MorphometricRecord::Key, MorphometricRecord>& records() const { return records_; }
  const std::map<std::string, ModelVersion>& versions() const { return versions_; }
  bool has_version(std::string_view id) const;
  std::size_t size() const { return records_.size(); }

  /// Records of one version/metric/level key, ordered by (subject, contrast).
  std::vector<MorphometricRecord> select(std::string_view version, std::string_view metric,
                                         const LevelKey& level_key) const;

  /// Records sorted by key, one JSON object per line.
  std::string to_ndjson() const;
  std::string versions_json() const;
  static DriftStore parse(std::string_view ndjson, std::string_view versions_json = {});

  /// Sibling versions manifest: "store.ndjson" -> "store.versions.json".
  static std::filesystem::path versions_path(const std::filesystem::path& store_path);
  /// Missing files load as an empty store.
  static DriftStore load(const std::filesystem::path& store_path);
  /// Merges into whatever is already on disk (existing records are never
  /// altered) and atomically replaces both files.
  void append_to(const std::filesystem::path& store_path) const;

 private:
  std::map<MorphometricRecord::Key, MorphometricRecord> records_;
  std::map<std::string, ModelVersion> versions_;
};

double sample_std(std::span<const double> values);

/// Sample standard deviation (n-1) of the per-contrast CSA values of one
/// subject and version. Only "area" records at `level_key` whose contrast is
/// in `contrasts` count; fewer than two raises InsufficientContrasts.
double csa_std_across_contrasts(std::span<const MorphometricRecord> records, const std::vector<std::string>& contrasts,
                                const LevelKey& level_key = LevelKey::range("C2-C3"));

struct AgreementPair {
  std::string subject_id;
  double a = 0.0;
  double b = 0.0;
};

struct ContrastAgreement {
  std::string contrast_a;
  std::string contrast_b;
  std::vector<AgreementPair> pairs;  // ordered by subject
  double mean_difference = 0.0;      // mean of a - b
  std::optional<double> pearson_r;   // undefined when either side has zero variance
};

double pearson(std::span<const double> x, std::span<const double> y);

/// Pairs subjects having "area" records at `level_key` for both contrasts.
ContrastAgreement contrast_agreement(std::span<const MorphometricRecord> records, const std::string& contrast_a,
                                     const std::string& contrast_b,
                                     const LevelKey& level_key = LevelKey::range("C2-C3"));

struct ScalingRow {
  LevelKey level_key = LevelKey::range("C2-C3");
  double mean_ratio = 0.0;
  double std_ratio = 0.0;  // sample std, 0 for a single ratio
  std::size_t n = 0;
};

struct ScalingFactorTable {
  std::map<std::string, std::vector<ScalingRow>> rows;  // metric -> rows ordered by level key
  std::vector<MorphometricRecord> unmatched_new;
  std::vector<MorphometricRecord> unmatched_old;

  const ScalingRow* find(std::string_view metric, const LevelKey& key) const;
};

/// new/old ratios matched on (subject, contrast, metric, level key), then
/// averaged without weights over the matches of each (metric, level key).
ScalingFactorTable scaling_factors(std::span<const MorphometricRecord> new_records,
                                   std::span<const MorphometricRecord> old_records);

struct SubjectStd {
  std::string subject_id;
  double std = 0.0;
};

struct PairAgreementStats {
  std::string contrast_a;
  std::string contrast_b;
  std::size_t n = 0;
  double mean_difference = 0.0;
  std::optional<double> pearson_r;
};

struct VersionSummary {
  std::string version_id;
  std::vector<SubjectStd> subject_std;
  double mean_csa_std = 0.0;
  std::vector<std::pair<std::string, double>> contrast_mean_csa;  // contrast order
  std::vector<PairAgreementStats> agreement;
};

struct ContrastDelta {
  std::string contrast;
  double absolute = 0.0;                     // mm^2
  std::optional<double> relative_percent;    // undefined when the base mean is 0
};

struct AgreementDelta {
  std::string contrast_a;
  std::string contrast_b;
  double mean_difference = 0.0;
  std::optional<double> pearson_r;
};

struct Exclusion {
  std::string subject_id;
  std::string reason;
};

struct Violation {
  std::string quantity;
  double observed = 0.0;
  double allowed = 0.0;
  std::string unit;
};

/// Upper bounds on drift. At least one STD bound is required.
struct GatePolicy {
  std::optional<double> max_std_increase_abs;                // mm^2
  std::optional<double> max_std_increase_rel_percent = 10.0;  // %
  double max_contrast_shift_percent = 5.0;                    // %, absolute value

  /// Throws InvalidPolicy for non-positive or missing bounds.
  void validate() const;
};

struct GateVerdict {
  bool pass = true;
  std::vector<Violation> violations;
  GatePolicy policy;
};

struct DriftReport {
  std::string base_version;
  std::string candidate_version;
  std::vector<std::string> contrasts;
  LevelKey level_key = LevelKey::range("C2-C3");
  std::string std_estimator = "sample (n-1)";
  VersionSummary base;
  VersionSummary candidate;
  double delta_mean_csa_std = 0.0;
  std::optional<double> delta_mean_csa_std_percent;
  std::vector<ContrastDelta> contrast_deltas;
  std::vector<AgreementDelta> agreement_deltas;
  std::vector<Exclusion> exclusions;
  std::optional<GateVerdict> verdict;
  std::string config_digest;
};

/// Summaries over subjects having every contrast in both versions; the rest
/// are listed as exclusions.
DriftReport compare_versions(const DriftStore& store, const std::string& base_version,
                             const std::string& candidate_version, const std::vector<std::string>& contrasts,
                             const LevelKey& level_key = LevelKey::range("C2-C3"));

GateVerdict gate(const DriftReport& report, const GatePolicy& policy);

/// One line per violated bound, e.g. "mean CSA STD increase: observed 0.5 mm^2 > allowed 0.2 mm^2".
std::vector<std::string> describe(const GateVerdict& verdict);

std::string report_to_json(const DriftReport& report);
DriftReport report_from_json(std::string_view text);
/// Human summary: one row per quantity with base, candidate and delta.
std::string report_to_csv(const DriftReport& report);

std::string scaling_table_to_csv(const ScalingFactorTable& table);

}  // namespace cordmorph
