#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "cordmorph/mask.hpp"

namespace cordmorph {

enum class Metric { Area, ApDiameter, TransverseDiameter, CompressionRatio, Eccentricity, Solidity };

inline constexpr std::array<Metric, 6> kAllMetrics{Metric::Area,       Metric::ApDiameter,
                                                   Metric::TransverseDiameter, Metric::CompressionRatio,
                                                   Metric::Eccentricity, Metric::Solidity};

std::string_view metric_name(Metric metric);
/// Accepts the names produced by metric_name ("area", "ap_diameter", ...).
Metric parse_metric(std::string_view name);

/// Shape measures of one axial slice. An empty slice has area 0 and every
/// other measure undefined.
struct SliceMorphometrics {
  std::int64_t slice_index = 0;
  std::optional<int> level;
  double area = 0.0;  // mm^2
  std::optional<double> ap_diameter;          // mm
  std::optional<double> transverse_diameter;  // mm
  std::optional<double> compression_ratio;
  std::optional<double> eccentricity;
  std::optional<double> solidity;

  bool empty() const { return !ap_diameter.has_value(); }
  /// Undefined for empty slices, including the area.
  std::optional<double> value(Metric metric) const;
};

/// Vertebral levels, either as a label volume aligned with the mask
/// (value v > 0 means level v) or as a slice -> level table.
class LevelLabels {
 public:
  using Table = std::map<std::int64_t, int>;

  /// Labels must be non-negative integers in RPI orientation.
  static LevelLabels from_volume(const Volume& labels);
  static LevelLabels from_table(Table table);

  /// Level of each slice of the mask. Volumetric labels take the majority
  /// level over the slice's labeled cord voxels, ties to the smaller level.
  std::vector<std::optional<int>> slice_levels(const BinaryMask& mask) const;

 private:
  using LabelGrid = BasicVolume<std::int32_t>;
  explicit LevelLabels(std::variant<LabelGrid, Table> source) : source_(std::move(source)) {}
  std::variant<LabelGrid, Table> source_;
};

/// Occupied voxel count times the in-plane voxel area.
double slice_area(const BinaryMask& mask, std::int64_t slice_index);

SliceMorphometrics shape_metrics(const BinaryMask& mask, std::int64_t slice_index);

/// Per-slice morphometrics for every slice. `area_correction`, when given,
/// holds one multiplicative factor per slice applied to the area only
/// (e.g. a precomputed centerline-angle cosine).
std::vector<SliceMorphometrics> compute_morphometrics(const BinaryMask& mask, const LevelLabels* labels = nullptr,
                                                      std::span<const double> area_correction = {});

/// Mean of the metric over non-empty slices whose level is in `levels`.
double aggregate_over_levels(std::span<const SliceMorphometrics> per_slice, const std::set<int>& levels,
                             Metric metric);
double aggregate_over_levels(std::span<const SliceMorphometrics> per_slice, const LevelLabels& labels,
                             const BinaryMask& mask, const std::set<int>& levels, Metric metric);

double mean_csa_all_slices(std::span<const SliceMorphometrics> per_slice);

/// Empty slices strictly between the first and last non-empty slice.
std::int64_t count_gaps(std::span<const SliceMorphometrics> per_slice);

}  // namespace cordmorph
