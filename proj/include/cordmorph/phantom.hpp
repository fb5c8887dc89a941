#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cordmorph/geometry.hpp"
#include "cordmorph/manifest.hpp"

namespace cordmorph {

enum class PhantomKind { EllipticCylinder, TaperedCylinder, Box };

/// Slices [first_slice, last_slice] (inclusive) belong to `level`.
struct LevelSpan {
  int level = 0;
  std::int64_t first_slice = 0;
  std::int64_t last_slice = 0;
};

/// A straight cord-like shape along the slice axis. For a box the semi
/// axes are half-widths.
struct PhantomSpec {
  PhantomKind kind = PhantomKind::EllipticCylinder;
  double ap_semi_axis = 4.0;  // mm
  double rl_semi_axis = 3.0;  // mm
  double length = 10.0;       // mm along the slice axis
  Eigen::Vector3d voxel_dims{1.0, 1.0, 1.0};
  std::optional<double> taper_ratio;  // tip/base scale, TaperedCylinder only
  std::vector<LevelSpan> level_plan;
  std::optional<Extents> grid;                 // auto-sized with a margin when absent
  std::array<std::int64_t, 2> center_shift{};  // whole voxels along (RL, AP)
};

/// Closed-form morphometrics of one occupied slice.
struct AnalyticSlice {
  std::int64_t slice_index = 0;
  double area = 0.0;
  double ap_diameter = 0.0;
  double transverse_diameter = 0.0;
  double compression_ratio = 0.0;
  double eccentricity = 0.0;
  double solidity = 1.0;
};

struct Phantom {
  BinaryMask mask;
  Volume labels;  // level value painted on every voxel of a planned slice
  LevelLabels level_labels;
  std::vector<AnalyticSlice> truth;
  std::int64_t first_slice = 0;  // first occupied slice
  std::int64_t last_slice = 0;   // last occupied slice
};

/// Voxel-centre containment rasterization in RPI. Throws InvalidPhantom on
/// bad parameters and ShapeExceedsGrid when an explicit grid cannot hold the
/// shape plus a one-voxel margin.
Phantom generate(const PhantomSpec& spec);

enum class MorphOp { Dilate, Erode };

struct PerturbResult {
  BinaryMask mask;
  bool emptied = false;  // erosion removed every voxel
};

/// Dilation/erosion by whole 6-connected layers. Out-of-grid counts as
/// background.
PerturbResult perturb(const BinaryMask& mask, MorphOp op, int layers);

/// One-layer boundary change applied to a random fraction of the boundary:
/// dilation candidates are background voxels touching the mask, erosion
/// candidates are surface voxels. Candidates are visited in linear order.
BinaryMask jitter_boundary(const BinaryMask& mask, MorphOp op, double fraction, std::mt19937_64& rng);

/// Systematic per-version change of every mask (e.g. a model that
/// over-segments by one layer).
struct VersionVariant {
  std::string version_id;
  std::optional<MorphOp> op;
  int layers = 1;
};

struct CohortSpec {
  std::size_t n_subjects = 5;
  std::vector<std::string> contrasts{"T2w", "T1w", "T2*w", "MT-on", "GRE-T1w", "DWI"};
  /// Fraction of boundary voxels flipped per contrast; 0 gives identical
  /// masks across contrasts.
  double jitter_fraction = 0.0;
  /// Relative per-subject spread of the semi axes.
  double anatomy_spread = 0.1;
  std::uint64_t seed = 1;
  std::vector<VersionVariant> versions{{"v1", std::nullopt, 1}};
  PhantomSpec base = default_cohort_phantom();

  static PhantomSpec default_cohort_phantom();
};

/// Writes one mask per (subject, version, contrast), one label volume per
/// subject and manifest.csv under `out_dir`. Randomness comes from
/// std::mt19937_64 seeded with (seed, subject, contrast); equal seeds give
/// byte-identical outputs.
DatasetManifest make_cohort(const CohortSpec& spec, const std::filesystem::path& out_dir);

/// File-name safe form of a contrast label ("T2*w" -> "T2starw").
std::string contrast_file_tag(std::string_view contrast);

}  // namespace cordmorph
