#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cordmorph/mask.hpp"

namespace cordmorph {

struct DiceResult {
  double value = 0.0;
  bool both_empty = false;  // vacuous agreement, reported as 1.0
};

/// 2|P∩R| / (|P|+|R|); both-empty masks give 1.0 with the flag set.
DiceResult dice(const BinaryMask& pred, const BinaryMask& ref);

/// 100 (|P| - |R|) / |R|; negative under-segments.
double rve(const BinaryMask& pred, const BinaryMask& ref);

/// 1-voxels with a 0-valued or out-of-grid 6-neighbour, as linear indices
/// in ascending order.
std::vector<std::int64_t> surface_voxels(const BinaryMask& mask);

/// Symmetric average surface distance in mm between surface voxel centres:
/// (mean_{p∈∂P} d(p,∂R) + mean_{r∈∂R} d(r,∂P)) / 2.
double asd(const BinaryMask& pred, const BinaryMask& ref);

/// Exact Euclidean distance (mm) from every voxel to the nearest voxel of
/// `sites`, honouring anisotropic voxel sizes. Separable lower-envelope
/// transform; returns +inf everywhere when `sites` is empty.
std::vector<double> distance_to_sites(const Extents& extents, const Eigen::Vector3d& voxel_dims,
                                      const std::vector<std::int64_t>& sites);

struct MetricTriple {
  double dice = 0.0;
  double rve_percent = 0.0;
  double asd_mm = 0.0;
  bool both_empty = false;
};

/// All three metrics on the same grid. Two empty masks give the vacuous
/// (1, 0, 0) with both_empty set; one empty mask is an error.
MetricTriple evaluate(const BinaryMask& pred, const BinaryMask& ref);

struct EvaluationRow {
  std::string subject_id;
  std::string contrast;
  std::string version_id;
  MetricTriple metrics;
};

/// subject, contrast, model_version, dice, rve_percent, asd_mm, flags
std::string evaluation_csv(const std::vector<EvaluationRow>& rows);

}  // namespace cordmorph
