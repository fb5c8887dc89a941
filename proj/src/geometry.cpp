#include "cordmorph/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cordmorph {

namespace {

struct Point {
  std::int64_t x, y;
  auto operator<=>(const Point&) const = default;
};

std::int64_t cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

/// Twice the area of the convex hull (monotone chain + shoelace).
std::int64_t hull_area_twice(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return 0;
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  std::int64_t twice = 0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Point& a = hull[i];
    const Point& b = hull[(i + 1) % hull.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return std::abs(twice);
}

void check_slice(const BinaryMask& mask, std::int64_t slice_index) {
  if (slice_index < 0 || slice_index >= mask.extents().nz) {
    throw Error(ErrorCode::InvalidArgument, "slice index " + std::to_string(slice_index) + " out of range");
  }
}

}  // namespace

std::string_view metric_name(Metric metric) {
  switch (metric) {
    case Metric::Area: return "area";
    case Metric::ApDiameter: return "ap_diameter";
    case Metric::TransverseDiameter: return "transverse_diameter";
    case Metric::CompressionRatio: return "compression_ratio";
    case Metric::Eccentricity: return "eccentricity";
    case Metric::Solidity: return "solidity";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  for (Metric m : kAllMetrics) {
    if (metric_name(m) == name) return m;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown metric '" + std::string(name) + "'");
}

std::optional<double> SliceMorphometrics::value(Metric metric) const {
  if (empty()) return std::nullopt;
  switch (metric) {
    case Metric::Area: return area;
    case Metric::ApDiameter: return ap_diameter;
    case Metric::TransverseDiameter: return transverse_diameter;
    case Metric::CompressionRatio: return compression_ratio;
    case Metric::Eccentricity: return eccentricity;
    case Metric::Solidity: return solidity;
  }
  return std::nullopt;
}

LevelLabels LevelLabels::from_volume(const Volume& labels) {
  const auto& v = labels.voxels();
  if ((v < 0.0).any() || (v != v.floor()).any() || (v > 1e6).any()) {
    throw Error(ErrorCode::InvalidArgument, "level labels must be non-negative integers");
  }
  if (labels.orientation() != OrientationCode::RPI()) {
    throw Error(ErrorCode::NotRPI, "label orientation is " + labels.orientation().str() + "; reorient to RPI first");
  }
  return LevelLabels(labels.with_voxels<std::int32_t>(v.cast<std::int32_t>()));
}

LevelLabels LevelLabels::from_table(Table table) {
  for (const auto& [slice, level] : table) {
    if (level < 0) throw Error(ErrorCode::InvalidArgument, "level labels must be non-negative");
  }
  return LevelLabels(std::move(table));
}

std::vector<std::optional<int>> LevelLabels::slice_levels(const BinaryMask& mask) const {
  const Extents& e = mask.extents();
  std::vector<std::optional<int>> levels(static_cast<std::size_t>(e.nz));
  if (const auto* table = std::get_if<Table>(&source_)) {
    for (std::int64_t k = 0; k < e.nz; ++k) {
      if (auto it = table->find(k); it != table->end() && it->second > 0) levels[k] = it->second;
    }
    return levels;
  }
  const auto& grid = std::get<LabelGrid>(source_);
  if (grid.extents() != e) throw Error(ErrorCode::GridMismatch, "label volume extents differ from the mask");
  for (std::int64_t k = 0; k < e.nz; ++k) {
    std::map<int, std::int64_t> votes;
    for (std::int64_t j = 0; j < e.ny; ++j) {
      for (std::int64_t i = 0; i < e.nx; ++i) {
        if (mask(i, j, k) && grid(i, j, k) > 0) ++votes[grid(i, j, k)];
      }
    }
    std::int64_t best = 0;
    for (const auto& [level, n] : votes) {  // ascending levels, so ties keep the smaller
      if (n > best) {
        best = n;
        levels[k] = level;
      }
    }
  }
  return levels;
}

double slice_area(const BinaryMask& mask, std::int64_t slice_index) {
  check_slice(mask, slice_index);
  const Extents& e = mask.extents();
  const Eigen::Vector3d d = mask.voxel_dims();
  std::int64_t n = 0;
  for (std::int64_t j = 0; j < e.ny; ++j) {
    for (std::int64_t i = 0; i < e.nx; ++i) n += mask(i, j, slice_index) ? 1 : 0;
  }
  return static_cast<double>(n) * d[0] * d[1];
}

SliceMorphometrics shape_metrics(const BinaryMask& mask, std::int64_t slice_index) {
  check_slice(mask, slice_index);
  const Extents& e = mask.extents();
  const Eigen::Vector3d d = mask.voxel_dims();
  SliceMorphometrics out;
  out.slice_index = slice_index;

  std::int64_t count = 0;
  std::int64_t min_i = e.nx, max_i = -1, min_j = e.ny, max_j = -1;
  for (std::int64_t j = 0; j < e.ny; ++j) {
    for (std::int64_t i = 0; i < e.nx; ++i) {
      if (!mask(i, j, slice_index)) continue;
      ++count;
      min_i = std::min(min_i, i);
      max_i = std::max(max_i, i);
      min_j = std::min(min_j, j);
      max_j = std::max(max_j, j);
    }
  }
  if (count == 0) return out;

  // Integer moments relative to the bounding-box corner keep the result
  // exactly translation invariant.
  std::int64_t si = 0, sj = 0, sii = 0, sjj = 0, sij = 0;
  std::vector<Point> corners;
  corners.reserve(static_cast<std::size_t>(4 * (max_j - min_j + 1)));
  for (std::int64_t j = min_j; j <= max_j; ++j) {
    std::int64_t row_lo = -1, row_hi = -1;
    for (std::int64_t i = min_i; i <= max_i; ++i) {
      if (!mask(i, j, slice_index)) continue;
      const std::int64_t di = i - min_i, dj = j - min_j;
      si += di;
      sj += dj;
      sii += di * di;
      sjj += dj * dj;
      sij += di * dj;
      if (row_lo < 0) row_lo = di;
      row_hi = di;
    }
    if (row_lo < 0) continue;
    const std::int64_t dj = j - min_j;
    corners.push_back({row_lo, dj});
    corners.push_back({row_lo, dj + 1});
    corners.push_back({row_hi + 1, dj});
    corners.push_back({row_hi + 1, dj + 1});
  }

  const double n = static_cast<double>(count);
  out.area = n * d[0] * d[1];
  out.transverse_diameter = static_cast<double>(max_i - min_i + 1) * d[0];
  out.ap_diameter = static_cast<double>(max_j - min_j + 1) * d[1];
  out.compression_ratio = *out.ap_diameter / *out.transverse_diameter;

  const double mi = static_cast<double>(si) / n, mj = static_cast<double>(sj) / n;
  Eigen::Matrix2d cov;
  cov(0, 0) = (static_cast<double>(sii) / n - mi * mi) * d[0] * d[0];
  cov(1, 1) = (static_cast<double>(sjj) / n - mj * mj) * d[1] * d[1];
  cov(0, 1) = cov(1, 0) = (static_cast<double>(sij) / n - mi * mj) * d[0] * d[1];
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov, Eigen::EigenvaluesOnly);
  const double lmin = std::max(eig.eigenvalues()[0], 0.0);
  const double lmax = std::max(eig.eigenvalues()[1], 0.0);
  out.eccentricity = (lmax <= 0.0 || lmax == lmin) ? 0.0 : std::sqrt(std::max(0.0, 1.0 - lmin / lmax));

  const std::int64_t hull2 = hull_area_twice(std::move(corners));
  out.solidity = std::min(1.0, 2.0 * n / static_cast<double>(hull2));
  return out;
}

std::vector<SliceMorphometrics> compute_morphometrics(const BinaryMask& mask, const LevelLabels* labels,
                                                      std::span<const double> area_correction) {
  const std::int64_t nz = mask.extents().nz;
  if (!area_correction.empty() && static_cast<std::int64_t>(area_correction.size()) != nz) {
    throw Error(ErrorCode::InvalidArgument, "area correction needs one factor per slice");
  }
  std::vector<std::optional<int>> levels;
  if (labels) levels = labels->slice_levels(mask);
  std::vector<SliceMorphometrics> out;
  out.reserve(static_cast<std::size_t>(nz));
  for (std::int64_t k = 0; k < nz; ++k) {
    SliceMorphometrics s = shape_metrics(mask, k);
    if (labels) s.level = levels[k];
    if (!area_correction.empty()) s.area *= area_correction[k];
    out.push_back(s);
  }
  return out;
}

double aggregate_over_levels(std::span<const SliceMorphometrics> per_slice, const std::set<int>& levels,
                             Metric metric) {
  double sum = 0.0;
  std::int64_t n = 0;
  for (const SliceMorphometrics& s : per_slice) {
    if (!s.level || !levels.contains(*s.level)) continue;
    if (const auto v = s.value(metric)) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorCode::NoQualifyingSlices, "no non-empty slice lies within the requested levels");
  return sum / static_cast<double>(n);
}

double aggregate_over_levels(std::span<const SliceMorphometrics> per_slice, const LevelLabels& labels,
                             const BinaryMask& mask, const std::set<int>& levels, Metric metric) {
  const auto slice_levels = labels.slice_levels(mask);
  std::vector<SliceMorphometrics> relabeled(per_slice.begin(), per_slice.end());
  for (SliceMorphometrics& s : relabeled) {
    s.level = (s.slice_index >= 0 && s.slice_index < static_cast<std::int64_t>(slice_levels.size()))
                  ? slice_levels[s.slice_index]
                  : std::nullopt;
  }
  return aggregate_over_levels(relabeled, levels, metric);
}

double mean_csa_all_slices(std::span<const SliceMorphometrics> per_slice) {
  double sum = 0.0;
  std::int64_t n = 0;
  for (const SliceMorphometrics& s : per_slice) {
    if (s.empty()) continue;
    sum += s.area;
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::NoQualifyingSlices, "mask has no non-empty slice");
  return sum / static_cast<double>(n);
}

std::int64_t count_gaps(std::span<const SliceMorphometrics> per_slice) {
  auto first = std::find_if(per_slice.begin(), per_slice.end(), [](const auto& s) { return !s.empty(); });
  auto last = std::find_if(per_slice.rbegin(), per_slice.rend(), [](const auto& s) { return !s.empty(); });
  if (first == per_slice.end()) return 0;
  return std::count_if(first, last.base(), [](const auto& s) { return s.empty(); });
}

}  // namespace cordmorph
