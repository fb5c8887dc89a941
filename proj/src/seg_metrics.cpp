#include "cordmorph/seg_metrics.hpp"

#include "cordmorph/csv.hpp"

#include <cmath>
#include <limits>

namespace cordmorph {

namespace {

void require_same_grid(const BinaryMask& a, const BinaryMask& b) {
  if (a.extents() != b.extents() || !a.voxel_dims().isApprox(b.voxel_dims(), 1e-9)) {
    throw Error(ErrorCode::GridMismatch, "masks differ in extents or voxel size");
  }
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// Squared distance transform of one line: out[q] = min_p (spacing*(q-p))^2 + f[p].
// `f` is contiguous; `out` is written with the given stride.
void envelope_1d(const double* f, double* out, std::int64_t n, std::int64_t stride, double spacing,
                 std::vector<std::int64_t>& v, std::vector<double>& z) {
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n) + 1, 0.0);
  std::int64_t k = -1;
  auto pos = [spacing](std::int64_t q) { return spacing * static_cast<double>(q); };
  for (std::int64_t q = 0; q < n; ++q) {
    const double fq = f[q];
    if (fq == kInf) continue;
    while (k >= 0) {
      const std::int64_t p = v[k];
      const double fp = f[p];
      const double s = ((fq + pos(q) * pos(q)) - (fp + pos(p) * pos(p))) / (2.0 * (pos(q) - pos(p)));
      if (s <= z[k]) {
        --k;
      } else {
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
        break;
      }
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
    }
  }
  if (k < 0) {
    for (std::int64_t q = 0; q < n; ++q) out[q * stride] = kInf;
    return;
  }
  std::int64_t j = 0;
  for (std::int64_t q = 0; q < n; ++q) {
    while (z[j + 1] < pos(q)) ++j;
    const double dq = pos(q) - pos(v[j]);
    out[q * stride] = dq * dq + f[v[j]];
  }
}

double mean_distance(const std::vector<std::int64_t>& from, const std::vector<double>& field) {
  double sum = 0.0;
  for (std::int64_t idx : from) sum += field[static_cast<std::size_t>(idx)];
  return sum / static_cast<double>(from.size());
}

}  // namespace

DiceResult dice(const BinaryMask& pred, const BinaryMask& ref) {
  require_same_grid(pred, ref);
  const auto& p = pred.grid().voxels();
  const auto& r = ref.grid().voxels();
  const std::int64_t np = pred.count(), nr = ref.count();
  if (np + nr == 0) return {1.0, true};
  const std::int64_t overlap = (p * r).cast<std::int64_t>().sum();
  return {2.0 * static_cast<double>(overlap) / static_cast<double>(np + nr), false};
}

double rve(const BinaryMask& pred, const BinaryMask& ref) {
  require_same_grid(pred, ref);
  const std::int64_t nr = ref.count();
  if (nr == 0) throw Error(ErrorCode::EmptyReference, "reference mask is empty");
  return 100.0 * static_cast<double>(pred.count() - nr) / static_cast<double>(nr);
}

std::vector<std::int64_t> surface_voxels(const BinaryMask& mask) {
  const Extents& e = mask.extents();
  const auto& g = mask.grid();
  std::vector<std::int64_t> out;
  static constexpr std::array<std::array<int, 3>, 6> kNeighbours{
      {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};
  std::int64_t linear = 0;
  for (std::int64_t k = 0; k < e.nz; ++k) {
    for (std::int64_t j = 0; j < e.ny; ++j) {
      for (std::int64_t i = 0; i < e.nx; ++i, ++linear) {
        if (!g.voxels()[linear]) continue;
        for (const auto& o : kNeighbours) {
          const std::int64_t a = i + o[0], b = j + o[1], c = k + o[2];
          if (!g.contains(a, b, c) || !g(a, b, c)) {
            out.push_back(linear);
            break;
          }
        }
      }
    }
  }
  return out;
}

std::vector<double> distance_to_sites(const Extents& e, const Eigen::Vector3d& d,
                                      const std::vector<std::int64_t>& sites) {
  std::vector<double> field(static_cast<std::size_t>(e.size()), kInf);
  for (std::int64_t s : sites) field[static_cast<std::size_t>(s)] = 0.0;
  if (sites.empty()) return field;

  std::vector<double> line;
  std::vector<std::int64_t> v;
  std::vector<double> z;
  const std::array<std::int64_t, 3> n{e.nx, e.ny, e.nz};
  const std::array<std::int64_t, 3> stride{1, e.nx, e.nx * e.ny};
  for (int axis = 0; axis < 3; ++axis) {
    line.resize(static_cast<std::size_t>(n[axis]));
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    for (std::int64_t u = 0; u < n[a1]; ++u) {
      for (std::int64_t w = 0; w < n[a2]; ++w) {
        double* base = field.data() + u * stride[a1] + w * stride[a2];
        for (std::int64_t q = 0; q < n[axis]; ++q) line[q] = base[q * stride[axis]];
        envelope_1d(line.data(), base, n[axis], stride[axis], d[axis], v, z);
      }
    }
  }
  for (double& x : field) x = std::sqrt(x);
  return field;
}

double asd(const BinaryMask& pred, const BinaryMask& ref) {
  require_same_grid(pred, ref);
  if (pred.count() == 0 || ref.count() == 0) throw Error(ErrorCode::EmptyMask, "average surface distance needs non-empty masks");
  const auto sp = surface_voxels(pred);
  const auto sr = surface_voxels(ref);
  const Eigen::Vector3d d = pred.voxel_dims();
  const double p_to_r = mean_distance(sp, distance_to_sites(pred.extents(), d, sr));
  const double r_to_p = mean_distance(sr, distance_to_sites(pred.extents(), d, sp));
  return 0.5 * (p_to_r + r_to_p);
}

MetricTriple evaluate(const BinaryMask& pred, const BinaryMask& ref) {
  const DiceResult dc = dice(pred, ref);
  if (dc.both_empty) return {1.0, 0.0, 0.0, true};
  return {dc.value, rve(pred, ref), asd(pred, ref), false};
}

std::string evaluation_csv(const std::vector<EvaluationRow>& rows) {
  std::string out = csv::format_row({"subject", "contrast", "model_version", "dice", "rve_percent", "asd_mm", "flags"});
  for (const EvaluationRow& r : rows) {
    out += csv::format_row({r.subject_id, r.contrast, r.version_id, csv::format_number(r.metrics.dice),
                            csv::format_number(r.metrics.rve_percent), csv::format_number(r.metrics.asd_mm),
                            r.metrics.both_empty ? "both_empty" : ""});
  }
  return out;
}

}  // namespace cordmorph
