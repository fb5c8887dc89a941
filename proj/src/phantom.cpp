#include "cordmorph/phantom.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <thread>

#include "cordmorph/nifti.hpp"
#include "cordmorph/seg_metrics.hpp"

namespace cordmorph {

namespace {

constexpr std::int64_t kInPlaneMargin = 3;
constexpr std::int64_t kSliceMargin = 2;

constexpr std::array<std::array<int, 3>, 6> kNeighbours{
    {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};

void validate(const PhantomSpec& spec) {
  if (!(spec.ap_semi_axis > 0.0 && spec.rl_semi_axis > 0.0 && spec.length > 0.0)) {
    throw Error(ErrorCode::InvalidPhantom, "semi axes and length must be positive");
  }
  if (!(spec.voxel_dims.array() > 0.0).all()) throw Error(ErrorCode::InvalidPhantom, "voxel dims must be positive");
  if (spec.taper_ratio && !(*spec.taper_ratio > 0.0 && *spec.taper_ratio <= 1.0)) {
    throw Error(ErrorCode::InvalidPhantom, "taper ratio must lie in (0, 1]");
  }
  for (const LevelSpan& s : spec.level_plan) {
    if (s.level <= 0 || s.first_slice > s.last_slice) throw Error(ErrorCode::InvalidPhantom, "bad level span");
  }
}

double taper_scale(const PhantomSpec& spec, std::int64_t k, std::int64_t first, std::int64_t n_cord) {
  if (spec.kind != PhantomKind::TaperedCylinder || !spec.taper_ratio) return 1.0;
  const double t = (static_cast<double>(k - first) + 0.5) / static_cast<double>(n_cord);
  return 1.0 + (*spec.taper_ratio - 1.0) * t;
}

bool is_set(const MaskGrid::Storage& v, std::int64_t idx) { return v[idx] != 0; }

MaskGrid::Storage dilate_once(const MaskGrid& g) {
  const Extents& e = g.extents();
  MaskGrid::Storage out = g.voxels();
  std::int64_t linear = 0;
  for (std::int64_t k = 0; k < e.nz; ++k)
    for (std::int64_t j = 0; j < e.ny; ++j)
      for (std::int64_t i = 0; i < e.nx; ++i, ++linear) {
        if (!is_set(g.voxels(), linear)) continue;
        for (const auto& o : kNeighbours) {
          const std::int64_t a = i + o[0], b = j + o[1], c = k + o[2];
          if (g.contains(a, b, c)) out[g.linear_index(a, b, c)] = 1;
        }
      }
  return out;
}

MaskGrid::Storage erode_once(const MaskGrid& g) {
  MaskGrid::Storage out = g.voxels();
  for (std::int64_t idx : surface_voxels(BinaryMask(g))) out[idx] = 0;
  return out;
}

/// Background voxels with at least one 6-neighbour in the mask, ascending.
std::vector<std::int64_t> outer_shell(const MaskGrid& g) {
  const MaskGrid::Storage grown = dilate_once(g);
  std::vector<std::int64_t> out;
  for (Eigen::Index n = 0; n < grown.size(); ++n) {
    if (grown[n] && !g.voxels()[n]) out.push_back(n);
  }
  return out;
}

}  // namespace

Phantom generate(const PhantomSpec& spec) {
  validate(spec);
  const Eigen::Vector3d& d = spec.voxel_dims;
  // taper only shrinks, so the base cross-section bounds every slice
  const double half_rl = spec.rl_semi_axis / d[0];
  const double half_ap = spec.ap_semi_axis / d[1];
  const auto n_cord = std::max<std::int64_t>(1, std::llround(spec.length / d[2]));

  Extents e;
  if (spec.grid) {
    e = *spec.grid;
    if (e.nx <= 0 || e.ny <= 0 || e.nz <= 0) throw Error(ErrorCode::InvalidPhantom, "grid extents must be positive");
  } else {
    e.nx = 2 * static_cast<std::int64_t>(std::ceil(half_rl)) + 2 * (kInPlaneMargin + std::abs(spec.center_shift[0]));
    e.ny = 2 * static_cast<std::int64_t>(std::ceil(half_ap)) + 2 * (kInPlaneMargin + std::abs(spec.center_shift[1]));
    e.nz = n_cord + 2 * kSliceMargin;
  }
  const double c0 = static_cast<double>(e.nx) / 2.0 - 0.5 + static_cast<double>(spec.center_shift[0]);
  const double c1 = static_cast<double>(e.ny) / 2.0 - 0.5 + static_cast<double>(spec.center_shift[1]);
  const std::int64_t first = (e.nz - n_cord) / 2;
  const std::int64_t last = first + n_cord - 1;
  if (c0 - half_rl <= 0.5 || c0 + half_rl >= static_cast<double>(e.nx) - 1.5 || c1 - half_ap <= 0.5 ||
      c1 + half_ap >= static_cast<double>(e.ny) - 1.5 || first < 1 || last > e.nz - 2) {
    throw Error(ErrorCode::ShapeExceedsGrid, "shape plus a one-voxel margin does not fit the grid");
  }

  MaskGrid::Storage voxels = MaskGrid::Storage::Zero(e.size());
  std::vector<AnalyticSlice> truth;
  for (std::int64_t k = first; k <= last; ++k) {
    const double s = taper_scale(spec, k, first, n_cord);
    const double a = spec.ap_semi_axis * s, b = spec.rl_semi_axis * s;
    for (std::int64_t j = 0; j < e.ny; ++j) {
      const double y = (static_cast<double>(j) - c1) * d[1];
      for (std::int64_t i = 0; i < e.nx; ++i) {
        const double x = (static_cast<double>(i) - c0) * d[0];
        const bool inside = spec.kind == PhantomKind::Box ? (std::abs(x) <= b && std::abs(y) <= a)
                                                          : (x * x) / (b * b) + (y * y) / (a * a) <= 1.0;
        if (inside) voxels[i + e.nx * (j + e.ny * k)] = 1;
      }
    }
    AnalyticSlice t;
    t.slice_index = k;
    t.area = spec.kind == PhantomKind::Box ? 4.0 * a * b : std::numbers::pi * a * b;
    t.ap_diameter = 2.0 * a;
    t.transverse_diameter = 2.0 * b;
    t.compression_ratio = a / b;
    const double ratio = std::min(a, b) / std::max(a, b);
    t.eccentricity = std::sqrt(1.0 - ratio * ratio);
    t.solidity = 1.0;
    truth.push_back(t);
  }

  const Affine affine = diagonal_affine(d, Eigen::Vector3d(1.0, -1.0, -1.0),
                                        Eigen::Vector3d(-0.5 * static_cast<double>(e.nx - 1) * d[0],
                                                        0.5 * static_cast<double>(e.ny - 1) * d[1],
                                                        0.5 * static_cast<double>(e.nz - 1) * d[2]));
  Volume::Storage labels = Volume::Storage::Zero(e.size());
  for (const LevelSpan& span : spec.level_plan) {
    for (std::int64_t k = std::max<std::int64_t>(0, span.first_slice); k <= std::min(span.last_slice, e.nz - 1); ++k) {
      labels.segment(k * e.nx * e.ny, e.nx * e.ny).setConstant(span.level);
    }
  }
  Volume label_volume(e, std::move(labels), affine);
  LevelLabels level_labels = LevelLabels::from_volume(label_volume);
  return Phantom{BinaryMask(MaskGrid(e, std::move(voxels), affine)), std::move(label_volume), std::move(level_labels),
                 std::move(truth), first, last};
}

PerturbResult perturb(const BinaryMask& mask, MorphOp op, int layers) {
  if (layers < 1) throw Error(ErrorCode::InvalidArgument, "perturbation needs at least one layer");
  MaskGrid grid = mask.grid();
  for (int l = 0; l < layers; ++l) {
    grid = grid.with_voxels(op == MorphOp::Dilate ? dilate_once(grid) : erode_once(grid));
  }
  BinaryMask out(std::move(grid));
  const bool emptied = out.count() == 0;
  return {std::move(out), emptied};
}

BinaryMask jitter_boundary(const BinaryMask& mask, MorphOp op, double fraction, std::mt19937_64& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error(ErrorCode::InvalidArgument, "jitter fraction must lie in [0, 1]");
  if (fraction == 0.0) return mask;
  const MaskGrid& g = mask.grid();
  const std::vector<std::int64_t> candidates = op == MorphOp::Dilate ? outer_shell(g) : surface_voxels(mask);
  MaskGrid::Storage out = g.voxels();
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (std::int64_t idx : candidates) {
    if (uniform(rng) < fraction) out[idx] = op == MorphOp::Dilate ? 1 : 0;
  }
  return BinaryMask(g.with_voxels(std::move(out)));
}

PhantomSpec CohortSpec::default_cohort_phantom() {
  PhantomSpec spec;
  spec.kind = PhantomKind::EllipticCylinder;
  spec.ap_semi_axis = 3.8;
  spec.rl_semi_axis = 5.8;
  spec.length = 24.0;
  spec.voxel_dims = Eigen::Vector3d(0.5, 0.5, 1.0);
  return spec;
}

std::string contrast_file_tag(std::string_view contrast) {
  std::string tag;
  for (char c : contrast) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-') {
      tag.push_back(c);
    } else if (c == '*') {
      tag += "star";
    }
  }
  return tag.empty() ? "contrast" : tag;
}

DatasetManifest make_cohort(const CohortSpec& spec, const std::filesystem::path& out_dir) {
  if (spec.n_subjects == 0 || spec.contrasts.empty() || spec.versions.empty()) {
    throw Error(ErrorCode::InvalidPhantom, "cohort needs subjects, contrasts and versions");
  }
  if (!(spec.anatomy_spread >= 0.0 && spec.anatomy_spread < 1.0)) {
    throw Error(ErrorCode::InvalidPhantom, "anatomy spread must lie in [0, 1)");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IOFailure, "cannot create " + out_dir.string() + ": " + ec.message());

  auto subject_id = [](std::size_t s) {
    std::string n = std::to_string(s + 1);
    return "sub-" + std::string(n.size() < 3 ? 3 - n.size() : 0, '0') + n;
  };

  // rows[s] holds subject s's rows in (version, contrast) order
  std::vector<std::vector<ManifestRow>> rows(spec.n_subjects);
  auto build_subject = [&](std::size_t s) {
    const std::string sid = subject_id(s);
    std::seed_seq anatomy_seed{spec.seed, static_cast<std::uint64_t>(s), std::uint64_t{0xA5A5}};
    std::mt19937_64 anatomy_rng(anatomy_seed);
    std::uniform_real_distribution<double> spread(-spec.anatomy_spread, spec.anatomy_spread);
    PhantomSpec ps = spec.base;
    ps.ap_semi_axis *= 1.0 + spread(anatomy_rng);
    ps.rl_semi_axis *= 1.0 + spread(anatomy_rng);
    if (ps.level_plan.empty()) {
      // superior third C2, middle C3, inferior C4 (slice index grows inferiorly)
      const auto n_cord = std::max<std::int64_t>(1, std::llround(ps.length / ps.voxel_dims[2]));
      const std::int64_t first = kSliceMargin;
      const std::int64_t third = std::max<std::int64_t>(1, n_cord / 3);
      ps.level_plan = {{2, first, first + third - 1}, {3, first + third, first + 2 * third - 1},
                       {4, first + 2 * third, first + n_cord - 1}};
    }
    // grow the grid so version dilation never reaches the border
    const Phantom ph = generate(ps);
    const Extents& e = ph.mask.extents();
    PhantomSpec padded = ps;
    padded.grid = Extents{e.nx + 4, e.ny + 4, e.nz + 4};
    for (LevelSpan& span : padded.level_plan) {
      span.first_slice += 2;
      span.last_slice += 2;
    }
    const Phantom base = generate(padded);

    const std::filesystem::path labels_rel = std::filesystem::path(sid) / (sid + "_labels.nii.gz");
    write_nifti_file(base.labels, out_dir / labels_rel, Datatype::UInt8);

    for (const VersionVariant& version : spec.versions) {
      BinaryMask version_mask = base.mask;
      if (version.op) version_mask = perturb(base.mask, *version.op, version.layers).mask;
      for (std::size_t c = 0; c < spec.contrasts.size(); ++c) {
        std::seed_seq seed{spec.seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(c)};
        std::mt19937_64 rng(seed);
        const MorphOp direction = std::bernoulli_distribution(0.5)(rng) ? MorphOp::Dilate : MorphOp::Erode;
        const BinaryMask mask = jitter_boundary(version_mask, direction, spec.jitter_fraction, rng);
        const std::filesystem::path rel =
            std::filesystem::path(sid) /
            (sid + "_" + contrast_file_tag(spec.contrasts[c]) + "_" + version.version_id + "_seg.nii.gz");
        write_nifti_file(mask.to_volume(), out_dir / rel, Datatype::UInt8);
        rows[s].push_back(ManifestRow{sid, spec.contrasts[c], version.version_id, rel, labels_rel, std::nullopt, std::nullopt});
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(spec.n_subjects, std::thread::hardware_concurrency()));
  std::vector<std::exception_ptr> failures(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t s = w; s < spec.n_subjects; s += workers) build_subject(s);
        } catch (...) {
          failures[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  for (auto& subject_rows : rows) {
    for (auto& row : subject_rows) manifest.rows.push_back(std::move(row));
  }
  manifest.write(out_dir / "manifest.csv");
  return manifest;
}

}  // namespace cordmorph
