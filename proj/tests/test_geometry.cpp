#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cordmorph/error.hpp"
#include "cordmorph/geometry.hpp"
#include "cordmorph/phantom.hpp"
#include "support.hpp"

using namespace cordmorph;
using testing::mask_from;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::InvalidArgument;
}

// Filled rectangle: `ap` voxels along axis 1, `rl` along axis 0, on slice 0.
BinaryMask rectangle(int ap, int rl, const Eigen::Vector3d& dims = Eigen::Vector3d::Ones()) {
  std::vector<Index3> on;
  for (int j = 0; j < ap; ++j)
    for (int i = 0; i < rl; ++i) on.push_back({i + 1, j + 1, 0});
  return mask_from(Extents{rl + 2, ap + 2, 1}, on, dims);
}

SliceMorphometrics with_area(std::int64_t slice, int level, double area) {
  SliceMorphometrics s;
  s.slice_index = slice;
  s.level = level;
  s.area = area;
  s.ap_diameter = s.transverse_diameter = s.compression_ratio = 1.0;
  s.eccentricity = 0.0;
  s.solidity = 1.0;
  return s;
}

}  // namespace

TEST_CASE("binarize is inclusive at the threshold") {
  const Volume half(Extents{3, 3, 3}, 0.5, testing::rpi_affine());
  CHECK(binarize(half).count() == 27);
  const Volume below(Extents{3, 3, 3}, 0.49, testing::rpi_affine());
  CHECK(binarize(below).count() == 0);
  const Volume ramp(Extents{11, 1, 1}, Volume::Storage::LinSpaced(11, 0.0, 1.0), testing::rpi_affine());
  CHECK(binarize(ramp).count() == 6);
}

TEST_CASE("binarize guards orientation and threshold") {
  const Volume ras(Extents{2, 2, 2}, 1.0, Affine::Identity());
  CHECK(code_of([&] { binarize(ras); }) == ErrorCode::NotRPI);
  const Volume rpi(Extents{2, 2, 2}, 1.0, testing::rpi_affine());
  CHECK(code_of([&] { binarize(rpi, 0.0); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { binarize(rpi, 1.0); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { BinaryMask::from_volume(Volume(Extents{1, 1, 1}, 2.0, testing::rpi_affine())); }) ==
        ErrorCode::NotBinary);
}

TEST_CASE("slice area examples") {
  const BinaryMask empty = testing::empty_mask(Extents{4, 4, 2});
  CHECK(slice_area(empty, 0) == 0.0);
  const Volume full(Extents{10, 10, 1}, 1.0, testing::rpi_affine(Eigen::Vector3d(0.5, 0.5, 1.0)));
  CHECK(slice_area(binarize(full), 0) == 25.0);
}

TEST_CASE("single voxel shape metrics") {
  const BinaryMask m = mask_from(Extents{3, 3, 1}, {{1, 1, 0}}, Eigen::Vector3d(0.5, 0.5, 1.0));
  const SliceMorphometrics s = shape_metrics(m, 0);
  CHECK(s.area == 0.25);
  CHECK(*s.ap_diameter == 0.5);
  CHECK(*s.transverse_diameter == 0.5);
  CHECK(*s.compression_ratio == 1.0);
  CHECK(*s.eccentricity == 0.0);
  CHECK(*s.solidity == 1.0);
}

TEST_CASE("filled rectangle shape metrics") {
  const SliceMorphometrics s = shape_metrics(rectangle(8, 4), 0);
  CHECK(s.area == 32.0);
  CHECK(*s.ap_diameter == 8.0);
  CHECK(*s.transverse_diameter == 4.0);
  CHECK(*s.compression_ratio == 2.0);
  CHECK(*s.solidity == 1.0);
  // eccentricity of a uniform 8x4 voxel grid: variances (n^2-1)/12 per axis
  CHECK(*s.eccentricity == doctest::Approx(std::sqrt(1.0 - 15.0 / 63.0)).epsilon(1e-12));
}

TEST_CASE("empty slice yields the empty marker") {
  const SliceMorphometrics s = shape_metrics(testing::empty_mask(Extents{4, 4, 1}), 0);
  CHECK(s.empty());
  CHECK(s.area == 0.0);
  CHECK_FALSE(s.compression_ratio.has_value());
  CHECK_FALSE(s.value(Metric::Area).has_value());
}

TEST_CASE("L-shape solidity from the corner hull") {
  // cells (0,0),(1,0),(2,0),(0,1),(0,2); corner hull (0,0),(3,0),(3,1),(1,3),(0,3) has shoelace area 7
  const BinaryMask m = mask_from(Extents{5, 5, 1}, {{1, 1, 0}, {2, 1, 0}, {3, 1, 0}, {1, 2, 0}, {1, 3, 0}});
  const SliceMorphometrics s = shape_metrics(m, 0);
  CHECK(s.area == 5.0);
  CHECK(*s.solidity == doctest::Approx(5.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("rasterized ellipse matches analytic values") {
  PhantomSpec spec;
  spec.ap_semi_axis = 4.0;
  spec.rl_semi_axis = 3.0;
  spec.voxel_dims = Eigen::Vector3d(0.25, 0.25, 1.0);
  const Phantom p = generate(spec);
  const double truth = std::numbers::pi * 12.0;
  for (std::int64_t k = p.first_slice; k <= p.last_slice; ++k) {
    const SliceMorphometrics s = shape_metrics(p.mask, k);
    CHECK(std::abs(s.area - truth) / truth < 0.02);
    CHECK(std::abs(*s.compression_ratio - 4.0 / 3.0) / (4.0 / 3.0) < 0.05);
    CHECK(std::abs(*s.eccentricity - std::sqrt(1.0 - 9.0 / 16.0)) < 0.05);
    // corner-hull solidity from an independent convex hull of the same raster
    CHECK(*s.solidity == doctest::Approx(0.9617834394904459).epsilon(1e-12));
  }
}

TEST_CASE("ellipse solidity approaches one as voxels shrink") {
  double previous = 0.0;
  for (double d : {0.5, 0.25, 0.125, 0.0625}) {
    PhantomSpec spec;
    spec.length = 2.0;
    spec.voxel_dims = Eigen::Vector3d(d, d, 1.0);
    const Phantom p = generate(spec);
    const double solidity = *shape_metrics(p.mask, p.first_slice).solidity;
    CHECK(solidity > previous);
    CHECK(solidity < 1.0);
    previous = solidity;
  }
  CHECK(previous >= 0.98);
}

TEST_CASE("area error shrinks with resolution") {
  const double truth = std::numbers::pi * 12.0;
  double previous = 1e9;
  for (double d : {1.0, 0.5, 0.25}) {
    PhantomSpec spec;
    spec.voxel_dims = Eigen::Vector3d(d, d, 1.0);
    const Phantom p = generate(spec);
    const double err = std::abs(slice_area(p.mask, (p.first_slice + p.last_slice) / 2) - truth);
    CHECK(err < previous);
    previous = err;
  }
}

TEST_CASE("aggregation over levels") {
  std::vector<SliceMorphometrics> constant{with_area(0, 2, 70), with_area(1, 3, 70)};
  CHECK(aggregate_over_levels(constant, {2, 3}, Metric::Area) == 70.0);
  std::vector<SliceMorphometrics> mixed{with_area(0, 2, 60), with_area(1, 3, 80), with_area(2, 4, 100)};
  CHECK(aggregate_over_levels(mixed, {2, 3}, Metric::Area) == 70.0);
  CHECK(code_of([&] { aggregate_over_levels(mixed, {7}, Metric::Area); }) == ErrorCode::NoQualifyingSlices);
}

TEST_CASE("phantom level plan aggregates to a hand enumeration") {
  PhantomSpec spec;
  spec.kind = PhantomKind::TaperedCylinder;
  spec.taper_ratio = 0.6;
  spec.length = 12.0;
  spec.voxel_dims = Eigen::Vector3d(0.5, 0.5, 1.0);
  const Phantom probe = generate(spec);
  const std::int64_t f = probe.first_slice;
  spec.level_plan = {{2, f, f + 3}, {3, f + 4, f + 7}, {4, f + 8, f + 11}};
  const Phantom p = generate(spec);
  const auto per_slice = compute_morphometrics(p.mask, &p.level_labels);
  double sum = 0.0;
  int n = 0;
  for (std::int64_t k = f; k <= f + 7; ++k, ++n) sum += slice_area(p.mask, k);
  CHECK(aggregate_over_levels(per_slice, {2, 3}, Metric::Area) == doctest::Approx(sum / n).epsilon(1e-12));
  CHECK(aggregate_over_levels(per_slice, p.level_labels, p.mask, {2, 3}, Metric::Area) ==
        doctest::Approx(sum / n).epsilon(1e-12));
  CHECK(per_slice[f].level == 2);
  CHECK(per_slice[f + 11].level == 4);
}

TEST_CASE("volumetric labels use the majority, ties to the smaller level") {
  const BinaryMask m = mask_from(Extents{4, 1, 2}, {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {0, 0, 1}, {1, 0, 1}});
  Volume::Storage lab(8);
  lab << 3, 3, 2, 0, 5, 4, 0, 0;
  const LevelLabels labels = LevelLabels::from_volume(Volume(Extents{4, 1, 2}, lab, testing::rpi_affine()));
  const auto levels = labels.slice_levels(m);
  CHECK(levels[0] == 3);
  CHECK(levels[1] == 4);
  CHECK(code_of([] {
          LevelLabels::from_volume(Volume(Extents{1, 1, 1}, 2.5, testing::rpi_affine()));
        }) == ErrorCode::InvalidArgument);
}

TEST_CASE("mean over all slices and gaps") {
  std::vector<SliceMorphometrics> two{with_area(0, 2, 30), with_area(1, 2, 50)};
  CHECK(mean_csa_all_slices(two) == 40.0);

  PhantomSpec spec;
  spec.kind = PhantomKind::Box;
  spec.ap_semi_axis = 2.0;
  spec.rl_semi_axis = 2.0;
  spec.length = 6.0;
  const Phantom capped = generate(spec);
  const auto per_slice = compute_morphometrics(capped.mask);
  CHECK(per_slice.front().empty());
  CHECK(per_slice.back().empty());
  CHECK(mean_csa_all_slices(per_slice) == doctest::Approx(16.0).epsilon(1e-12));
  CHECK(count_gaps(per_slice) == 0);

  std::vector<SliceMorphometrics> gap{with_area(0, 2, 30), SliceMorphometrics{}, with_area(2, 2, 50)};
  gap[1].slice_index = 1;
  CHECK(count_gaps(gap) == 1);
  CHECK(mean_csa_all_slices(gap) == 40.0);
  CHECK(code_of([] { mean_csa_all_slices(std::vector<SliceMorphometrics>{SliceMorphometrics{}}); }) ==
        ErrorCode::NoQualifyingSlices);
}

TEST_CASE("uniform cylinder mean equals any slice") {
  PhantomSpec spec;
  spec.voxel_dims = Eigen::Vector3d(0.5, 0.5, 1.0);
  const Phantom p = generate(spec);
  const auto per_slice = compute_morphometrics(p.mask);
  CHECK(mean_csa_all_slices(per_slice) == doctest::Approx(per_slice[p.first_slice].area).epsilon(1e-12));
}

TEST_CASE("area correction hook scales area only") {
  const BinaryMask m = rectangle(4, 2);
  const std::vector<double> cosines{0.5};
  const auto s = compute_morphometrics(m, nullptr, cosines);
  CHECK(s[0].area == 4.0);
  CHECK(*s[0].ap_diameter == 4.0);
}

TEST_CASE("metric names round trip") {
  for (Metric m : kAllMetrics) CHECK(parse_metric(metric_name(m)) == m);
  CHECK_THROWS_AS(parse_metric("volume"), Error);
}

TEST_CASE("property: translation, rotation, convexity and monotone area") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(2, 9), coin(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 12;
    std::vector<Index3> on;
    const int w = size(rng), h = size(rng);
    for (int j = 0; j < h; ++j)
      for (int i = 0; i < w; ++i)
        if (coin(rng) || (i == 0 && j == 0)) on.push_back({i + 1, j + 1, 0});
    const Eigen::Vector3d dims(0.5, 0.5, 1.0);
    const BinaryMask m = mask_from(Extents{n, n, 1}, on, dims);
    const SliceMorphometrics s = shape_metrics(m, 0);

    std::vector<Index3> shifted, rotated;
    for (const Index3& p : on) {
      shifted.push_back({p[0] + 1, p[1] + 2, 0});
      rotated.push_back({p[1], n - 1 - p[0], 0});
    }
    const SliceMorphometrics t = shape_metrics(mask_from(Extents{n, n, 1}, shifted, dims), 0);
    CHECK(t.area == s.area);
    CHECK(*t.ap_diameter == *s.ap_diameter);
    CHECK(*t.eccentricity == doctest::Approx(*s.eccentricity).epsilon(1e-12));
    CHECK(*t.solidity == *s.solidity);

    const SliceMorphometrics r = shape_metrics(mask_from(Extents{n, n, 1}, rotated, dims), 0);
    CHECK(r.area == s.area);
    CHECK(*r.ap_diameter == *s.transverse_diameter);
    CHECK(*r.transverse_diameter == *s.ap_diameter);
    CHECK(*r.compression_ratio == doctest::Approx(1.0 / *s.compression_ratio).epsilon(1e-12));
    CHECK(*r.eccentricity == doctest::Approx(*s.eccentricity).epsilon(1e-9));
    CHECK(*r.solidity == doctest::Approx(*s.solidity).epsilon(1e-12));

    CHECK(*s.solidity <= 1.0);
    CHECK(*s.solidity > 0.0);
    CHECK(*s.eccentricity >= 0.0);
    CHECK(*s.eccentricity <= 1.0);

    std::vector<Index3> grown = on;
    grown.push_back({size(rng), size(rng), 0});
    CHECK(slice_area(mask_from(Extents{n, n, 1}, grown, dims), 0) >= s.area);
  }
}
