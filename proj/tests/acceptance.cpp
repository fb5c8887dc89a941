// Acceptance checks, one line per criterion. Exit status is non-zero when any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include "cordmorph/drift.hpp"
#include "cordmorph/error.hpp"
#include "cordmorph/fileio.hpp"
#include "cordmorph/geometry.hpp"
#include "cordmorph/nifti.hpp"
#include "cordmorph/phantom.hpp"
#include "cordmorph/seg_metrics.hpp"
#include "cordmorph/workflow.hpp"
#include "mutations.hpp"
#include "support.hpp"

using namespace cordmorph;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

void require(Outcome& o, bool condition, const std::string& what) {
  if (!condition && o.pass) {
    o.pass = false;
    o.detail = what;
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cordmorph_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string text_of(const fs::path& p) {
  const Bytes b = read_file(p);
  return {b.begin(), b.end()};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CORDMORPH_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const std::vector<std::string> kSix{"T2w", "T1w", "T2*w", "MT-on", "GRE-T1w", "DWI"};

Outcome phantom_csa_accuracy() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const double truth = std::numbers::pi * 4.0 * 3.0;
  std::vector<double> errors;
  double worst = 0.0;
  for (double d : {1.0, 0.5, 0.25}) {
    PhantomSpec spec;
    spec.ap_semi_axis = 4.0;
    spec.rl_semi_axis = 3.0;
    spec.voxel_dims = Eigen::Vector3d(d, d, 1.0);
    const Phantom p = generate(spec);
    const auto per_slice = compute_morphometrics(p.mask);
    double err = 0.0;
    for (std::int64_t k = p.first_slice + 1; k < p.last_slice; ++k) {
      const double rel = std::abs(per_slice[k].area - truth) / truth;
      if (d == 0.25) {
        worst = std::max(worst, rel);
        require(o, rel < 0.02, "slice " + std::to_string(k) + " off by " + fmt(100 * rel) + "%");
      }
      err = std::max(err, std::abs(per_slice[k].area - truth));
    }
    errors.push_back(err);
  }
  require(o, errors[0] > errors[1] && errors[1] > errors[2], "error does not decrease strictly with resolution");
  const double t = seconds_since(t0);
  require(o, t < 5.0, "took " + fmt(t) + " s");
  if (o.pass) {
    o.detail = "max rel error at 0.25 mm " + fmt(100 * worst, 3) + "%, abs errors " + fmt(errors[0], 4) + " > " +
               fmt(errors[1], 4) + " > " + fmt(errors[2], 4) + " mm^2, " + fmt(t, 3) + " s";
  }
  return o;
}

Outcome metric_oracles() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<std::int64_t> ext(1, 16);
  std::uniform_real_distribution<double> dim(0.25, 2.0), dens(0.01, 0.5);
  double worst = 0.0;
  for (int pair = 0; pair < 200; ++pair) {
    const Extents e{ext(rng), ext(rng), ext(rng)};
    const Eigen::Vector3d dims(dim(rng), dim(rng), dim(rng));
    const BinaryMask p = testing::random_mask(rng, e, dims, dens(rng));
    const BinaryMask r = testing::random_mask(rng, e, dims, dens(rng));
    const double dd = std::abs(dice(p, r).value - testing::oracle_dice(p, r));
    const double dr = std::abs(rve(p, r) - testing::oracle_rve(p, r));
    const double da = std::abs(asd(p, r) - testing::oracle_asd(p, r));
    worst = std::max({worst, dd, dr, da});
    require(o, dd <= 1e-9 && dr <= 1e-9 && da <= 1e-9, "pair " + std::to_string(pair) + " deviates by " + fmt(std::max({dd, dr, da})));
  }
  const double t = seconds_since(t0);
  require(o, t < 60.0, "took " + fmt(t) + " s");
  if (o.pass) o.detail = "200 pairs, max deviation " + fmt(worst, 3) + ", " + fmt(t, 3) + " s";
  return o;
}

/// Base records from a phantom cohort run plus a candidate copy with every area scaled by k.
DriftStore cohort_with_scaled_candidate(const fs::path& dir, double k) {
  CohortSpec spec;
  spec.n_subjects = 6;
  spec.jitter_fraction = 0.15;
  spec.seed = 3;
  const DatasetManifest m = make_cohort(spec, dir / "data");
  RunConfig config;
  config.out_dir = dir / "out";
  const RunResult run = run_morphometrics(m, config);
  DriftStore store = run.store;
  for (const auto& [key, r] : run.store.records()) {
    MorphometricRecord c = r;
    c.version_id = "v2";
    if (c.metric == "area") c.value *= k;
    store.add(c);
  }
  return store;
}

Outcome drift_identity() {
  Outcome o;
  const fs::path dir = scratch("identity");
  const DriftStore same = cohort_with_scaled_candidate(dir / "same", 1.0);
  const DriftReport r = compare_versions(same, "v1", "v2", kSix);
  require(o, r.delta_mean_csa_std == 0.0, "nonzero STD delta");
  require(o, r.base.mean_csa_std > 0.0, "jittered cohort has no spread to compare");
  for (const ContrastDelta& d : r.contrast_deltas) require(o, d.absolute == 0.0, "nonzero delta for " + d.contrast);
  for (const AgreementDelta& d : r.agreement_deltas) require(o, d.mean_difference == 0.0, "nonzero agreement delta");
  std::vector<MorphometricRecord> v1, v2;
  for (const auto& [k, rec] : same.records()) (rec.version_id == "v1" ? v1 : v2).push_back(rec);
  const ScalingFactorTable t = scaling_factors(v2, v1);
  std::size_t rows = 0;
  for (const auto& [metric, list] : t.rows) {
    for (const ScalingRow& row : list) {
      ++rows;
      require(o, row.mean_ratio == 1.0 && row.std_ratio == 0.0, "scaling factor not exactly 1 for " + metric);
    }
  }
  require(o, gate(r, GatePolicy{}).pass, "identical versions did not pass");

  const DriftStore scaled = cohort_with_scaled_candidate(dir / "scaled", 1.10);
  const DriftReport s = compare_versions(scaled, "v1", "v2", kSix);
  double worst = 0.0;
  for (const ContrastDelta& d : s.contrast_deltas) {
    worst = std::max(worst, std::abs(*d.relative_percent - 10.0));
    require(o, std::abs(*d.relative_percent - 10.0) <= 1e-9, d.contrast + " shifted " + fmt(*d.relative_percent, 15) + "%");
  }
  const GateVerdict v = gate(s, GatePolicy{});
  require(o, !v.pass, "x1.10 candidate passed the default gate");
  fs::remove_all(dir);
  if (o.pass) {
    o.detail = std::to_string(rows) + " scaling rows at exactly 1.0; x1.10 shifts within " + fmt(worst, 3) +
               " of +10%, gate FAIL with " + std::to_string(v.violations.size()) + " violations";
  }
  return o;
}

Outcome scaling_flatness() {
  Outcome o;
  const fs::path dir = scratch("flatness");
  // single phantom: cylinder vs its one-voxel dilation
  PhantomSpec spec;
  spec.ap_semi_axis = 4.0;
  spec.rl_semi_axis = 3.0;
  spec.length = 30.0;
  spec.voxel_dims = Eigen::Vector3d(0.5, 0.5, 1.0);
  const Phantom p = generate(spec);
  const BinaryMask grown = perturb(p.mask, MorphOp::Dilate, 1).mask;
  std::vector<double> ratios;
  for (std::int64_t k = p.first_slice + 1; k < p.last_slice; ++k) ratios.push_back(slice_area(grown, k) / slice_area(p.mask, k));
  double mean = 0.0;
  for (double r : ratios) mean += r / static_cast<double>(ratios.size());
  const double cv_single = testing::oracle_sample_std(ratios) / mean;
  require(o, cv_single < 0.01, "single phantom CV " + fmt(100 * cv_single) + "%");

  // jittered cohort through the pipeline, per-slice scaling factors averaged over subjects
  CohortSpec cohort;
  cohort.n_subjects = 5;
  cohort.jitter_fraction = 0.1;
  cohort.seed = 11;
  cohort.versions = {{"v1", std::nullopt, 1}, {"v2", MorphOp::Dilate, 1}};
  const DatasetManifest m = make_cohort(cohort, dir / "data");
  RunConfig config;
  config.out_dir = dir / "out";
  const RunResult run = run_morphometrics(m, config);
  const auto curve = slice_curves(run.store, "v1", "v2", "area");
  std::size_t full = 0;
  for (const SliceCurvePoint& c : curve) full = std::max(full, c.n);
  std::vector<double> means;
  for (const SliceCurvePoint& c : curve) {
    if (c.n == full) means.push_back(c.ratio_mean);
  }
  require(o, means.size() > 4, "too few matched slices");
  means = std::vector<double>(means.begin() + 1, means.end() - 1);
  double mm = 0.0;
  for (double r : means) mm += r / static_cast<double>(means.size());
  const double cv_cohort = testing::oracle_sample_std(means) / mm;
  require(o, cv_cohort < 0.01, "cohort CV " + fmt(100 * cv_cohort) + "%");
  fs::remove_all(dir);
  if (o.pass) {
    o.detail = "interior CV " + fmt(100 * cv_single, 3) + "% (phantom, ratio " + fmt(mean, 5) + "), " +
               fmt(100 * cv_cohort, 3) + "% (jittered cohort, " + std::to_string(means.size()) + " slices)";
  }
  return o;
}

Outcome zero_jitter_cohort() {
  Outcome o;
  const fs::path dir = scratch("zero");
  CohortSpec spec;
  spec.jitter_fraction = 0.0;
  spec.seed = 5;
  const DatasetManifest m = make_cohort(spec, dir / "data");
  RunConfig config;
  config.out_dir = dir / "out";
  const RunResult run = run_morphometrics(m, config);
  require(o, run.failed == 0, "rows failed");
  std::map<std::string, std::vector<MorphometricRecord>> by_subject;
  for (const auto& r : run.store.select("v1", "area", config.level_key())) by_subject[r.subject_id].push_back(r);
  require(o, by_subject.size() == spec.n_subjects, "missing subjects");
  for (const auto& [subject, records] : by_subject) {
    const double s = csa_std_across_contrasts(records, kSix, config.level_key());
    require(o, s == 0.0, subject + " has STD " + fmt(s));
  }
  fs::remove_all(dir);
  if (o.pass) o.detail = std::to_string(by_subject.size()) + " subjects x 6 contrasts, every CSA STD exactly 0";
  return o;
}

Outcome determinism_and_sharding() {
  Outcome o;
  const fs::path dir = scratch("determinism");
  auto cli = [&](const std::string& args) {
    const int code = run_cli(args);
    require(o, code == 0, "cli '" + args + "' exited " + std::to_string(code));
  };
  const std::string d = dir.string();
  cli("phantom --out " + d + "/data --seed 42 --subjects 6 --jitter 0.1 --version v1 --version v2:dilate:1");
  cli("compute --manifest " + d + "/data/manifest.csv --out " + d + "/serial");
  DriftStore merged;
  for (int k = 0; k < 4; ++k) {
    const std::string out = d + "/shard" + std::to_string(k);
    cli("compute --manifest " + d + "/data/manifest.csv --shard " + std::to_string(k) + "/4 --out " + out);
    merged.merge(DriftStore::load(out + "/store.ndjson"));
  }
  if (!o.pass) return o;
  const std::string serial = text_of(dir / "serial" / "store.ndjson");
  require(o, !serial.empty(), "serial store is empty");
  require(o, merged.to_ndjson() == serial, "union of shard stores differs from the serial store");

  // full pipeline twice with the same seed, in separate trees
  for (const std::string run : {"a", "b"}) {
    const std::string root = d + "/run_" + run;
    cli("phantom --out " + root + "/data --seed 7 --subjects 5 --jitter 0.1 --version v1 --version v2:erode:1");
    cli("compute --manifest " + root + "/data/manifest.csv --out " + root + "/out");
    cli("report --store " + root + "/out/store.ndjson --base v1 --candidate v2 --out " + root + "/report");
  }
  if (!o.pass) return o;
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "run_a" / "report" / "release")) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const fs::path rel = fs::relative(entry.path(), dir / "run_a");
    require(o, fs::exists(dir / "run_b" / rel) && read_file(entry.path()) == read_file(dir / "run_b" / rel),
            rel.string() + " differs between runs");
  }
  require(o, files > 5, "release bundle is nearly empty");
  const std::size_t lines = static_cast<std::size_t>(std::count(serial.begin(), serial.end(), '\n'));
  fs::remove_all(dir);
  if (o.pass) {
    o.detail = "4-shard union equals serial store (" + std::to_string(lines) + " records); " + std::to_string(files) +
               " release files byte-identical across runs";
  }
  return o;
}

Outcome format_robustness() {
  Outcome o;
  std::mt19937_64 rng(77);
  const Affine affine = diagonal_affine(Eigen::Vector3d(0.5, 0.5, 1.0), Eigen::Vector3d(1, -1, -1),
                                        Eigen::Vector3d(12.5, -3.0, 40.0));
  for (Datatype dt : {Datatype::UInt8, Datatype::Int16}) {
    const Extents e{9, 7, 5};
    std::uniform_int_distribution<int> val(dt == Datatype::UInt8 ? 0 : -32768, dt == Datatype::UInt8 ? 255 : 32767);
    Volume::Storage s(e.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = val(rng);
    const Volume v(e, s, affine);
    for (bool gz : {false, true}) {
      Bytes bytes = write_nifti(v, dt);
      if (gz) bytes = gzip_compress(bytes);
      const Volume back = parse_nifti(bytes);
      require(o, back.extents() == e && (back.voxels() == v.voxels()).all(), "round trip not value exact");
      require(o, (back.affine() - affine).cwiseAbs().maxCoeff() <= 1e-6, "affine drifted");
    }
  }
  const Bytes good = write_nifti(Volume(Extents{4, 4, 4}, 1.0, Affine::Identity()), Datatype::UInt8);
  std::size_t typed = 0;
  const auto mutations = testing::header_mutations();
  for (const auto& m : mutations) {
    try {
      parse_nifti(m.apply(good));
      require(o, false, m.name + " parsed silently");
    } catch (const Error& e) {
      require(o, e.code() == m.expected, m.name + " raised " + std::string(to_string(e.code())));
      typed += e.code() == m.expected;
    } catch (const std::exception& e) {
      require(o, false, m.name + " raised an untyped exception: " + e.what());
    }
  }
  require(o, mutations.size() >= 20, "fewer than 20 mutations");
  if (o.pass) {
    o.detail = "uint8/int16 round trips exact (plain and gzip); " + std::to_string(typed) + "/" +
               std::to_string(mutations.size()) + " corrupted headers raised the expected typed error";
  }
  return o;
}

Outcome rve_sign_convention() {
  Outcome o;
  PhantomSpec spec;
  spec.voxel_dims = Eigen::Vector3d(0.5, 0.5, 1.0);
  const Phantom p = generate(spec);
  const double under = rve(perturb(p.mask, MorphOp::Erode, 1).mask, p.mask);
  const double over = rve(perturb(p.mask, MorphOp::Dilate, 1).mask, p.mask);
  require(o, under < 0.0, "erosion RVE " + fmt(under) + " is not negative");
  require(o, over > 0.0, "dilation RVE " + fmt(over) + " is not positive");
  if (o.pass) o.detail = "erode RVE " + fmt(under, 4) + "%, dilate RVE +" + fmt(over, 4) + "%";
  return o;
}

Outcome geometry_invariants() {
  Outcome o;
  std::mt19937_64 rng(500);
  std::uniform_int_distribution<int> size(1, 10), coin(0, 2), shift(-3, 3);
  std::uniform_real_distribution<double> dim(0.3, 1.5);
  const std::int64_t n = 20;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Index3> on;
    const int w = size(rng), h = size(rng);
    for (int j = 0; j < h; ++j)
      for (int i = 0; i < w; ++i)
        if (coin(rng) != 0 || (i == 0 && j == 0)) on.push_back({i + 5, j + 5, 0});
    const double d = dim(rng);
    const Eigen::Vector3d dims(d, d, 1.0);
    const BinaryMask m = testing::mask_from(Extents{n, n, 1}, on, dims);
    const SliceMorphometrics s = shape_metrics(m, 0);
    const std::string at = "trial " + std::to_string(trial) + ": ";

    const int dx = shift(rng), dy = shift(rng);
    std::vector<Index3> moved, turned, grown = on;
    for (const Index3& v : on) {
      moved.push_back({v[0] + dx, v[1] + dy, 0});
      turned.push_back({v[1], n - 1 - v[0], 0});
    }
    const SliceMorphometrics t = shape_metrics(testing::mask_from(Extents{n, n, 1}, moved, dims), 0);
    require(o, t.area == s.area && *t.ap_diameter == *s.ap_diameter && *t.transverse_diameter == *s.transverse_diameter &&
                   *t.compression_ratio == *s.compression_ratio && std::abs(*t.eccentricity - *s.eccentricity) <= 1e-12 &&
                   *t.solidity == *s.solidity,
            at + "translation changed a metric");

    const SliceMorphometrics r = shape_metrics(testing::mask_from(Extents{n, n, 1}, turned, dims), 0);
    require(o, r.area == s.area && *r.ap_diameter == *s.transverse_diameter && *r.transverse_diameter == *s.ap_diameter,
            at + "rotation did not swap diameters");
    require(o, std::abs(*r.compression_ratio * *s.compression_ratio - 1.0) <= 1e-12, at + "rotation did not invert CR");
    require(o, std::abs(*r.eccentricity - *s.eccentricity) <= 1e-9 && std::abs(*r.solidity - *s.solidity) <= 1e-12,
            at + "rotation changed eccentricity or solidity");

    require(o, *s.solidity <= 1.0 && *s.solidity > 0.0, at + "solidity " + fmt(*s.solidity));

    grown.push_back({size(rng) + 4, size(rng) + 4, 0});
    require(o, slice_area(testing::mask_from(Extents{n, n, 1}, grown, dims), 0) >= s.area, at + "area decreased");
  }
  if (o.pass) o.detail = "500 trials: translation, rotation swap with CR inversion, solidity <= 1, monotone area";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"phantom CSA accuracy", phantom_csa_accuracy},
      {"metric oracle equivalence", metric_oracles},
      {"drift identity suite", drift_identity},
      {"scaling-factor flatness", scaling_flatness},
      {"zero-jitter cohort", zero_jitter_cohort},
      {"determinism and sharding", determinism_and_sharding},
      {"format robustness", format_robustness},
      {"RVE sign convention", rve_sign_convention},
      {"geometry invariants", geometry_invariants},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << i + 1 << " " << (o.pass ? "PASS" : "FAIL") << ": " << criteria[i].first << " - "
              << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
