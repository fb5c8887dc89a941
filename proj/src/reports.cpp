#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <ostream>

#include "cordmorph/csv.hpp"
#include "cordmorph/error.hpp"
#include "cordmorph/fileio.hpp"
#include "cordmorph/phantom.hpp"
#include "cordmorph/svg.hpp"
#include "cordmorph/workflow.hpp"

namespace cordmorph {

namespace {

constexpr std::string_view kBaseColour = "#1b9e77";
constexpr std::string_view kCandidateColour = "#d95f02";

std::string number_or_none(const std::optional<double>& v) { return v ? csv::format_number(*v) : "none"; }

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::pair<double, double> min_max(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 1.0};
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {*lo, *hi};
}

/// Deterministic horizontal spread for strip plots.
double strip_offset(std::size_t i) { return (static_cast<double>((i * 37) % 21) - 10.0) / 10.0; }

std::string strip_plot(const DriftReport& report) {
  svg::Document doc("CSA STD across contrasts per subject (" + report.level_key.str() + ")");
  std::vector<double> all;
  for (const auto* s : {&report.base, &report.candidate}) {
    for (const SubjectStd& x : s->subject_std) all.push_back(x.std);
  }
  const auto [lo, hi] = min_max(all);
  const auto [y0, y1] = svg::padded_range(std::min(lo, 0.0), hi);
  const auto [xs, ys] = doc.axes(0.5, 2.5, y0, y1, "model version", "CSA STD across contrasts (mm^2)", 80, 920, 60, 480, false);
  int column = 1;
  for (const auto* s : {&report.base, &report.candidate}) {
    const std::string_view colour = column == 1 ? kBaseColour : kCandidateColour;
    std::vector<double> values;
    for (std::size_t i = 0; i < s->subject_std.size(); ++i) {
      doc.circle(xs(column + 0.15 * strip_offset(i)), ys(s->subject_std[i].std), 4.0, colour, 0.7);
      values.push_back(s->subject_std[i].std);
    }
    doc.line(xs(column - 0.3), ys(mean(values)), xs(column + 0.3), ys(mean(values)), "#000000", 2.0);
    doc.text(xs(column), 500, s->version_id + " (mean " + svg::fmt(s->mean_csa_std) + ")", 12, "middle");
    ++column;
  }
  return doc.str();
}

std::string scatter_with_identity(std::string_view title, std::string_view x_label, std::string_view y_label,
                                  const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>& series) {
  svg::Document doc(title);
  std::vector<double> all;
  for (const auto& [name, pts] : series) {
    for (const auto& [x, y] : pts) {
      all.push_back(x);
      all.push_back(y);
    }
  }
  const auto [lo, hi] = min_max(all);
  const auto [r0, r1] = svg::padded_range(lo, hi);
  const auto [xs, ys] = doc.axes(r0, r1, r0, r1, x_label, y_label);
  doc.line(xs(r0), ys(r0), xs(r1), ys(r1), "#000000", 1.5, "6,4");
  for (std::size_t s = 0; s < series.size(); ++s) {
    const std::string_view colour = s == 0 ? kBaseColour : kCandidateColour;
    for (const auto& [x, y] : series[s].second) doc.circle(xs(x), ys(y), 4.0, colour, 0.7);
    doc.rect(100, 70 + 20.0 * static_cast<double>(s), 10, 10, colour);
    doc.text(116, 79 + 20.0 * static_cast<double>(s), series[s].first, 12);
  }
  return doc.str();
}

std::string slice_curve_plot(std::string_view metric, const std::string& base, const std::string& candidate,
                             const std::vector<SliceCurvePoint>& curve) {
  svg::Document doc("Per-slice " + std::string(metric) + " and scaling factor " + candidate + "/" + base);
  std::vector<double> xs_v, values, ratios;
  for (const SliceCurvePoint& p : curve) {
    xs_v.push_back(static_cast<double>(p.slice_index));
    values.push_back(p.base_mean);
    values.push_back(p.candidate_mean);
    ratios.push_back(p.ratio_mean - p.ratio_std);
    ratios.push_back(p.ratio_mean + p.ratio_std);
  }
  ratios.push_back(1.0);
  const auto [sx0, sx1] = min_max(xs_v);
  const auto [x0, x1] = svg::padded_range(sx0, sx1);
  const auto [v0, v1] = min_max(values);
  const auto [y0, y1] = svg::padded_range(v0, v1);
  const auto [top_x, top_y] = doc.axes(x0, x1, y0, y1, "", std::string(metric), 80, 920, 60, 240);
  std::vector<std::pair<double, double>> base_line, cand_line, band_upper, band_lower, ratio_line;
  for (const SliceCurvePoint& p : curve) {
    const double x = static_cast<double>(p.slice_index);
    base_line.emplace_back(top_x(x), top_y(p.base_mean));
    cand_line.emplace_back(top_x(x), top_y(p.candidate_mean));
  }
  doc.polyline(base_line, kBaseColour);
  doc.polyline(cand_line, kCandidateColour);
  doc.rect(100, 66, 10, 10, kBaseColour);
  doc.text(116, 75, base, 12);
  doc.rect(100, 83, 10, 10, kCandidateColour);
  doc.text(116, 92, candidate, 12);

  const auto [r0, r1] = min_max(ratios);
  const auto [ry0, ry1] = svg::padded_range(r0, r1);
  const auto [bot_x, bot_y] = doc.axes(x0, x1, ry0, ry1, "slice index (inferior ->)", "scaling factor", 80, 920, 290, 470);
  for (const SliceCurvePoint& p : curve) {
    const double x = static_cast<double>(p.slice_index);
    band_upper.emplace_back(bot_x(x), bot_y(p.ratio_mean + p.ratio_std));
    band_lower.emplace_back(bot_x(x), bot_y(p.ratio_mean - p.ratio_std));
    ratio_line.emplace_back(bot_x(x), bot_y(p.ratio_mean));
  }
  std::vector<std::pair<double, double>> band = band_upper;
  band.insert(band.end(), band_lower.rbegin(), band_lower.rend());
  doc.polygon(band, kCandidateColour, 0.25);
  doc.line(bot_x(x0), bot_y(1.0), bot_x(x1), bot_y(1.0), "#000000", 1.0, "6,4");
  doc.polyline(ratio_line, kCandidateColour);
  return doc.str();
}

std::string verdict_text(const DriftReport& report, const GateVerdict& verdict, const RunConfig& config) {
  const GatePolicy defaults;
  std::string out;
  out += std::string("verdict: ") + (verdict.pass ? "PASS" : "FAIL") + "\n";
  out += "base: " + report.base_version + "\n";
  out += "candidate: " + report.candidate_version + "\n";
  out += "level_key: " + report.level_key.str() + "\n";
  out += "std_estimator: " + report.std_estimator + "\n";
  out += "policy.max_std_increase_abs_mm2: " + number_or_none(verdict.policy.max_std_increase_abs) + "\n";
  out += "policy.max_std_increase_rel_percent: " + number_or_none(verdict.policy.max_std_increase_rel_percent) + "\n";
  out += "policy.max_contrast_shift_percent: " + csv::format_number(verdict.policy.max_contrast_shift_percent) + "\n";
  out += "policy.defaults: max_std_increase_rel_percent=" + number_or_none(defaults.max_std_increase_rel_percent) +
         " max_contrast_shift_percent=" + csv::format_number(defaults.max_contrast_shift_percent) + "\n";
  out += "config_digest: " + config.digest() + "\n";
  if (config.stamp) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
    out += std::string("generated: ") + buf + "\n";
  }
  for (const std::string& line : describe(verdict)) out += "violation: " + line + "\n";
  for (const Exclusion& e : report.exclusions) out += "excluded: " + e.subject_id + " (" + e.reason + ")\n";
  return out;
}

}  // namespace

std::vector<VersionPoint> version_agreement_points(const DriftStore& store, const std::string& base,
                                                   const std::string& candidate, const LevelKey& level_key) {
  std::map<std::pair<std::string, std::string>, double> base_values;
  for (const MorphometricRecord& r : store.select(base, "area", level_key)) base_values[{r.subject_id, r.contrast}] = r.value;
  std::vector<VersionPoint> out;
  for (const MorphometricRecord& r : store.select(candidate, "area", level_key)) {
    if (auto it = base_values.find({r.subject_id, r.contrast}); it != base_values.end()) {
      out.push_back({r.subject_id, r.contrast, it->second, r.value});
    }
  }
  return out;
}

std::vector<SliceCurvePoint> slice_curves(const DriftStore& store, const std::string& base,
                                          const std::string& candidate, std::string_view metric) {
  std::vector<MorphometricRecord> base_records, cand_records;
  std::map<std::int64_t, std::vector<double>> base_by_slice, cand_by_slice;
  for (const auto& [key, r] : store.records()) {
    if (r.metric != metric || !r.level_key.is_slice()) continue;
    if (r.version_id == base) {
      base_records.push_back(r);
      base_by_slice[r.level_key.slice_index()].push_back(r.value);
    } else if (r.version_id == candidate) {
      cand_records.push_back(r);
      cand_by_slice[r.level_key.slice_index()].push_back(r.value);
    }
  }
  std::vector<SliceCurvePoint> out;
  if (base_records.empty() || cand_records.empty()) return out;
  ScalingFactorTable table;
  try {
    table = scaling_factors(cand_records, base_records);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NoOverlap) return out;
    throw;
  }
  for (const ScalingRow& row : table.rows[std::string(metric)]) {
    const std::int64_t k = row.level_key.slice_index();
    out.push_back({k, mean(base_by_slice[k]), mean(cand_by_slice[k]), row.mean_ratio, row.std_ratio, row.n});
  }
  return out;
}

EmitResult emit_reports(const DriftStore& store, const std::string& base, const std::string& candidate,
                        const RunConfig& config) {
  config.validate();
  EmitResult result;
  DriftReport report = compare_versions(store, base, candidate, config.contrasts, config.level_key());
  report.config_digest = config.digest();
  const GateVerdict verdict = gate(report, config.policy);
  report.verdict = verdict;

  std::map<std::filesystem::path, std::string> files;
  files["report.json"] = report_to_json(report);
  files["report.csv"] = report_to_csv(report);

  // scaling factors over every metric and level key both versions share
  std::vector<MorphometricRecord> base_records, cand_records;
  for (const auto& [key, r] : store.records()) {
    if (r.version_id == base) base_records.push_back(r);
    if (r.version_id == candidate) cand_records.push_back(r);
  }
  files["scaling_factors.csv"] = scaling_table_to_csv(scaling_factors(cand_records, base_records));

  std::string by_contrast = csv::format_row({"model_version", "contrast", "subject", "csa_mm2"});
  for (const std::string& version : {base, candidate}) {
    for (const MorphometricRecord& r : store.select(version, "area", report.level_key)) {
      by_contrast += csv::format_row({r.version_id, r.contrast, r.subject_id, csv::format_number(r.value)});
    }
  }
  files["csa_by_contrast.csv"] = by_contrast;

  files["plots/csa_std_strip.svg"] = strip_plot(report);

  const auto& [ca, cb] = config.agreement_pair;
  std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> agreement_series;
  for (const std::string& version : {base, candidate}) {
    std::vector<std::pair<double, double>> pts;
    try {
      for (const AgreementPair& p : contrast_agreement(store.select(version, "area", report.level_key), ca, cb,
                                                       report.level_key).pairs) {
        pts.emplace_back(p.a, p.b);
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientSubjects) throw;
    }
    agreement_series.emplace_back(version, std::move(pts));
  }
  files["plots/agreement_" + contrast_file_tag(ca) + "_" + contrast_file_tag(cb) + ".svg"] = scatter_with_identity(
      "Agreement between " + ca + " and " + cb + " CSA at " + report.level_key.str(), ca + " CSA (mm^2)",
      cb + " CSA (mm^2)", agreement_series);

  std::vector<std::pair<double, double>> version_pts;
  for (const VersionPoint& p : version_agreement_points(store, base, candidate, report.level_key)) {
    version_pts.emplace_back(p.base, p.candidate);
  }
  files["plots/version_agreement.svg"] = scatter_with_identity(
      "CSA at " + report.level_key.str() + ": " + candidate + " vs " + base, base + " CSA (mm^2)",
      candidate + " CSA (mm^2)", {{candidate + " vs " + base, version_pts}});

  for (Metric m : config.metrics) {
    const auto curve = slice_curves(store, base, candidate, metric_name(m));
    if (curve.empty()) continue;
    files["plots/scaling_" + std::string(metric_name(m)) + ".svg"] = slice_curve_plot(metric_name(m), base, candidate, curve);
  }
  files["verdict.txt"] = verdict_text(report, verdict, config);

  std::string sums;
  for (const auto& [rel, content] : files) {
    write_file_atomic(config.out_dir / rel, content);
    write_file_atomic(config.out_dir / "release" / rel, content);
    sums += sha256_hex(content) + "  " + rel.generic_string() + "\n";
    result.files.push_back(rel);
    result.files.push_back(std::filesystem::path("release") / rel);
  }
  write_file_atomic(config.out_dir / "release" / "SHA256SUMS", sums);
  result.files.push_back(std::filesystem::path("release") / "SHA256SUMS");
  std::sort(result.files.begin(), result.files.end());
  result.report = std::move(report);
  return result;
}

int gate_cli(const std::filesystem::path& report_path, const GatePolicy& policy, std::ostream& err) {
  try {
    if (!std::filesystem::exists(report_path)) {
      err << "error: report not found: " << report_path.string() << "\n";
      return 1;
    }
    const Bytes bytes = read_file(report_path);
    const DriftReport report = report_from_json(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    const GateVerdict verdict = gate(report, policy);
    if (verdict.pass) {
      err << "PASS: " << report.candidate_version << " vs " << report.base_version << " within drift envelope\n";
      return 0;
    }
    err << "FAIL: " << report.candidate_version << " vs " << report.base_version << "\n";
    for (const std::string& line : describe(verdict)) err << line << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace cordmorph
