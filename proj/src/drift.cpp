#include "cordmorph/drift.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "cordmorph/csv.hpp"
#include "cordmorph/error.hpp"
#include "cordmorph/fileio.hpp"

namespace cordmorph {

using ojson = nlohmann::ordered_json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ojson number_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }
ojson optional_number(const std::optional<double>& v) { return v ? number_or_null(*v) : ojson(nullptr); }

std::optional<double> read_optional(const ojson& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}
double read_number_or_inf(const ojson& j) { return j.is_null() ? kInf : j.get<double>(); }

std::string text_of(std::span<const std::uint8_t> bytes) { return {bytes.begin(), bytes.end()}; }

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

using ContrastValues = std::map<std::string, double>;
using SubjectTable = std::map<std::string, ContrastValues>;

SubjectTable area_table(const DriftStore& store, const std::string& version, const LevelKey& key) {
  SubjectTable table;
  for (const MorphometricRecord& r : store.select(version, "area", key)) table[r.subject_id][r.contrast] = r.value;
  return table;
}

std::string format_value(double v) { return std::isfinite(v) ? csv::format_number(v) : std::string("inf"); }

}  // namespace

// ---------------------------------------------------------------- level keys

LevelKey LevelKey::range(std::string tag) {
  if (tag.empty()) throw Error(ErrorCode::InvalidRecord, "level range tag must not be empty");
  if (tag.starts_with("slice:")) throw Error(ErrorCode::InvalidRecord, "range tag may not use the slice prefix");
  return LevelKey(std::move(tag));
}

LevelKey LevelKey::parse(std::string_view text) {
  if (text.starts_with("slice:")) {
    std::int64_t index = 0;
    const auto digits = text.substr(6);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) {
      throw Error(ErrorCode::InvalidRecord, "bad slice key '" + std::string(text) + "'");
    }
    return slice(index);
  }
  return range(std::string(text));
}

std::string LevelKey::str() const { return is_slice() ? "slice:" + std::to_string(slice_index()) : tag(); }

std::string vertebral_name(int level) {
  if (level >= 1 && level <= 7) return "C" + std::to_string(level);
  if (level >= 8 && level <= 19) return "T" + std::to_string(level - 7);
  if (level >= 20 && level <= 24) return "L" + std::to_string(level - 19);
  return "level" + std::to_string(level);
}

std::string level_range_tag(const std::set<int>& levels) {
  if (levels.empty()) throw Error(ErrorCode::InvalidArgument, "level set is empty");
  const int lo = *levels.begin(), hi = *levels.rbegin();
  if (levels.size() == 1) return vertebral_name(lo);
  if (static_cast<std::size_t>(hi - lo + 1) == levels.size()) return vertebral_name(lo) + "-" + vertebral_name(hi);
  std::string tag;
  for (int l : levels) tag += (tag.empty() ? "" : ",") + vertebral_name(l);
  return tag;
}

// ------------------------------------------------------------------- records

std::string record_to_json_line(const MorphometricRecord& r) {
  ojson j;
  j["subject"] = r.subject_id;
  j["contrast"] = r.contrast;
  j["version"] = r.version_id;
  j["metric"] = r.metric;
  j["level_key"] = r.level_key.is_slice() ? ojson(r.level_key.slice_index()) : ojson(r.level_key.tag());
  j["value"] = r.value;
  return j.dump();
}

MorphometricRecord record_from_json_line(std::string_view line) {
  try {
    const ojson j = ojson::parse(line);
    MorphometricRecord r;
    r.subject_id = j.at("subject").get<std::string>();
    r.contrast = j.at("contrast").get<std::string>();
    r.version_id = j.at("version").get<std::string>();
    r.metric = j.at("metric").get<std::string>();
    const ojson& key = j.at("level_key");
    if (key.is_number_integer()) {
      r.level_key = LevelKey::slice(key.get<std::int64_t>());
    } else {
      r.level_key = LevelKey::range(key.get<std::string>());
    }
    if (!j.at("value").is_number()) throw Error(ErrorCode::InvalidRecord, "value must be a number");
    r.value = j.at("value").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidRecord, std::string("malformed record: ") + e.what());
  }
}

// --------------------------------------------------------------------- store

void DriftStore::add_version(ModelVersion version) {
  if (version.version_id.empty()) throw Error(ErrorCode::InvalidRecord, "version id must not be empty");
  auto [it, inserted] = versions_.try_emplace(version.version_id, version);
  if (inserted) return;
  ModelVersion& existing = it->second;
  auto reconcile = [&](auto& have, const auto& incoming, const char* field) {
    using Field = std::remove_cvref_t<decltype(have)>;
    if (incoming == Field{} || have == incoming) return;
    if (have == Field{}) {
      have = incoming;
      return;
    }
    throw Error(ErrorCode::DuplicateRecord, "version " + version.version_id + " registered twice with different " + field);
  };
  reconcile(existing.source_url, version.source_url, "source_url");
  reconcile(existing.created, version.created, "created");
}

void DriftStore::add(MorphometricRecord record) {
  if (record.subject_id.empty() || record.contrast.empty() || record.version_id.empty() || record.metric.empty()) {
    throw Error(ErrorCode::InvalidRecord, "record fields must not be empty");
  }
  if (!std::isfinite(record.value)) {
    throw Error(ErrorCode::InvalidRecord, "non-finite value for " + record.subject_id + "/" + record.metric);
  }
  if (!versions_.contains(record.version_id)) versions_.emplace(record.version_id, ModelVersion{record.version_id, {}, {}});
  const auto key = record.key();
  if (!records_.try_emplace(key, std::move(record)).second) {
    const auto& [s, c, v, m, l] = key;
    throw Error(ErrorCode::DuplicateRecord, "duplicate record " + s + "/" + c + "/" + v + "/" + m + "/" + l.str());
  }
}

void DriftStore::merge(const DriftStore& other) {
  for (const auto& [id, v] : other.versions_) add_version(v);
  for (const auto& [key, r] : other.records_) add(r);
}

bool DriftStore::has_version(std::string_view id) const { return versions_.contains(std::string(id)); }

std::vector<MorphometricRecord> DriftStore::select(std::string_view version, std::string_view metric,
                                                   const LevelKey& level_key) const {
  std::vector<MorphometricRecord> out;
  for (const auto& [key, r] : records_) {
    if (r.version_id == version && r.metric == metric && r.level_key == level_key) out.push_back(r);
  }
  return out;
}

std::string DriftStore::to_ndjson() const {
  std::string out;
  for (const auto& [key, r] : records_) {
    out += record_to_json_line(r);
    out.push_back('\n');
  }
  return out;
}

std::string DriftStore::versions_json() const {
  ojson list = ojson::array();
  for (const auto& [id, v] : versions_) {
    ojson j;
    j["version_id"] = v.version_id;
    j["source_url"] = v.source_url ? ojson(*v.source_url) : ojson(nullptr);
    j["created"] = v.created;
    list.push_back(std::move(j));
  }
  ojson root;
  root["versions"] = std::move(list);
  return root.dump(2) + "\n";
}

DriftStore DriftStore::parse(std::string_view ndjson, std::string_view versions_json) {
  DriftStore store;
  if (!versions_json.empty()) {
    try {
      const ojson root = ojson::parse(versions_json);
      for (const ojson& j : root.at("versions")) {
        ModelVersion v;
        v.version_id = j.at("version_id").get<std::string>();
        if (j.contains("source_url") && !j["source_url"].is_null()) v.source_url = j["source_url"].get<std::string>();
        if (j.contains("created")) v.created = j["created"].get<std::string>();
        store.add_version(std::move(v));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidRecord, std::string("malformed versions manifest: ") + e.what());
    }
  }
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < ndjson.size()) {
    std::size_t end = ndjson.find('\n', start);
    if (end == std::string_view::npos) end = ndjson.size();
    ++line_no;
    std::string_view line = ndjson.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) {
      try {
        store.add(record_from_json_line(line));
      } catch (const Error& e) {
        throw Error(e.code(), "store line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    start = end + 1;
  }
  return store;
}

std::filesystem::path DriftStore::versions_path(const std::filesystem::path& store_path) {
  return store_path.parent_path() / (store_path.stem().string() + ".versions.json");
}

DriftStore DriftStore::load(const std::filesystem::path& store_path) {
  std::string records, versions;
  if (std::filesystem::exists(store_path)) records = text_of(read_file(store_path));
  if (const auto vp = versions_path(store_path); std::filesystem::exists(vp)) versions = text_of(read_file(vp));
  return parse(records, versions);
}

void DriftStore::append_to(const std::filesystem::path& store_path) const {
  DriftStore merged = load(store_path);
  merged.merge(*this);
  write_file_atomic(store_path, merged.to_ndjson());
  write_file_atomic(versions_path(store_path), merged.versions_json());
}

// ----------------------------------------------------------------- analytics

double sample_std(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double csa_std_across_contrasts(std::span<const MorphometricRecord> records, const std::vector<std::string>& contrasts,
                                const LevelKey& level_key) {
  std::vector<double> values;
  const MorphometricRecord* first = nullptr;
  for (const MorphometricRecord& r : records) {
    if (r.metric != "area" || r.level_key != level_key) continue;
    if (std::find(contrasts.begin(), contrasts.end(), r.contrast) == contrasts.end()) continue;
    if (first && (r.subject_id != first->subject_id || r.version_id != first->version_id)) {
      throw Error(ErrorCode::InvalidArgument, "records span more than one subject/version");
    }
    if (!first) first = &r;
    values.push_back(r.value);
  }
  if (values.size() < 2) {
    throw Error(ErrorCode::InsufficientContrasts, "need CSA for at least two contrasts; found " + std::to_string(values.size()));
  }
  return sample_std(values);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

namespace {

ContrastAgreement agreement_from_table(const SubjectTable& table, const std::string& a, const std::string& b) {
  ContrastAgreement out;
  out.contrast_a = a;
  out.contrast_b = b;
  for (const auto& [subject, values] : table) {
    auto ia = values.find(a), ib = values.find(b);
    if (ia != values.end() && ib != values.end()) out.pairs.push_back({subject, ia->second, ib->second});
  }
  if (out.pairs.size() < 2) {
    throw Error(ErrorCode::InsufficientSubjects, "need at least two subjects with both " + a + " and " + b);
  }
  std::vector<double> xa, xb;
  double diff = 0.0;
  for (const AgreementPair& p : out.pairs) {
    xa.push_back(p.a);
    xb.push_back(p.b);
    diff += p.a - p.b;
  }
  out.mean_difference = diff / static_cast<double>(out.pairs.size());
  if (const double r = pearson(xa, xb); std::isfinite(r)) out.pearson_r = r;
  return out;
}

}  // namespace

ContrastAgreement contrast_agreement(std::span<const MorphometricRecord> records, const std::string& contrast_a,
                                     const std::string& contrast_b, const LevelKey& level_key) {
  SubjectTable table;
  std::string version;
  for (const MorphometricRecord& r : records) {
    if (r.metric != "area" || r.level_key != level_key) continue;
    if (!version.empty() && r.version_id != version) {
      throw Error(ErrorCode::InvalidArgument, "records span more than one version");
    }
    version = r.version_id;
    table[r.subject_id][r.contrast] = r.value;
  }
  return agreement_from_table(table, contrast_a, contrast_b);
}

const ScalingRow* ScalingFactorTable::find(std::string_view metric, const LevelKey& key) const {
  auto it = rows.find(std::string(metric));
  if (it == rows.end()) return nullptr;
  for (const ScalingRow& row : it->second) {
    if (row.level_key == key) return &row;
  }
  return nullptr;
}

ScalingFactorTable scaling_factors(std::span<const MorphometricRecord> new_records,
                                   std::span<const MorphometricRecord> old_records) {
  using MatchKey = std::tuple<std::string, std::string, std::string, LevelKey>;
  auto match_key = [](const MorphometricRecord& r) { return MatchKey{r.subject_id, r.contrast, r.metric, r.level_key}; };

  std::map<MatchKey, const MorphometricRecord*> old_by_key;
  for (const MorphometricRecord& r : old_records) {
    if (!old_by_key.emplace(match_key(r), &r).second) {
      throw Error(ErrorCode::InvalidArgument, "old records repeat a (subject, contrast, metric, level) key");
    }
  }
  ScalingFactorTable table;
  std::map<std::pair<std::string, LevelKey>, std::vector<double>> ratios;
  std::set<MatchKey> seen_new;
  for (const MorphometricRecord& r : new_records) {
    const MatchKey key = match_key(r);
    if (!seen_new.insert(key).second) {
      throw Error(ErrorCode::InvalidArgument, "new records repeat a (subject, contrast, metric, level) key");
    }
    auto it = old_by_key.find(key);
    if (it == old_by_key.end()) {
      table.unmatched_new.push_back(r);
      continue;
    }
    if (it->second->value == 0.0) {
      throw Error(ErrorCode::DivisionByZeroValue, "old value is 0 for " + r.subject_id + "/" + r.metric + "/" + r.level_key.str());
    }
    ratios[{r.metric, r.level_key}].push_back(r.value / it->second->value);
  }
  for (const auto& [key, rec] : old_by_key) {
    if (!seen_new.contains(key)) table.unmatched_old.push_back(*rec);
  }
  if (ratios.empty()) throw Error(ErrorCode::NoOverlap, "no (subject, contrast, metric, level) key is shared");
  for (const auto& [key, values] : ratios) {
    table.rows[key.first].push_back(ScalingRow{key.second, mean_of(values), sample_std(values), values.size()});
  }
  return table;
}

// ------------------------------------------------------------ version compare

DriftReport compare_versions(const DriftStore& store, const std::string& base_version,
                             const std::string& candidate_version, const std::vector<std::string>& contrasts,
                             const LevelKey& level_key) {
  for (const std::string& v : {base_version, candidate_version}) {
    if (!store.has_version(v)) throw Error(ErrorCode::UnknownVersion, "version '" + v + "' is not in the store");
  }
  if (contrasts.size() < 2) throw Error(ErrorCode::InsufficientContrasts, "comparison needs at least two contrasts");

  const SubjectTable base_table = area_table(store, base_version, level_key);
  const SubjectTable cand_table = area_table(store, candidate_version, level_key);

  DriftReport report;
  report.base_version = base_version;
  report.candidate_version = candidate_version;
  report.contrasts = contrasts;
  report.level_key = level_key;

  std::set<std::string> subjects;
  for (const auto& [s, _] : base_table) subjects.insert(s);
  for (const auto& [s, _] : cand_table) subjects.insert(s);

  SubjectTable base_included, cand_included;
  for (const std::string& subject : subjects) {
    std::string reason;
    for (const auto& [version, table] : {std::pair{&base_version, &base_table}, std::pair{&candidate_version, &cand_table}}) {
      auto it = table->find(subject);
      for (const std::string& c : contrasts) {
        if (it == table->end() || !it->second.contains(c)) {
          reason += (reason.empty() ? "missing " : "; missing ") + c + " in " + *version;
        }
      }
    }
    if (!reason.empty()) {
      report.exclusions.push_back({subject, reason});
      continue;
    }
    base_included[subject] = base_table.at(subject);
    cand_included[subject] = cand_table.at(subject);
  }
  if (base_included.empty()) throw Error(ErrorCode::NoOverlap, "no subject has every contrast in both versions");

  auto summarize = [&](const std::string& version, const SubjectTable& table) {
    VersionSummary s;
    s.version_id = version;
    std::vector<double> stds;
    for (const auto& [subject, values] : table) {
      std::vector<double> v;
      for (const std::string& c : contrasts) v.push_back(values.at(c));
      s.subject_std.push_back({subject, sample_std(v)});
      stds.push_back(s.subject_std.back().std);
    }
    s.mean_csa_std = mean_of(stds);
    for (const std::string& c : contrasts) {
      std::vector<double> v;
      for (const auto& [subject, values] : table) v.push_back(values.at(c));
      s.contrast_mean_csa.emplace_back(c, mean_of(v));
    }
    if (table.size() >= 2) {
      for (std::size_t i = 0; i < contrasts.size(); ++i) {
        for (std::size_t j = i + 1; j < contrasts.size(); ++j) {
          const ContrastAgreement a = agreement_from_table(table, contrasts[i], contrasts[j]);
          s.agreement.push_back({a.contrast_a, a.contrast_b, a.pairs.size(), a.mean_difference, a.pearson_r});
        }
      }
    }
    return s;
  };
  report.base = summarize(base_version, base_included);
  report.candidate = summarize(candidate_version, cand_included);

  report.delta_mean_csa_std = report.candidate.mean_csa_std - report.base.mean_csa_std;
  if (report.base.mean_csa_std != 0.0) {
    report.delta_mean_csa_std_percent = 100.0 * report.delta_mean_csa_std / report.base.mean_csa_std;
  } else if (report.delta_mean_csa_std == 0.0) {
    report.delta_mean_csa_std_percent = 0.0;
  }
  for (std::size_t c = 0; c < contrasts.size(); ++c) {
    const double b = report.base.contrast_mean_csa[c].second;
    const double k = report.candidate.contrast_mean_csa[c].second;
    ContrastDelta d{contrasts[c], k - b, std::nullopt};
    if (b != 0.0) {
      d.relative_percent = 100.0 * (k - b) / b;
    } else if (k == b) {
      d.relative_percent = 0.0;
    }
    report.contrast_deltas.push_back(d);
  }
  for (std::size_t p = 0; p < report.base.agreement.size(); ++p) {
    const PairAgreementStats& b = report.base.agreement[p];
    const PairAgreementStats& k = report.candidate.agreement[p];
    AgreementDelta d{b.contrast_a, b.contrast_b, k.mean_difference - b.mean_difference, std::nullopt};
    if (b.pearson_r && k.pearson_r) d.pearson_r = *k.pearson_r - *b.pearson_r;
    report.agreement_deltas.push_back(d);
  }
  return report;
}

// ---------------------------------------------------------------------- gate

void GatePolicy::validate() const {
  if (!max_std_increase_abs && !max_std_increase_rel_percent) {
    throw Error(ErrorCode::InvalidPolicy, "policy needs an absolute and/or relative CSA-STD bound");
  }
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (max_std_increase_abs && !positive(*max_std_increase_abs)) {
    throw Error(ErrorCode::InvalidPolicy, "max_std_increase_abs must be positive");
  }
  if (max_std_increase_rel_percent && !positive(*max_std_increase_rel_percent)) {
    throw Error(ErrorCode::InvalidPolicy, "max_std_increase_rel_percent must be positive");
  }
  if (!positive(max_contrast_shift_percent)) {
    throw Error(ErrorCode::InvalidPolicy, "max_contrast_shift_percent must be positive");
  }
}

GateVerdict gate(const DriftReport& report, const GatePolicy& policy) {
  policy.validate();
  GateVerdict verdict;
  verdict.policy = policy;
  if (policy.max_std_increase_abs && report.delta_mean_csa_std > *policy.max_std_increase_abs) {
    verdict.violations.push_back({"mean CSA STD increase", report.delta_mean_csa_std, *policy.max_std_increase_abs, "mm^2"});
  }
  if (policy.max_std_increase_rel_percent) {
    const double rel = report.delta_mean_csa_std_percent.value_or(kInf);
    if (rel > *policy.max_std_increase_rel_percent) {
      verdict.violations.push_back({"mean CSA STD relative increase", rel, *policy.max_std_increase_rel_percent, "%"});
    }
  }
  for (const ContrastDelta& d : report.contrast_deltas) {
    const double shift = d.relative_percent ? std::abs(*d.relative_percent) : kInf;
    if (shift > policy.max_contrast_shift_percent) {
      verdict.violations.push_back({"mean CSA shift " + d.contrast, shift, policy.max_contrast_shift_percent, "%"});
    }
  }
  verdict.pass = verdict.violations.empty();
  return verdict;
}

std::vector<std::string> describe(const GateVerdict& verdict) {
  std::vector<std::string> lines;
  for (const Violation& v : verdict.violations) {
    lines.push_back(v.quantity + ": observed " + format_value(v.observed) + " " + v.unit + " > allowed " +
                    format_value(v.allowed) + " " + v.unit);
  }
  return lines;
}

// ------------------------------------------------------------- serialization

namespace {

ojson summary_to_json(const VersionSummary& s) {
  ojson j;
  j["version_id"] = s.version_id;
  j["mean_csa_std"] = s.mean_csa_std;
  ojson per_subject = ojson::array();
  for (const SubjectStd& x : s.subject_std) per_subject.push_back({{"subject", x.subject_id}, {"csa_std", x.std}});
  j["subject_csa_std"] = std::move(per_subject);
  ojson means = ojson::array();
  for (const auto& [c, m] : s.contrast_mean_csa) means.push_back({{"contrast", c}, {"mean_csa", m}});
  j["contrast_mean_csa"] = std::move(means);
  ojson agreement = ojson::array();
  for (const PairAgreementStats& a : s.agreement) {
    agreement.push_back({{"contrast_a", a.contrast_a},
                         {"contrast_b", a.contrast_b},
                         {"n", a.n},
                         {"mean_difference", a.mean_difference},
                         {"pearson_r", optional_number(a.pearson_r)}});
  }
  j["agreement"] = std::move(agreement);
  return j;
}

VersionSummary summary_from_json(const ojson& j) {
  VersionSummary s;
  s.version_id = j.at("version_id").get<std::string>();
  s.mean_csa_std = j.at("mean_csa_std").get<double>();
  for (const ojson& x : j.at("subject_csa_std")) s.subject_std.push_back({x.at("subject"), x.at("csa_std")});
  for (const ojson& x : j.at("contrast_mean_csa")) {
    s.contrast_mean_csa.emplace_back(x.at("contrast").get<std::string>(), x.at("mean_csa").get<double>());
  }
  for (const ojson& x : j.at("agreement")) {
    s.agreement.push_back({x.at("contrast_a"), x.at("contrast_b"), x.at("n").get<std::size_t>(),
                           x.at("mean_difference").get<double>(), read_optional(x.at("pearson_r"))});
  }
  return s;
}

ojson policy_to_json(const GatePolicy& p) {
  ojson j;
  j["max_std_increase_abs"] = optional_number(p.max_std_increase_abs);
  j["max_std_increase_rel_percent"] = optional_number(p.max_std_increase_rel_percent);
  j["max_contrast_shift_percent"] = p.max_contrast_shift_percent;
  return j;
}

GatePolicy policy_from_json(const ojson& j) {
  GatePolicy p;
  p.max_std_increase_abs = read_optional(j.at("max_std_increase_abs"));
  p.max_std_increase_rel_percent = read_optional(j.at("max_std_increase_rel_percent"));
  p.max_contrast_shift_percent = j.at("max_contrast_shift_percent").get<double>();
  return p;
}

}  // namespace

std::string report_to_json(const DriftReport& r) {
  ojson j;
  j["format"] = "cordmorph-drift-report/1";
  j["std_estimator"] = r.std_estimator;
  j["config_digest"] = r.config_digest;
  j["base_version"] = r.base_version;
  j["candidate_version"] = r.candidate_version;
  j["contrasts"] = r.contrasts;
  j["level_key"] = r.level_key.str();
  j["base"] = summary_to_json(r.base);
  j["candidate"] = summary_to_json(r.candidate);
  ojson deltas;
  deltas["mean_csa_std"] = r.delta_mean_csa_std;
  deltas["mean_csa_std_percent"] = optional_number(r.delta_mean_csa_std_percent);
  ojson per_contrast = ojson::array();
  for (const ContrastDelta& d : r.contrast_deltas) {
    per_contrast.push_back({{"contrast", d.contrast}, {"absolute", d.absolute}, {"relative_percent", optional_number(d.relative_percent)}});
  }
  deltas["contrast_mean_csa"] = std::move(per_contrast);
  ojson agreement = ojson::array();
  for (const AgreementDelta& d : r.agreement_deltas) {
    agreement.push_back({{"contrast_a", d.contrast_a},
                         {"contrast_b", d.contrast_b},
                         {"mean_difference", d.mean_difference},
                         {"pearson_r", optional_number(d.pearson_r)}});
  }
  deltas["agreement"] = std::move(agreement);
  j["deltas"] = std::move(deltas);
  ojson exclusions = ojson::array();
  for (const Exclusion& e : r.exclusions) exclusions.push_back({{"subject", e.subject_id}, {"reason", e.reason}});
  j["exclusions"] = std::move(exclusions);
  if (r.verdict) {
    ojson v;
    v["result"] = r.verdict->pass ? "PASS" : "FAIL";
    v["policy"] = policy_to_json(r.verdict->policy);
    ojson violations = ojson::array();
    for (const Violation& x : r.verdict->violations) {
      violations.push_back({{"quantity", x.quantity},
                            {"observed", number_or_null(x.observed)},
                            {"allowed", x.allowed},
                            {"unit", x.unit}});
    }
    v["violations"] = std::move(violations);
    j["verdict"] = std::move(v);
  } else {
    j["verdict"] = nullptr;
  }
  return j.dump(2) + "\n";
}

DriftReport report_from_json(std::string_view text) {
  try {
    const ojson j = ojson::parse(text);
    DriftReport r;
    r.std_estimator = j.at("std_estimator").get<std::string>();
    r.config_digest = j.value("config_digest", std::string());
    r.base_version = j.at("base_version").get<std::string>();
    r.candidate_version = j.at("candidate_version").get<std::string>();
    r.contrasts = j.at("contrasts").get<std::vector<std::string>>();
    r.level_key = LevelKey::parse(j.at("level_key").get<std::string>());
    r.base = summary_from_json(j.at("base"));
    r.candidate = summary_from_json(j.at("candidate"));
    const ojson& d = j.at("deltas");
    r.delta_mean_csa_std = d.at("mean_csa_std").get<double>();
    r.delta_mean_csa_std_percent = read_optional(d.at("mean_csa_std_percent"));
    for (const ojson& x : d.at("contrast_mean_csa")) {
      r.contrast_deltas.push_back({x.at("contrast"), x.at("absolute").get<double>(), read_optional(x.at("relative_percent"))});
    }
    for (const ojson& x : d.at("agreement")) {
      r.agreement_deltas.push_back({x.at("contrast_a"), x.at("contrast_b"), x.at("mean_difference").get<double>(),
                                    read_optional(x.at("pearson_r"))});
    }
    for (const ojson& x : j.at("exclusions")) r.exclusions.push_back({x.at("subject"), x.at("reason")});
    if (const ojson& v = j.at("verdict"); !v.is_null()) {
      GateVerdict verdict;
      verdict.pass = v.at("result").get<std::string>() == "PASS";
      verdict.policy = policy_from_json(v.at("policy"));
      for (const ojson& x : v.at("violations")) {
        verdict.violations.push_back({x.at("quantity"), read_number_or_inf(x.at("observed")), x.at("allowed").get<double>(), x.at("unit")});
      }
      r.verdict = std::move(verdict);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidRecord, std::string("malformed drift report: ") + e.what());
  }
}

std::string report_to_csv(const DriftReport& r) {
  std::string out = csv::format_row({"quantity", "base", "candidate", "delta", "delta_percent", "note"});
  auto opt = [](const std::optional<double>& v) { return v ? format_value(*v) : std::string(); };
  out += csv::format_row({"mean_csa_std", format_value(r.base.mean_csa_std), format_value(r.candidate.mean_csa_std),
                          format_value(r.delta_mean_csa_std), opt(r.delta_mean_csa_std_percent),
                          "std estimator " + r.std_estimator + " over " + r.level_key.str()});
  for (std::size_t c = 0; c < r.contrast_deltas.size(); ++c) {
    out += csv::format_row({"mean_csa:" + r.contrasts[c], format_value(r.base.contrast_mean_csa[c].second),
                            format_value(r.candidate.contrast_mean_csa[c].second),
                            format_value(r.contrast_deltas[c].absolute), opt(r.contrast_deltas[c].relative_percent), ""});
  }
  for (std::size_t p = 0; p < r.agreement_deltas.size(); ++p) {
    const auto& b = r.base.agreement[p];
    const auto& k = r.candidate.agreement[p];
    const std::string pair = b.contrast_a + "|" + b.contrast_b;
    out += csv::format_row({"agreement_mean_difference:" + pair, format_value(b.mean_difference),
                            format_value(k.mean_difference), format_value(r.agreement_deltas[p].mean_difference), "", ""});
    out += csv::format_row({"agreement_pearson_r:" + pair, opt(b.pearson_r), opt(k.pearson_r),
                            opt(r.agreement_deltas[p].pearson_r), "", ""});
  }
  if (r.verdict) {
    out += csv::format_row({"verdict", "", "", "", "", r.verdict->pass ? "PASS" : "FAIL"});
  }
  return out;
}

std::string scaling_table_to_csv(const ScalingFactorTable& table) {
  std::string out = csv::format_row({"metric", "level_key", "mean_ratio", "std_ratio", "n"});
  for (const auto& [metric, rows] : table.rows) {
    for (const ScalingRow& row : rows) {
      out += csv::format_row({metric, row.level_key.str(), format_value(row.mean_ratio), format_value(row.std_ratio),
                              std::to_string(row.n)});
    }
  }
  return out;
}

}  // namespace cordmorph
