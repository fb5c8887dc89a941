#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <sstream>

#include "cordmorph/csv.hpp"
#include "cordmorph/error.hpp"
#include "cordmorph/fileio.hpp"
#include "cordmorph/phantom.hpp"
#include "cordmorph/workflow.hpp"

using namespace cordmorph;

namespace {

struct GlobalFlags {
  std::string config_path;
  std::string shard;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool stamp = false;
};

RunConfig resolve_config(const GlobalFlags& g) {
  RunConfig c = g.config_path.empty() ? RunConfig{} : RunConfig::load(g.config_path);
  if (!g.shard.empty()) c.shard = Shard::parse(g.shard);
  if (!g.out.empty()) c.out_dir = g.out;
  if (g.seed) c.seed = *g.seed;
  if (g.stamp) c.stamp = true;
  c.validate();
  return c;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// "v2:dilate:1" / "v3:erode" / "v1"
VersionVariant parse_variant(const std::string& text) {
  const auto parts = [&] {
    std::vector<std::string> p;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ':');) p.push_back(item);
    return p;
  }();
  if (parts.empty() || parts.size() > 3 || parts[0].empty()) {
    throw Error(ErrorCode::InvalidArgument, "bad version spec '" + text + "'");
  }
  VersionVariant v{parts[0], std::nullopt, 1};
  if (parts.size() >= 2) {
    if (parts[1] == "dilate") v.op = MorphOp::Dilate;
    else if (parts[1] == "erode") v.op = MorphOp::Erode;
    else if (parts[1] != "none") throw Error(ErrorCode::InvalidArgument, "unknown perturbation '" + parts[1] + "'");
  }
  if (parts.size() == 3) v.layers = std::stoi(parts[2]);
  return v;
}

DriftStore load_stores(const std::vector<std::string>& paths) {
  DriftStore store;
  for (const std::string& p : paths) {
    if (!std::filesystem::exists(p)) throw Error(ErrorCode::IOFailure, "store not found: " + p);
    store.merge(DriftStore::load(p));
  }
  return store;
}

std::pair<std::string, std::string> pick_versions(const RunConfig& c, const std::string& base, const std::string& candidate) {
  const std::string b = !base.empty() ? base : c.base_version.value_or("");
  const std::string k = !candidate.empty() ? candidate : c.candidate_version.value_or("");
  if (b.empty() || k.empty()) {
    throw Error(ErrorCode::InvalidArgument, "base and candidate versions are required (--base/--candidate or config)");
  }
  return {b, k};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spinal cord morphometrics and segmentation drift gate"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  app.add_option("--config", g.config_path, "TOML run configuration");
  app.add_option("--shard", g.shard, "process manifest rows with index mod n == k")->type_name("k/n");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--seed", g.seed, "random seed");
  app.add_flag("--stamp", g.stamp, "add a generation timestamp to the verdict");

  auto* phantom = app.add_subcommand("phantom", "write a synthetic multi-contrast cohort and its manifest");
  std::size_t n_subjects = 5;
  double jitter = 0.0, spread = 0.1;
  std::string contrasts_arg;
  std::vector<std::string> version_args{"v1"};
  phantom->add_option("--subjects", n_subjects, "number of subjects")->check(CLI::PositiveNumber);
  phantom->add_option("--jitter", jitter, "fraction of boundary voxels flipped per contrast")->check(CLI::Range(0.0, 1.0));
  phantom->add_option("--spread", spread, "relative per-subject spread of the semi axes")->check(CLI::Range(0.0, 0.5));
  phantom->add_option("--contrasts", contrasts_arg, "comma separated contrast list");
  phantom->add_option("--version", version_args, "id[:dilate|erode[:layers]], repeatable");

  auto* split = app.add_subcommand("split", "subject-wise train/test split of a manifest");
  std::string manifest_path;
  double ratio = 0.2;
  split->add_option("--manifest", manifest_path, "dataset manifest CSV")->required();
  split->add_option("--ratio", ratio, "test fraction");

  auto* compute = app.add_subcommand("compute", "run morphometrics over a manifest into a drift store");
  compute->add_option("--manifest", manifest_path, "dataset manifest CSV")->required();

  std::vector<std::string> store_paths;
  std::string base, candidate;
  auto* compare = app.add_subcommand("compare", "compare two versions and write the drift report");
  auto* report = app.add_subcommand("report", "write drift report, plots and the release bundle");
  for (auto* sub : {compare, report}) {
    sub->add_option("--store", store_paths, "drift store NDJSON, repeatable")->required();
    sub->add_option("--base", base, "base model version");
    sub->add_option("--candidate", candidate, "candidate model version");
  }

  auto* gate_cmd = app.add_subcommand("gate", "apply the drift policy to a report");
  std::string report_path;
  gate_cmd->add_option("--report", report_path, "report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    RunConfig config = resolve_config(g);
    if (*phantom) {
      CohortSpec spec;
      spec.n_subjects = n_subjects;
      spec.jitter_fraction = jitter;
      spec.anatomy_spread = spread;
      spec.seed = config.seed;
      if (!contrasts_arg.empty()) spec.contrasts = split_list(contrasts_arg);
      spec.versions.clear();
      for (const std::string& v : version_args) spec.versions.push_back(parse_variant(v));
      const DatasetManifest m = make_cohort(spec, config.out_dir);
      std::cout << "wrote " << m.rows.size() << " masks to " << config.out_dir.string() << "\n";
    } else if (*split) {
      const DatasetManifest m = DatasetManifest::read(manifest_path);
      std::vector<std::string> subjects;
      for (const ManifestRow& r : m.rows) subjects.push_back(r.subject_id);
      const SplitAssignment a = split_subjects(subjects, ratio, config.seed);
      std::string out = csv::format_row({"subject_id", "partition"});
      for (const auto& [subject, part] : a.partition) {
        out += csv::format_row({subject, part == Partition::Test ? "test" : "train"});
      }
      write_file_atomic(config.out_dir / "split.csv", out);
      std::cout << out;
    } else if (*compute) {
      const DatasetManifest m = DatasetManifest::read(manifest_path);
      const RunResult r = run_morphometrics(m, config);
      write_run_outputs(r, config);
      for (const std::string& w : r.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "shard " << config.shard.str() << ": processed " << r.processed << ", failed " << r.failed
                << ", records " << r.store.size() << "\n";
    } else if (*compare) {
      const DriftStore store = load_stores(store_paths);
      const auto [b, k] = pick_versions(config, base, candidate);
      DriftReport rep = compare_versions(store, b, k, config.contrasts, config.level_key());
      rep.config_digest = config.digest();
      rep.verdict = cordmorph::gate(rep, config.policy);
      write_file_atomic(config.out_dir / "report.json", report_to_json(rep));
      write_file_atomic(config.out_dir / "report.csv", report_to_csv(rep));
      std::cout << "report written to " << (config.out_dir / "report.json").string() << "\n";
    } else if (*report) {
      const DriftStore store = load_stores(store_paths);
      const auto [b, k] = pick_versions(config, base, candidate);
      const EmitResult r = emit_reports(store, b, k, config);
      for (const auto& f : r.files) std::cout << f.generic_string() << "\n";
    } else if (*gate_cmd) {
      return gate_cli(report_path, config.policy, std::cerr);
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
