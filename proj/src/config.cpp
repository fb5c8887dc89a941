#include <algorithm>
#include <charconv>
#include <random>

#include <json.hpp>
#include <toml.hpp>

#include "cordmorph/error.hpp"
#include "cordmorph/fileio.hpp"
#include "cordmorph/workflow.hpp"

namespace cordmorph {

namespace {

std::size_t parse_size(std::string_view text, std::string_view what) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::InvalidConfig, "bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return v;
}

[[noreturn]] void bad(const std::string& message) { throw Error(ErrorCode::InvalidConfig, message); }

std::vector<std::string> string_array(const toml::node& node, std::string_view key) {
  const toml::array* arr = node.as_array();
  if (!arr) bad(std::string(key) + " must be an array of strings");
  std::vector<std::string> out;
  for (const toml::node& item : *arr) {
    const auto s = item.value<std::string>();
    if (!s) bad(std::string(key) + " must be an array of strings");
    out.push_back(*s);
  }
  return out;
}

double positive_number(const toml::node& node, std::string_view key) {
  const auto v = node.value<double>();
  if (!v) bad(std::string(key) + " must be a number");
  return *v;
}

}  // namespace

Shard Shard::parse(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) bad("shard must look like k/n");
  Shard s{parse_size(text.substr(0, slash), "shard index"), parse_size(text.substr(slash + 1), "shard count")};
  if (s.count == 0 || s.index >= s.count) bad("shard index must satisfy 0 <= k < n");
  return s;
}

void RunConfig::validate() const {
  if (levels.empty()) bad("level set must not be empty");
  if (std::any_of(levels.begin(), levels.end(), [](int l) { return l <= 0; })) bad("levels must be positive");
  if (metrics.empty()) bad("metric list must not be empty");
  if (contrasts.empty()) bad("contrast list must not be empty");
  if (shard.count == 0 || shard.index >= shard.count) bad("shard index must satisfy 0 <= k < n");
  policy.validate();
}

std::string RunConfig::digest() const {
  nlohmann::ordered_json j;
  j["levels"] = levels;
  std::vector<std::string> names;
  for (Metric m : metrics) names.emplace_back(metric_name(m));
  j["metrics"] = names;
  j["contrasts"] = contrasts;
  j["seed"] = seed;
  j["per_slice_records"] = per_slice_records;
  j["base_version"] = base_version.value_or("");
  j["candidate_version"] = candidate_version.value_or("");
  j["agreement_pair"] = {agreement_pair.first, agreement_pair.second};
  j["gate"] = {{"max_std_increase_abs", policy.max_std_increase_abs.value_or(0.0)},
               {"max_std_increase_rel_percent", policy.max_std_increase_rel_percent.value_or(0.0)},
               {"max_contrast_shift_percent", policy.max_contrast_shift_percent}};
  return sha256_hex(j.dump());
}

RunConfig RunConfig::from_toml(std::string_view text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    bad(std::string("config is not valid TOML: ") + std::string(e.description()));
  }
  RunConfig c;
  for (const auto& [key_node, node] : root) {
    const std::string key(key_node.str());
    if (key == "levels") {
      const toml::array* arr = node.as_array();
      if (!arr) bad("levels must be an array of integers");
      c.levels.clear();
      for (const toml::node& item : *arr) {
        const auto v = item.value<std::int64_t>();
        if (!v) bad("levels must be an array of integers");
        c.levels.insert(static_cast<int>(*v));
      }
    } else if (key == "metrics") {
      c.metrics.clear();
      for (const std::string& name : string_array(node, key)) {
        try {
          c.metrics.push_back(parse_metric(name));
        } catch (const Error&) {
          bad("unknown metric '" + name + "'");
        }
      }
    } else if (key == "contrasts") {
      c.contrasts = string_array(node, key);
    } else if (key == "out") {
      const auto v = node.value<std::string>();
      if (!v) bad("out must be a string");
      c.out_dir = *v;
    } else if (key == "shard") {
      const auto v = node.value<std::string>();
      if (!v) bad("shard must be a \"k/n\" string");
      c.shard = Shard::parse(*v);
    } else if (key == "seed") {
      const auto v = node.value<std::int64_t>();
      if (!v || *v < 0) bad("seed must be a non-negative integer");
      c.seed = static_cast<std::uint64_t>(*v);
    } else if (key == "threads") {
      const auto v = node.value<std::int64_t>();
      if (!v || *v < 0) bad("threads must be a non-negative integer");
      c.threads = static_cast<std::size_t>(*v);
    } else if (key == "per_slice_records") {
      const auto v = node.value<bool>();
      if (!v) bad("per_slice_records must be a boolean");
      c.per_slice_records = *v;
    } else if (key == "base_version" || key == "candidate_version") {
      const auto v = node.value<std::string>();
      if (!v) bad(key + " must be a string");
      (key == "base_version" ? c.base_version : c.candidate_version) = *v;
    } else if (key == "agreement_pair") {
      const auto pair = string_array(node, key);
      if (pair.size() != 2) bad("agreement_pair must hold two contrasts");
      c.agreement_pair = {pair[0], pair[1]};
    } else if (key == "gate") {
      const toml::table* gate = node.as_table();
      if (!gate) bad("[gate] must be a table");
      c.policy = GatePolicy{std::nullopt, std::nullopt, c.policy.max_contrast_shift_percent};
      bool any_std_bound = false;
      for (const auto& [gk, gv] : *gate) {
        const std::string name(gk.str());
        if (name == "max_std_increase_abs") {
          c.policy.max_std_increase_abs = positive_number(gv, name);
          any_std_bound = true;
        } else if (name == "max_std_increase_rel_percent") {
          c.policy.max_std_increase_rel_percent = positive_number(gv, name);
          any_std_bound = true;
        } else if (name == "max_contrast_shift_percent") {
          c.policy.max_contrast_shift_percent = positive_number(gv, name);
        } else {
          bad("unknown [gate] key '" + name + "'");
        }
      }
      if (!any_std_bound) c.policy.max_std_increase_rel_percent = GatePolicy{}.max_std_increase_rel_percent;
    } else if (key == "versions") {
      const toml::table* versions = node.as_table();
      if (!versions) bad("[versions] must be a table");
      for (const auto& [vk, vv] : *versions) {
        const toml::table* meta = vv.as_table();
        if (!meta) bad("[versions." + std::string(vk.str()) + "] must be a table");
        ModelVersion mv{std::string(vk.str()), std::nullopt, {}};
        for (const auto& [mk, mvv] : *meta) {
          const std::string name(mk.str());
          const auto s = mvv.value<std::string>();
          if (!s) bad("version metadata must be strings");
          if (name == "source_url") {
            mv.source_url = *s;
          } else if (name == "created") {
            mv.created = *s;
          } else {
            bad("unknown version key '" + name + "'");
          }
        }
        c.versions[mv.version_id] = mv;
      }
    } else {
      bad("unknown config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  return from_toml(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::size_t SplitAssignment::test_count() const {
  return static_cast<std::size_t>(
      std::count_if(partition.begin(), partition.end(), [](const auto& p) { return p.second == Partition::Test; }));
}

SplitAssignment split_subjects(std::vector<std::string> subjects, double ratio, std::uint64_t seed) {
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  if (subjects.size() < 2) throw Error(ErrorCode::TooFewSubjects, "a split needs at least two distinct subjects");
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorCode::InvalidArgument, "split ratio must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  std::shuffle(subjects.begin(), subjects.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(subjects.size())));
  SplitAssignment out;
  out.ratio = ratio;
  out.seed = seed;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    out.partition[subjects[i]] = i < n_test ? Partition::Test : Partition::Train;
  }
  return out;
}

}  // namespace cordmorph
