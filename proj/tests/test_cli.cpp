#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

#include "cordmorph/fileio.hpp"

namespace fs = std::filesystem;

namespace {

int cli(const std::string& args, const fs::path& log = "/dev/null") {
  const std::string cmd = std::string(CORDMORPH_CLI) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string text_of(const fs::path& p) {
  const auto b = cordmorph::read_file(p);
  return {b.begin(), b.end()};
}

}  // namespace

TEST_CASE("end to end through the command line") {
  const fs::path dir = fs::temp_directory_path() / "cordmorph_cli_test";
  fs::remove_all(dir);
  const std::string d = dir.string();
  REQUIRE(cli("phantom --out " + d + "/data --seed 3 --subjects 4 --jitter 0.05 --version v1 --version v2:dilate:1 "
              "--version v3") == 0);
  REQUIRE(cli("compute --manifest " + d + "/data/manifest.csv --out " + d + "/run") == 0);
  CHECK(fs::exists(dir / "run" / "per_slice.csv"));
  CHECK(fs::exists(dir / "run" / "summary.json"));

  CHECK(cli("split --manifest " + d + "/data/manifest.csv --seed 1 --out " + d + "/split") == 0);
  CHECK(text_of(dir / "split" / "split.csv").find("test") != std::string::npos);

  // v3 is an unperturbed copy of v1 and passes; v2 over-segments and fails
  CHECK(cli("compare --store " + d + "/run/store.ndjson --base v1 --candidate v3 --out " + d + "/same") == 0);
  CHECK(cli("gate --report " + d + "/same/report.json") == 0);
  CHECK(cli("report --store " + d + "/run/store.ndjson --base v1 --candidate v2 --out " + d + "/drift") == 0);
  CHECK(cli("gate --report " + d + "/drift/report.json", dir / "gate.log") == 2);
  CHECK(text_of(dir / "gate.log").find("mean CSA shift") != std::string::npos);

  // a looser policy from config turns the same report into a pass
  cordmorph::write_file_atomic(dir / "loose.toml", std::string_view("[gate]\nmax_std_increase_rel_percent = 1000\n"
                                                                    "max_contrast_shift_percent = 1000\n"));
  CHECK(cli("--config " + d + "/loose.toml gate --report " + d + "/drift/report.json") == 0);

  CHECK(cli("gate --report " + d + "/nope.json") == 1);
  CHECK(cli("compute --manifest " + d + "/missing.csv --out " + d + "/x") == 1);
  CHECK(cli("compare --store " + d + "/run/store.ndjson --base v1 --candidate v9 --out " + d + "/x") == 1);
  CHECK(cli("compute --manifest " + d + "/data/manifest.csv --shard 4/4") == 1);
  CHECK(cli("frobnicate") == 1);
  CHECK(cli("") == 1);
  fs::remove_all(dir);
}
