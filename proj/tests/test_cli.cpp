#include <doctest.h>

#include <filesystem>

#include "helpers.hpp"
#include "saw/cli.hpp"
#include "saw/config.hpp"

using namespace saw;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

Json base_config(const fs::path& out) {
  return Json{{"ambient", {{"n", 2}}},
              {"window", {{"lo", {-0.5, -1.0}}, {"hi", {1.5, 1.0}}}},
              {"boundary", {{"kind", "cantor"}, {"params", {{"depth", 10}}}}},
              {"dyadic", {{"k_max", 5}}},
              {"whitney", {{"k_leaf", 7}}},
              {"grid", {{"cells", 32}}},
              {"data", {{"kind", "bump"}, {"center", {0.5, 0.0}}, {"radius", 0.6}}},
              {"harmonic", {{"generation", 2}}},
              {"output", {{"dir", out.string()}}}};
}

fs::path write_config(const fs::path& dir, const Json& j) {
  fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("missing or malformed config is exit code 2") {
    auto dir = scratch("cli-config");
    CHECK(run_cli({"decompose", "--what", "whitney", "--config", (dir / "absent.json").string()}) == kExitConfig);
    Json j = base_config(dir / "out");
    j.erase("window");
    CHECK(run_cli({"decompose", "--config", write_config(dir, j).string()}) == kExitConfig);
    j = base_config(dir / "out");
    j["whitney"]["theta"] = 0.5;
    CHECK(run_cli({"decompose", "--config", write_config(dir, j).string()}) == kExitConfig);
    CHECK(run_cli({"frobnicate"}) == kExitConfig);
  }

  TEST_CASE("config errors name the offending field") {
    Json j = base_config("out");
    j["grid"]["cells"] = 4;
    try {
      parse_config(j);
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("grid.cells") != std::string::npos);
    }
  }

  TEST_CASE("environment overrides replace nested fields") {
    Json j = base_config("out");
    std::string a = "SAWTOOTH_GRID__CELLS=40", b = "SAWTOOTH_SAWTOOTH__FAMILY=random p=0.2", c = "OTHER=1";
    char* envp[] = {a.data(), b.data(), c.data(), nullptr};
    apply_env_overrides(j, envp);
    RunConfig cfg = parse_config(j);
    CHECK(cfg.grid_cells == 40);
    CHECK(cfg.family == "random p=0.2");
  }

  TEST_CASE("outputs are byte-identical across runs") {
    auto dir = scratch("cli-determinism");
    auto run = [&](const std::string& tag) {
      Json j = base_config(dir / tag);
      auto cfg = write_config(dir, j).string();
      REQUIRE(run_cli({"decompose", "--what", "whitney", "--config", cfg}) == kExitOk);
      REQUIRE(run_cli({"decompose", "--what", "dyadic", "--config", cfg}) == kExitOk);
      REQUIRE(run_cli({"solve", "--config", cfg}) == kExitOk);
      REQUIRE(run_cli({"report", "--out", (dir / tag).string()}) == kExitOk);
    };
    run("a");
    run("b");
    for (const char* f : {"whitney.csv", "whitney_report.json", "dyadic.jsonl", "solution.json", "solution.csv",
                          "summary.json"})
      CHECK_MESSAGE(slurp(dir / "a" / f) == slurp(dir / "b" / f), f);
  }

  TEST_CASE("global options work after the subcommand") {
    auto dir = scratch("cli-global");
    auto cfg = write_config(dir, base_config(dir / "ignored")).string();
    CHECK(run_cli({"solve", "--config", cfg, "--out", (dir / "chosen").string(), "--workers", "2"}) == kExitOk);
    CHECK(fs::exists(dir / "chosen" / "solution.json"));
    Json sol = load_json_file((dir / "chosen" / "solution.json").string());
    CHECK(sol["solution"]["max_principle_ok"].get<bool>());
  }
}
