#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hklab/cli.hpp"

using namespace hklab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("hklab_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Json minimal_config() {
  return Json{
      {"seed", 3},
      {"output_dir", "unused"},
      {"spaces", Json::array({Json{{"name", "line"}, {"kind", "box-grid"}, {"dim", 1},
                                   {"n_per_side", 65}, {"halfwidth", 4.0}}})},
      {"kernels", Json::array({Json{{"name", "lg"}, {"space", "line"},
                                    {"variant", "gaussian"}, {"alpha", 1.0}}})},
      {"profiles", Json::array({Json{{"name", "ge"}, {"kind", "stretched-exponential"},
                                     {"amplitude", 0.2820947917738782}, {"rate", 0.25},
                                     {"stretch", 2.0}}})},
      {"functions", Json::array({Json{{"name", "bump"}, {"family", "bump"},
                                      {"center", Json::array({0.0})}, {"width", 2.0}}})},
      {"suites",
       Json{{"moment", Json::array({Json{{"profile", "ge"}, {"gammas", Json::array({2.0})}}})},
            {"chain", Json::array({Json{{"kernel", "lg"},
                                        {"functions", Json::array({"bump"})},
                                        {"phi2", "ge"},
                                        {"sigma_factors", Json::array({0.75})},
                                        {"deltas", Json::array({0.3})}}})}}}};
}

std::string write_config(const fs::path& dir, const Json& j) {
  fs::path p = dir / "config.json";
  std::ofstream out(p);
  out << j.dump(2);
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cli: chain subcommand produces a passing report and files") {
  auto dir = temp_dir("chain");
  auto cfgp = write_config(dir, minimal_config());
  int rc = run_cli({"chain", "--config", cfgp, "--out", (dir / "out").string()});
  CHECK(rc == 0);
  CHECK(fs::exists(dir / "out" / "report.json"));
  CHECK(fs::exists(dir / "out" / "summary.txt"));
  Json rep = Json::parse(slurp(dir / "out" / "report.json"));
  CHECK(rep["incomplete"] == false);
  CHECK(rep["pass"]["chain"] == true);
  CHECK(rep["seed"] == 3);
}

TEST_CASE("cli: config validation failure names the field and exits 2") {
  auto dir = temp_dir("badcfg");
  Json cfg = minimal_config();
  // a t value below the resolution floor of the 65-point grid
  cfg["suites"]["chain"][0]["t"] = Json::array({1.0, 1e-9});
  auto cfgp = write_config(dir, cfg);
  int rc = run_cli({"chain", "--config", cfgp, "--out", (dir / "out").string()});
  CHECK(rc == 2);
}

TEST_CASE("cli: unknown reference is a config error") {
  auto dir = temp_dir("badref");
  Json cfg = minimal_config();
  cfg["suites"]["chain"][0]["kernel"] = "nope";
  auto cfgp = write_config(dir, cfg);
  CHECK(run_cli({"chain", "--config", cfgp, "--out", (dir / "out").string()}) == 2);
}

TEST_CASE("cli: budget violation exits 3") {
  auto dir = temp_dir("budget");
  Json cfg = minimal_config();
  cfg["spaces"][0]["n_per_side"] = 30000;
  auto cfgp = write_config(dir, cfg);
  CHECK(run_cli({"chain", "--config", cfgp, "--out", (dir / "out").string()}) == 3);
}

TEST_CASE("cli: moment divergence is a finding, not a failure") {
  auto dir = temp_dir("divergent");
  Json cfg = minimal_config();
  cfg["profiles"].push_back(
      Json{{"name", "fat"}, {"kind", "polynomial"}, {"amplitude", 1.0}, {"exponent", 1.5}});
  cfg["suites"]["moment"].push_back(
      Json{{"profile", "fat"}, {"gammas", Json::array({2.0})}});
  auto cfgp = write_config(dir, cfg);
  int rc = run_cli({"moment", "--config", cfgp, "--out", (dir / "out").string()});
  CHECK(rc == 0);
  Json rep = Json::parse(slurp(dir / "out" / "report.json"));
  bool found_divergent = false;
  for (const auto& run : rep["stages"]["moment"]["runs"])
    for (const auto& m : run["moments"])
      if (m.value("divergent", false)) found_divergent = true;
  CHECK(found_divergent);
}

TEST_CASE("cli: overrides reach the config") {
  auto dir = temp_dir("override");
  auto cfgp = write_config(dir, minimal_config());
  int rc = run_cli({"moment", "--config", cfgp, "--out", (dir / "out").string(),
                    "--override", "seed=99"});
  CHECK(rc == 0);
  Json rep = Json::parse(slurp(dir / "out" / "report.json"));
  CHECK(rep["seed"] == 99);
}

TEST_CASE("cli: byte-identical reports regardless of thread count") {
  auto dir = temp_dir("determinism");
  auto cfgp = write_config(dir, minimal_config());
  REQUIRE(run_cli({"all", "--config", cfgp, "--out", (dir / "t1").string(),
                   "--threads", "1"}) == 0);
  REQUIRE(run_cli({"all", "--config", cfgp, "--out", (dir / "t3").string(),
                   "--threads", "3"}) == 0);
  CHECK(slurp(dir / "t1" / "report.json") == slurp(dir / "t3" / "report.json"));
}

TEST_CASE("emit_plot_data re-emits series and names missing ones") {
  auto dir = temp_dir("plotdata");
  auto cfgp = write_config(dir, minimal_config());
  REQUIRE(run_cli({"chain", "--config", cfgp, "--out", (dir / "out").string()}) == 0);
  Json rep = Json::parse(slurp(dir / "out" / "report.json"));
  SECTION("chain overlay emits") {
    emit_plot_data(rep, "chain-overlay", "lg", dir / "overlay.csv");
    std::string csv = slurp(dir / "overlay.csv");
    CHECK(csv.rfind("t,B,S1,S2,S3", 0) == 0);
  }
  SECTION("missing series raises a named error") {
    CHECK_THROWS_WITH(emit_plot_data(rep, "energy-curve", "lg", dir / "x.csv"),
                      Catch::Matchers::ContainsSubstring("energy-curve"));
    CHECK_THROWS_WITH(emit_plot_data(rep, "nonsense", "lg", dir / "x.csv"),
                      Catch::Matchers::ContainsSubstring("nonsense"));
  }
}
