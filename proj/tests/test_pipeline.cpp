#include "locrobust/io.hpp"
#include "locrobust/pipeline.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <sys/wait.h>

using namespace locrobust;
namespace fs = std::filesystem;
namespace pl = locrobust::pipeline;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("locrobust_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kLineWorld = R"({
  "seed": 3,
  "route": {"start": [0, 0, 0], "segments": [{"line": 60}, {"arc": [10, 1.5707963267948966]}, {"line": 40}]},
  "zones": [{"name": "dense", "begin": 0, "end": 115.70796326794897, "pole_density": 30, "corner_density": 30}]
})";

const char* kQuietSensors = R"({
  "lidar": {"noise_sigma": 0, "clutter_rate": 0, "detection_probability": 1},
  "gps": {"sigma": 0},
  "odometry": {"velocity_sigma": 0, "yaw_rate_sigma": 0, "yaw_rate_bias": 0}
})";

// Small, fast run: short route, coarse VPT lattice, few frames.
std::string manifest_text(const std::string& extra = "") {
  return std::string(R"({
  "seed": 17,
  "world": "world.json",
  "metrics": {
    "pau": {"max_length": 10, "length_step": 0.5, "stride": 0.5},
    "vpt": {"xy_extent": 2, "frame_stride": 20, "contour_arcs": [30]}
  })") + extra + "\n}";
}

pl::RunManifest setup(const fs::path& dir, const std::string& extra = "") {
  write(dir / "world.json", kLineWorld);
  write(dir / "quiet.json", kQuietSensors);
  write(dir / "m.json", manifest_text(extra + R"(, "output_dir": "out")"));
  return pl::load_manifest(dir / "m.json");
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("LOCROBUST_CLI");
  REQUIRE_MESSAGE(cli != nullptr, "LOCROBUST_CLI must point at the locrobust binary");
  const int status = std::system((std::string(cli) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("manifest validation") {
  const fs::path dir = scratch("manifest");
  write(dir / "world.json", kLineWorld);
  CHECK_NOTHROW(pl::parse_manifest(manifest_text(), dir));
  CHECK_THROWS_AS(pl::parse_manifest("{}", dir), pl::ManifestError);
  CHECK_THROWS_AS(pl::parse_manifest("{\"seed\": 1, \"colour\": 2}", dir), pl::ManifestError);
  CHECK_THROWS_AS(pl::parse_manifest("{\"seed\": 1, \"world\": \"missing.json\"}", dir), pl::ManifestError);
  CHECK_THROWS_AS(pl::parse_manifest("{\"seed\": 1, \"world\": \"preset:moon\"}", dir), pl::ManifestError);
  CHECK_THROWS_AS(pl::parse_manifest("{\"seed\": 1, \"strategies\": [\"Lidar\"]}", dir), pl::ManifestError);
  CHECK_THROWS_AS(pl::parse_manifest("{\"seed\": 1, \"strategies\": [\"Gps\", \"Gps\"]}", dir), pl::ManifestError);
  CHECK_THROWS_AS(pl::parse_manifest("{\"seed\": 1, \"metrics\": {\"pau\": {\"stride\": 0}}}", dir), pl::ManifestError);
  CHECK_THROWS_AS(pl::parse_manifest("{\"seed\": 1, \"metrics\": {\"vpt\": {\"theta_slice\": 0.05}}}", dir),
                  pl::ManifestError);
  CHECK_THROWS_AS(pl::parse_manifest("{\"seed\": 1, \"icp\": {\"min_inliers\": 1}}", dir), pl::ManifestError);
  CHECK_THROWS_AS(pl::parse_manifest("{\"seed\": 1,", dir), pl::ManifestError);
  write(dir / "bad_world.json", R"({"route": {"segments": [{"line": -5}]}})");
  CHECK_THROWS_AS(pl::parse_manifest("{\"seed\": 1, \"world\": \"bad_world.json\"}", dir), pl::ManifestError);

  const auto m = pl::parse_manifest(manifest_text(", \"strategies\": [\"Pole\"], \"filter\": {\"gps_sigma\": 3}"), dir);
  CHECK(m.seed == 17);
  CHECK(m.strategies == std::vector<filter::StrategyMode>{filter::StrategyMode::Pole});
  CHECK(m.strategy_config(filter::StrategyMode::Gps).gps_used_after_init);
  CHECK(m.strategy_config(filter::StrategyMode::Gps).gps_sigma == 3.0);
  CHECK(m.vpt.profile.grid.xy_extent == 2.0);
}

TEST_CASE("output directory resolution") {
  const fs::path dir = scratch("outdir");
  write(dir / "world.json", kLineWorld);
  const auto explicit_dir = pl::parse_manifest(manifest_text(", \"output_dir\": \"here\""), dir);
  CHECK(explicit_dir.output_dir == dir / "here");
  ::setenv("LOCROBUST_OUT", "/tmp/locrobust_env_out", 1);
  CHECK(pl::parse_manifest(manifest_text(), dir).output_dir == fs::path("/tmp/locrobust_env_out"));
  ::unsetenv("LOCROBUST_OUT");
  CHECK(pl::parse_manifest(manifest_text(), dir).output_dir == fs::path("locrobust_out"));
}

TEST_CASE("zero-density world writes a header-only map") {
  const fs::path dir = scratch("empty");
  write(dir / "world.json", R"({"route": {"segments": [{"line": 50}]}, "zones": []})");
  write(dir / "m.json", R"({"seed": 2, "world": "world.json", "output_dir": "out"})");
  std::ostringstream log;
  const auto r = pl::cmd_simulate(pl::load_manifest(dir / "m.json"), {}, log);
  CHECK(r.world.map.size() == 0);
  CHECK(slurp(dir / "out" / pl::files::kMap) == "# locrobust " + std::string(kVersion) + " seed=2\nid,class,easting,northing\n");
  CHECK(log.str().find("route length     50.000 m") != std::string::npos);
}

TEST_CASE("quad preset reports the loop length") {
  const fs::path dir = scratch("quad_length");
  write(dir / "m.json", R"({"seed": 1, "world": "preset:quad", "output_dir": "out"})");
  std::ostringstream log;
  pl::cmd_simulate(pl::load_manifest(dir / "m.json"), {}, log);
  CHECK(log.str().find("route length     470.000 m") != std::string::npos);
}

TEST_CASE("full pipeline: four log pairs, artifacts, seed headers") {
  const fs::path dir = scratch("full");
  const auto m = setup(dir);
  std::ostringstream log;
  CHECK(pl::cmd_report(m, {2}, log) == 0);
  const fs::path out = dir / "out";
  for (const auto mode : m.strategies) {
    CHECK(fs::exists(out / pl::files::state_log(mode)));
    CHECK(fs::exists(out / pl::files::event_log(mode)));
    CHECK(fs::exists(out / pl::files::pau(mode)));
  }
  const std::string header = "# locrobust " + std::string(kVersion) + " seed=17";
  for (const auto& e : fs::directory_iterator(out)) {
    const std::string text = slurp(e.path());
    if (e.path().extension() == ".svg") {
      CHECK(text.find(header.substr(2)) != std::string::npos);
    } else {
      CHECK(text.rfind(header, 0) == 0);
    }
  }
  for (const char* f : {pl::files::kMap, pl::files::kDataset, pl::files::kLattice, pl::files::kProfile,
                        pl::files::kWindows, pl::files::kMargin, pl::files::kPauSvg, pl::files::kBoundsSvg,
                        pl::files::kContourSvg, pl::files::kMarginSvg, pl::files::kReport}) {
    CHECK_MESSAGE(fs::exists(out / f), f);
  }
  // The PoleCorner event log is not empty on a feature-rich world.
  std::ifstream ev(out / pl::files::event_log(filter::StrategyMode::PoleCorner));
  const auto events = io::read_events(ev);
  CHECK(filter::accepted_events(events).size() > 50);
}

TEST_CASE("reruns are byte-identical, independent of the thread count") {
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  std::ostringstream log;
  CHECK(pl::cmd_report(setup(a), {1}, log) == 0);
  CHECK(pl::cmd_report(setup(b), {3}, log) == 0);
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(a / "out")) {
    const fs::path other = b / "out" / e.path().filename();
    REQUIRE(fs::exists(other));
    std::string x = slurp(e.path());
    std::string y = slurp(other);
    if (e.path().filename() == pl::files::kReport) {
      // The report names its manifest and output paths.
      const std::regex paths("(manifest|wrote): .*|wrote +.*");
      x = std::regex_replace(x, paths, "");
      y = std::regex_replace(y, paths, "");
    }
    CHECK_MESSAGE(x == y, e.path().filename().string());
    ++compared;
  }
  CHECK(compared >= 20);
}

TEST_CASE("noise-free dead reckoning ends on the ground truth") {
  const fs::path dir = scratch("noise_free");
  const auto m = setup(dir, R"(, "sensors": "quiet.json", "strategies": ["DeadReckoning"],
    "filter": {"gps_sigma": 1e-9, "distance_sigma": 0, "heading_sigma": 0})");
  std::ostringstream log;
  pl::cmd_simulate(m, {}, log);
  const auto out = pl::cmd_localise(m, {}, log);
  REQUIRE(out.size() == 1);
  REQUIRE(out[0].final_position_error.has_value());
  CHECK(*out[0].final_position_error < 1e-6);
}

TEST_CASE("metrics: flat PAU curve for an empty event log and legend names") {
  const fs::path dir = scratch("legend");
  const auto m = setup(dir, R"(, "strategies": ["DeadReckoning", "PoleCorner"], "metrics": {
    "pau": {"max_length": 10}, "vpt": {"xy_extent": 2, "frame_stride": 20}, "margin": {"strategy": "PoleCorner"}})");
  std::ostringstream log;
  CHECK(pl::cmd_report(m, {}, log) == 0);
  const auto r = pl::cmd_metrics(m, {}, log);
  const auto& dr = r.strategies.at(filter::StrategyMode::DeadReckoning);
  for (double p : dr.pau.probabilities) CHECK(p == 1.0);
  CHECK_FALSE(dr.cutoff.has_value());
  CHECK(r.strategies.at(filter::StrategyMode::PoleCorner).area < dr.area);

  const std::string svg = slurp(dir / "out" / pl::files::kPauSvg);
  std::vector<std::string> legend;
  const std::regex re("<text class=\"legend\"[^>]*>([^<]*)</text>");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it) {
    legend.push_back((*it)[1]);
  }
  CHECK(legend == std::vector<std::string>{"DeadReckoning", "PoleCorner"});
  CHECK(svg.find("<polyline") != std::string::npos);
}

TEST_CASE("metrics without ground truth skip VPT with a warning") {
  const fs::path dir = scratch("no_truth");
  const auto m = setup(dir, R"(, "strategies": ["Pole"])");
  std::ostringstream log;
  pl::cmd_simulate(m, {}, log);
  pl::cmd_localise(m, {}, log);
  // Drop the truth records.
  const fs::path ds = dir / "out" / pl::files::kDataset;
  std::istringstream in(slurp(ds));
  std::string kept;
  for (std::string line; std::getline(in, line);) {
    if (line.find("\"type\":\"truth\"") == std::string::npos) kept += line + "\n";
  }
  write(ds, kept);
  const auto r = pl::cmd_metrics(m, {}, log);
  CHECK_FALSE(r.profile.has_value());
  CHECK_FALSE(r.complete);
  REQUIRE_FALSE(r.warnings.empty());
  CHECK(r.warnings.back().find("VPT") != std::string::npos);
  CHECK(r.strategies.count(filter::StrategyMode::Pole) == 1);
}

TEST_CASE("initialisation failure is reported per strategy") {
  const fs::path dir = scratch("init_fail");
  write(dir / "world.json", R"({"route": {"segments": [{"line": 60}]},
    "zones": [{"begin": 0, "end": 60, "pole_density": 30, "corner_density": 30}],
    "gps_dropout_zones": [[0, 60]]})");
  write(dir / "m.json", R"({"seed": 4, "world": "world.json", "output_dir": "out"})");
  const auto m = pl::load_manifest(dir / "m.json");
  std::ostringstream log;
  pl::cmd_simulate(m, {}, log);
  const auto out = pl::cmd_localise(m, {2}, log);
  REQUIRE(out.size() == 4);
  for (const auto& o : out) {
    CHECK_FALSE(o.run.has_value());
    CHECK_FALSE(o.error.empty());
  }
  CHECK(log.str().find("initialisation failed") != std::string::npos);
}

TEST_CASE("command line") {
  const fs::path dir = scratch("cli");
  setup(dir);
  const std::string m = "--manifest " + (dir / "m.json").string();
  CHECK(run_cli("simulate " + m) == 0);
  CHECK(run_cli("localise " + m + " --threads 2") == 0);
  CHECK(run_cli("metrics " + m) == 0);
  CHECK(run_cli("report " + m + " --seed 99 -j 0") == 0);
  CHECK(slurp(dir / "out" / pl::files::kMap).rfind("# locrobust " + std::string(kVersion) + " seed=99", 0) == 0);
  CHECK(run_cli("verify --seed 3") == 0);
  CHECK(run_cli("simulate --manifest " + (dir / "nope.json").string()) != 0);
  write(dir / "bad.json", "{\"seed\": 1, \"extra\": true}");
  CHECK(run_cli("simulate --manifest " + (dir / "bad.json").string()) == 2);
  CHECK(run_cli("frobnicate") != 0);
  CHECK(run_cli("--version") == 0);
}
