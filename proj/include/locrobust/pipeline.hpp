#pragma once

// Manifest-driven evaluation workflow behind the `locrobust` command.
//
// Manifest (JSON); every key except "seed" is optional:
//   {
//     "seed": 42,
//     "world": "preset:quad" | "preset:rich" | "<path to world json>",
//     "sensors": "preset:default" | "<path to sensor json>",
//     "speed": 5.0,
//     "strategies": ["DeadReckoning", "Gps", "Pole", "PoleCorner"],
//     "icp": {"correspondence_gate": 3.0, "max_iterations": 50, "convergence_tol_m": 1e-4,
//             "convergence_tol_rad": 1e-5, "min_inliers": 3, "max_rms": 0.5},
//     "filter": {"gps_sigma": 2.0, "icp_position_sigma": 0.1, "icp_heading_sigma": 0.01,
//                "distance_sigma": 0.02, "heading_sigma": 0.003, "gate_probability": 0.997},
//     "metrics": {
//       "pau": {"max_length": 30, "length_step": 0.5, "stride": 0.5, "cutoff": 0.05, "wrap": false},
//       "vpt": {"xy_step": 1, "xy_extent": 10, "heading_step": 0.1, "heading_extent": 0.1,
//               "theta_slice": 0.1, "rule": "all" | "any", "window": 6, "frame_stride": 2,
//               "position_tol": 0.5, "heading_tol": 0.05, "contour_arcs": [60, 175, 300]},
//       "margin": {"strategy": "PoleCorner", "step": 1}
//     },
//     "output_dir": "out"
//   }
// Relative paths resolve against the manifest's directory. Without
// "output_dir" the LOCROBUST_OUT environment variable is used, then
// ./locrobust_out.
//
// World json: {"seed", "route": {"start": [e, n, h], "closed", "segments":
// [{"line": len} | {"arc": [radius, angle]}]}, "zones": [{"name", "begin",
// "end", "pole_density", "corner_density"}], "gps_dropout_zones": [[b, e]],
// "lateral_min", "lateral_max", "route_sample_step"}.
// Sensor json: {"lidar": {...}, "gps": {...}, "odometry": {...}} with the
// field names of the sensor spec structs.

#include "locrobust/filter.hpp"
#include "locrobust/matcher.hpp"
#include "locrobust/metrics.hpp"
#include "locrobust/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace locrobust::pipeline {

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PauSettings {
  double max_length = 30.0;
  double length_step = 0.5;
  double stride = 0.5;
  double cutoff = 0.05;
  bool wrap = false;

  std::vector<double> lengths() const { return metrics::length_grid(length_step, max_length, length_step); }
};

struct VptSettings {
  metrics::VptProfileConfig profile;
  double frame_stride = 2.0;  // m of true arc length between evaluated frames
  std::vector<double> contour_arcs{60.0, 175.0, 300.0};
};

struct MarginSettings {
  filter::StrategyMode strategy = filter::StrategyMode::PoleCorner;
  double step = 1.0;
};

struct RunManifest {
  std::filesystem::path source;
  std::uint64_t seed = 0;
  std::string world_ref = "preset:quad";
  std::string sensors_ref = "preset:default";
  sim::WorldSpec world;
  sim::SensorSpec sensors;
  double speed = sim::presets::kDefaultSpeed;
  std::vector<filter::StrategyMode> strategies{filter::StrategyMode::DeadReckoning, filter::StrategyMode::Gps,
                                               filter::StrategyMode::Pole, filter::StrategyMode::PoleCorner};
  matcher::IcpConfig icp;
  /// Applied on top of each strategy preset.
  filter::StrategyConfig filter_overrides;
  PauSettings pau;
  VptSettings vpt;
  MarginSettings margin;
  std::filesystem::path output_dir;

  filter::StrategyConfig strategy_config(filter::StrategyMode mode) const;
};

/// Parses and validates a manifest. Throws ManifestError with a diagnostic.
RunManifest load_manifest(const std::filesystem::path& path);
RunManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir);

sim::WorldSpec load_world_spec(const std::string& ref, const std::filesystem::path& base_dir);
sim::SensorSpec load_sensor_spec(const std::string& ref, const std::filesystem::path& base_dir);

struct Options {
  unsigned threads = 1;
};

/// Output file names inside the manifest's output directory.
namespace files {
inline constexpr const char* kMap = "map.csv";
inline constexpr const char* kDataset = "dataset.jsonl";
std::string state_log(filter::StrategyMode mode);
std::string event_log(filter::StrategyMode mode);
std::string pau(filter::StrategyMode mode);
inline constexpr const char* kLattice = "vpt_lattice.csv";
inline constexpr const char* kProfile = "vpt_profile.csv";
inline constexpr const char* kWindows = "vpt_windows.csv";
inline constexpr const char* kMargin = "margin.csv";
inline constexpr const char* kPauSvg = "pau.svg";
inline constexpr const char* kBoundsSvg = "bounds.svg";
inline constexpr const char* kContourSvg = "vpt_contours.svg";
inline constexpr const char* kMarginSvg = "margin.svg";
inline constexpr const char* kReport = "report.txt";
}  // namespace files

struct SimulateResult {
  sim::World world;
  sim::Dataset dataset;
};

SimulateResult cmd_simulate(const RunManifest& manifest, const Options& options, std::ostream& log);

struct StrategyOutcome {
  filter::StrategyMode mode = filter::StrategyMode::DeadReckoning;
  std::optional<filter::StrategyRun> run;
  std::string error;  // set when the strategy could not run
  std::optional<double> final_position_error;
  double mean_position_bound = 0.0;
};

/// Reads the map and dataset written by cmd_simulate.
std::vector<StrategyOutcome> cmd_localise(const RunManifest& manifest, const Options& options, std::ostream& log);

struct StrategyMetrics {
  metrics::PauCurve pau;
  std::optional<double> cutoff;
  double area = 0.0;
  double mean_position_bound = 0.0;
};

struct MetricsResult {
  std::map<filter::StrategyMode, StrategyMetrics> strategies;
  std::optional<metrics::VptProfile> profile;
  std::vector<metrics::VptBoundary> contours;
  std::optional<metrics::MarginReport> margin;
  std::vector<std::string> warnings;
  /// False when a requested artifact could not be produced.
  bool complete = true;
};

/// Reads the logs written by cmd_localise plus the map and dataset.
MetricsResult cmd_metrics(const RunManifest& manifest, const Options& options, std::ostream& log);

/// simulate, localise and metrics in sequence, then report.txt. Returns the
/// process exit code.
int cmd_report(const RunManifest& manifest, const Options& options, std::ostream& log);

/// Oracle-vs-main comparisons; prints a pass/fail table and returns the
/// number of failed checks.
int cmd_verify(std::uint64_t seed, const Options& options, std::ostream& log);

}  // namespace locrobust::pipeline
