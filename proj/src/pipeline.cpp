#include "locrobust/pipeline.hpp"

#include "locrobust/io.hpp"
#include "locrobust/parallel.hpp"
#include "locrobust/svg.hpp"

#ifdef LOCROBUST_HAVE_ORACLE
#include "locrobust/oracle.hpp"
#endif

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace locrobust::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;
using filter::StrategyMode;

namespace {

// ---------------------------------------------------------------------------
// JSON helpers
// ---------------------------------------------------------------------------

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ManifestError(where + ": expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!keys.contains(key)) throw ManifestError(fmt::format("{}: unknown key '{}'", where, key));
  }
}

template <class T>
void read_opt(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ManifestError(fmt::format("{}.{}: {}", where, key, e.what()));
  }
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ManifestError(fmt::format("{}: {}", what, e.what()));
  }
}

std::string read_text(const fs::path& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError(fmt::format("{} '{}' does not exist or cannot be read", what, path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

sim::WorldSpec world_from_json(const json& j) {
  const std::string where = "world";
  reject_unknown(j, {"seed", "route", "zones", "gps_dropout_zones", "lateral_min", "lateral_max", "route_sample_step"},
                 where);
  sim::WorldSpec spec;
  read_opt(j, "seed", spec.seed, where);
  read_opt(j, "lateral_min", spec.lateral_min, where);
  read_opt(j, "lateral_max", spec.lateral_max, where);
  read_opt(j, "route_sample_step", spec.route_sample_step, where);
  if (!j.contains("route")) throw ManifestError("world: missing 'route'");
  const auto& r = j.at("route");
  reject_unknown(r, {"start", "closed", "segments"}, "world.route");
  try {
    if (r.contains("start")) {
      const auto s = r.at("start").get<std::vector<double>>();
      if (s.size() != 3) throw ManifestError("world.route.start: expected [easting, northing, heading]");
      spec.route.start = Pose2D(s[0], s[1], s[2]);
    }
    read_opt(r, "closed", spec.route.closed, "world.route");
    for (const auto& seg : r.at("segments")) {
      if (seg.contains("line")) {
        spec.route.segments.push_back(sim::RouteSegment::line(seg.at("line").get<double>()));
      } else if (seg.contains("arc")) {
        const auto a = seg.at("arc").get<std::vector<double>>();
        if (a.size() != 2) throw ManifestError("world.route.segments: arc expects [radius, angle]");
        spec.route.segments.push_back(sim::RouteSegment::arc(a[0], a[1]));
      } else {
        throw ManifestError("world.route.segments: each segment needs 'line' or 'arc'");
      }
    }
    if (j.contains("zones")) {
      for (const auto& z : j.at("zones")) {
        reject_unknown(z, {"name", "begin", "end", "pole_density", "corner_density"}, "world.zones");
        sim::FeatureZone zone;
        read_opt(z, "name", zone.name, "world.zones");
        zone.interval = {z.at("begin").get<double>(), z.at("end").get<double>()};
        read_opt(z, "pole_density", zone.pole_density, "world.zones");
        read_opt(z, "corner_density", zone.corner_density, "world.zones");
        spec.zones.push_back(zone);
      }
    }
    if (j.contains("gps_dropout_zones")) {
      for (const auto& d : j.at("gps_dropout_zones")) {
        const auto v = d.get<std::vector<double>>();
        if (v.size() != 2) throw ManifestError("world.gps_dropout_zones: expected [begin, end]");
        spec.gps_dropout_zones.push_back({v[0], v[1]});
      }
    }
  } catch (const json::exception& e) {
    throw ManifestError(fmt::format("world: {}", e.what()));
  }
  return spec;
}

sim::SensorSpec sensors_from_json(const json& j) {
  reject_unknown(j, {"lidar", "gps", "odometry"}, "sensors");
  sim::SensorSpec s;
  if (j.contains("lidar")) {
    const auto& l = j.at("lidar");
    const std::string w = "sensors.lidar";
    reject_unknown(l, {"max_range", "min_range", "fov", "detection_probability", "noise_sigma", "clutter_rate",
                       "frame_period"},
                   w);
    read_opt(l, "max_range", s.lidar.max_range, w);
    read_opt(l, "min_range", s.lidar.min_range, w);
    read_opt(l, "fov", s.lidar.fov, w);
    read_opt(l, "detection_probability", s.lidar.detection_probability, w);
    read_opt(l, "noise_sigma", s.lidar.noise_sigma, w);
    read_opt(l, "clutter_rate", s.lidar.clutter_rate, w);
    read_opt(l, "frame_period", s.lidar.frame_period, w);
  }
  if (j.contains("gps")) {
    const auto& g = j.at("gps");
    const std::string w = "sensors.gps";
    reject_unknown(g, {"sigma", "period", "speed_threshold"}, w);
    read_opt(g, "sigma", s.gps.sigma, w);
    read_opt(g, "period", s.gps.period, w);
    read_opt(g, "speed_threshold", s.gps.speed_threshold, w);
  }
  if (j.contains("odometry")) {
    const auto& o = j.at("odometry");
    const std::string w = "sensors.odometry";
    reject_unknown(o, {"velocity_sigma", "yaw_rate_sigma", "yaw_rate_bias", "period"}, w);
    read_opt(o, "velocity_sigma", s.odometry.velocity_sigma, w);
    read_opt(o, "yaw_rate_sigma", s.odometry.yaw_rate_sigma, w);
    read_opt(o, "yaw_rate_bias", s.odometry.yaw_rate_bias, w);
    read_opt(o, "period", s.odometry.period, w);
  }
  return s;
}

void validated(const auto& spec, const char* what) {
  try {
    sim::validate(spec);
  } catch (const std::invalid_argument& e) {
    throw ManifestError(fmt::format("{}: {}", what, e.what()));
  }
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

template <class Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ostringstream buf;
  fn(buf);
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << buf.str();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

template <class Fn>
auto read_file(const fs::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing input " + path.string() + " (run the earlier pipeline stage first)");
  return fn(in);
}

io::Provenance provenance(const RunManifest& m) { return {m.seed, std::string(kVersion)}; }

std::string svg_comment(const RunManifest& m) { return io::provenance_line(provenance(m)).substr(2); }

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double mean_position_bound(std::span<const filter::StateLogEntry> states) {
  std::vector<double> b;
  for (const auto& c : filter::confidence_bound(states)) b.push_back(c.position());
  return mean(b);
}

struct Inputs {
  FeatureMap map;
  sim::Dataset dataset;
};

Inputs read_inputs(const RunManifest& m) {
  Inputs in;
  in.map = read_file(m.output_dir / files::kMap, [](std::istream& s) { return io::read_map_csv(s); });
  in.dataset = read_file(m.output_dir / files::kDataset, [](std::istream& s) { return io::read_dataset(s); });
  return in;
}

bool has_truth(const sim::Dataset& d) {
  if (d.ground_truth.size() < 2) return false;
  return std::any_of(d.feature_frames.begin(), d.feature_frames.end(),
                     [](const FeatureFrame& f) { return f.true_pose.has_value(); });
}

/// Frames carrying a true pose, thinned to one per `stride` meters of true arc.
std::vector<metrics::LocatedFrame> select_frames(const sim::Dataset& d, double stride) {
  std::vector<metrics::LocatedFrame> out;
  double next = 0.0;
  for (const auto& f : d.feature_frames) {
    if (!f.true_pose) continue;
    const double arc = d.ground_truth.arc_at_time(f.timestamp);
    if (arc + 1e-9 < next) continue;
    out.push_back({arc, f});
    next = arc + stride;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

filter::StrategyConfig RunManifest::strategy_config(StrategyMode mode) const {
  filter::StrategyConfig cfg = filter_overrides;
  const auto preset = filter::StrategyConfig::preset(mode);
  cfg.mode = preset.mode;
  cfg.gps_used_after_init = preset.gps_used_after_init;
  return cfg;
}

sim::WorldSpec load_world_spec(const std::string& ref, const fs::path& base_dir) {
  sim::WorldSpec spec;
  if (ref == "preset:quad") {
    spec = sim::presets::quad_world();
  } else if (ref == "preset:rich") {
    spec = sim::presets::rich_world();
  } else if (ref.starts_with("preset:")) {
    throw ManifestError("unknown world preset '" + ref + "' (expected preset:quad or preset:rich)");
  } else {
    const fs::path p = base_dir / ref;
    spec = world_from_json(parse_json(read_text(p, "world spec"), p.string()));
  }
  validated(spec, "world spec");
  return spec;
}

sim::SensorSpec load_sensor_spec(const std::string& ref, const fs::path& base_dir) {
  sim::SensorSpec spec;
  if (ref == "preset:default") {
    spec = sim::presets::default_sensors();
  } else if (ref.starts_with("preset:")) {
    throw ManifestError("unknown sensor preset '" + ref + "' (expected preset:default)");
  } else {
    const fs::path p = base_dir / ref;
    spec = sensors_from_json(parse_json(read_text(p, "sensor spec"), p.string()));
  }
  validated(spec, "sensor spec");
  return spec;
}

RunManifest parse_manifest(const std::string& text, const fs::path& base_dir) {
  const json j = parse_json(text, "manifest");
  reject_unknown(j, {"seed", "world", "sensors", "speed", "strategies", "icp", "filter", "metrics", "output_dir"},
                 "manifest");
  RunManifest m;
  if (!j.contains("seed")) throw ManifestError("manifest: missing 'seed'");
  read_opt(j, "seed", m.seed, "manifest");
  read_opt(j, "world", m.world_ref, "manifest");
  read_opt(j, "sensors", m.sensors_ref, "manifest");
  read_opt(j, "speed", m.speed, "manifest");
  if (!(m.speed > 0.0 && std::isfinite(m.speed))) throw ManifestError("manifest: speed must be positive");
  m.world = load_world_spec(m.world_ref, base_dir);
  m.sensors = load_sensor_spec(m.sensors_ref, base_dir);

  if (j.contains("strategies")) {
    m.strategies.clear();
    std::vector<std::string> names;
    read_opt(j, "strategies", names, "manifest");
    for (const auto& n : names) {
      try {
        const auto mode = filter::parse_strategy_mode(n);
        if (std::find(m.strategies.begin(), m.strategies.end(), mode) != m.strategies.end()) {
          throw ManifestError("manifest.strategies: '" + n + "' listed twice");
        }
        m.strategies.push_back(mode);
      } catch (const std::invalid_argument& e) {
        throw ManifestError(std::string("manifest.strategies: ") + e.what());
      }
    }
    if (m.strategies.empty()) throw ManifestError("manifest.strategies: empty list");
  }

  if (j.contains("icp")) {
    const auto& c = j.at("icp");
    const std::string w = "manifest.icp";
    reject_unknown(c, {"correspondence_gate", "max_iterations", "convergence_tol_m", "convergence_tol_rad",
                       "min_inliers", "max_rms"},
                   w);
    read_opt(c, "correspondence_gate", m.icp.correspondence_gate, w);
    read_opt(c, "max_iterations", m.icp.max_iterations, w);
    read_opt(c, "convergence_tol_m", m.icp.convergence_tol_m, w);
    read_opt(c, "convergence_tol_rad", m.icp.convergence_tol_rad, w);
    read_opt(c, "min_inliers", m.icp.min_inliers, w);
    read_opt(c, "max_rms", m.icp.max_rms, w);
  }
  try {
    m.icp.validate();
  } catch (const std::invalid_argument& e) {
    throw ManifestError(std::string("manifest.icp: ") + e.what());
  }

  // GPS readings carry the simulated sigma; the filter uses the same value
  // unless told otherwise.
  m.filter_overrides.gps_sigma = m.sensors.gps.sigma;
  m.filter_overrides.gps_speed_threshold = m.sensors.gps.speed_threshold;
  if (j.contains("filter")) {
    const auto& f = j.at("filter");
    const std::string w = "manifest.filter";
    reject_unknown(f, {"gps_sigma", "icp_position_sigma", "icp_heading_sigma", "distance_sigma", "heading_sigma",
                       "gate_probability"},
                   w);
    auto& o = m.filter_overrides;
    read_opt(f, "gps_sigma", o.gps_sigma, w);
    read_opt(f, "icp_position_sigma", o.icp_position_sigma, w);
    read_opt(f, "icp_heading_sigma", o.icp_heading_sigma, w);
    read_opt(f, "distance_sigma", o.process.distance_sigma, w);
    read_opt(f, "heading_sigma", o.process.heading_sigma, w);
    if (f.contains("gate_probability")) {
      double p = 0.0;
      read_opt(f, "gate_probability", p, w);
      try {
        o.gate_threshold = filter::chi_square_quantile(3, p);
        o.gps_gate_threshold = filter::chi_square_quantile(2, p);
      } catch (const std::invalid_argument& e) {
        throw ManifestError(std::string("manifest.filter.gate_probability: ") + e.what());
      }
    }
    if (!(o.gps_sigma > 0.0) || !(o.icp_position_sigma > 0.0) || !(o.icp_heading_sigma > 0.0) ||
        !(o.process.distance_sigma >= 0.0) || !(o.process.heading_sigma >= 0.0)) {
      throw ManifestError("manifest.filter: sigmas must be positive");
    }
  }

  if (j.contains("metrics")) {
    const auto& mt = j.at("metrics");
    reject_unknown(mt, {"pau", "vpt", "margin"}, "manifest.metrics");
    if (mt.contains("pau")) {
      const auto& p = mt.at("pau");
      const std::string w = "manifest.metrics.pau";
      reject_unknown(p, {"max_length", "length_step", "stride", "cutoff", "wrap"}, w);
      read_opt(p, "max_length", m.pau.max_length, w);
      read_opt(p, "length_step", m.pau.length_step, w);
      read_opt(p, "stride", m.pau.stride, w);
      read_opt(p, "cutoff", m.pau.cutoff, w);
      read_opt(p, "wrap", m.pau.wrap, w);
    }
    if (mt.contains("vpt")) {
      const auto& v = mt.at("vpt");
      const std::string w = "manifest.metrics.vpt";
      reject_unknown(v, {"xy_step", "xy_extent", "heading_step", "heading_extent", "theta_slice", "rule", "window",
                         "frame_stride", "position_tol", "heading_tol", "contour_arcs"},
                     w);
      auto& pc = m.vpt.profile;
      read_opt(v, "xy_step", pc.grid.xy_step, w);
      read_opt(v, "xy_extent", pc.grid.xy_extent, w);
      read_opt(v, "heading_step", pc.grid.heading_step, w);
      read_opt(v, "heading_extent", pc.grid.heading_extent, w);
      read_opt(v, "theta_slice", pc.theta_slice, w);
      read_opt(v, "window", pc.window, w);
      read_opt(v, "frame_stride", m.vpt.frame_stride, w);
      read_opt(v, "position_tol", pc.tolerance.position, w);
      read_opt(v, "heading_tol", pc.tolerance.heading, w);
      read_opt(v, "contour_arcs", m.vpt.contour_arcs, w);
      if (v.contains("rule")) {
        std::string rule;
        read_opt(v, "rule", rule, w);
        if (rule == "all") {
          pc.rule = metrics::SliceRule::AllHeadings;
        } else if (rule == "any") {
          pc.rule = metrics::SliceRule::AnyHeading;
        } else {
          throw ManifestError(w + ".rule: expected 'all' or 'any'");
        }
      }
    }
    if (mt.contains("margin")) {
      const auto& g = mt.at("margin");
      const std::string w = "manifest.metrics.margin";
      reject_unknown(g, {"strategy", "step"}, w);
      if (g.contains("strategy")) {
        std::string s;
        read_opt(g, "strategy", s, w);
        try {
          m.margin.strategy = filter::parse_strategy_mode(s);
        } catch (const std::invalid_argument& e) {
          throw ManifestError(w + ".strategy: " + e.what());
        }
      }
      read_opt(g, "step", m.margin.step, w);
    }
  }
  if (!(m.pau.length_step > 0.0) || !(m.pau.max_length >= m.pau.length_step) || !(m.pau.stride > 0.0) ||
      !(m.pau.cutoff > 0.0 && m.pau.cutoff < 1.0)) {
    throw ManifestError("manifest.metrics.pau: invalid lengths, stride or cutoff");
  }
  try {
    m.vpt.profile.grid.validate();
  } catch (const std::invalid_argument& e) {
    throw ManifestError(std::string("manifest.metrics.vpt: ") + e.what());
  }
  if (!(m.vpt.frame_stride > 0.0) || !(m.vpt.profile.window > 0.0) || !(m.margin.step > 0.0)) {
    throw ManifestError("manifest.metrics: frame_stride, window and margin step must be positive");
  }
  const double slice_steps = m.vpt.profile.theta_slice / m.vpt.profile.grid.heading_step;
  if (!(m.vpt.profile.theta_slice >= 0.0) || std::abs(slice_steps - std::round(slice_steps)) > 1e-9 ||
      std::round(slice_steps) > m.vpt.profile.grid.heading_half()) {
    throw ManifestError("manifest.metrics.vpt.theta_slice must be a lattice heading offset");
  }

  if (j.contains("output_dir")) {
    std::string out;
    read_opt(j, "output_dir", out, "manifest");
    m.output_dir = base_dir / out;
  } else if (const char* env = std::getenv("LOCROBUST_OUT"); env != nullptr && *env != '\0') {
    m.output_dir = env;
  } else {
    m.output_dir = "locrobust_out";
  }
  return m;
}

RunManifest load_manifest(const fs::path& path) {
  RunManifest m = parse_manifest(read_text(path, "manifest"), path.parent_path());
  m.source = path;
  return m;
}

namespace files {
std::string state_log(StrategyMode mode) { return fmt::format("state_{}.csv", to_string(mode)); }
std::string event_log(StrategyMode mode) { return fmt::format("events_{}.csv", to_string(mode)); }
std::string pau(StrategyMode mode) { return fmt::format("pau_{}.csv", to_string(mode)); }
}  // namespace files

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

SimulateResult cmd_simulate(const RunManifest& m, const Options&, std::ostream& log) {
  SimulateResult r;
  r.world = sim::generate_world(m.world);
  r.dataset = sim::simulate_run(r.world, m.world, m.sensors, m.speed, m.seed);
  const auto prov = provenance(m);
  write_file(m.output_dir / files::kMap, [&](std::ostream& o) { io::write_map_csv(o, r.world.map, prov); });
  write_file(m.output_dir / files::kDataset, [&](std::ostream& o) { io::write_dataset(o, r.dataset, prov); });

  log << fmt::format("world: {}  seed {}\n", m.world_ref, m.seed);
  log << fmt::format("  route length     {:.3f} m ({} samples)\n", m.world.route.length(), r.world.route.size());
  log << fmt::format("  features         pole {}  corner {}\n", r.world.map.count(FeatureClass::Pole),
                     r.world.map.count(FeatureClass::Corner));
  for (const auto& z : m.world.zones) {
    log << fmt::format("  zone {:<16} [{:.1f}, {:.1f}] m  pole {:g}/100 m  corner {:g}/100 m\n", z.name,
                       z.interval.begin, z.interval.end, z.pole_density, z.corner_density);
  }
  log << fmt::format("  records          odom {}  gps {}  frames {}\n", r.dataset.odometry.size(),
                     r.dataset.gps_readings.size(), r.dataset.feature_frames.size());
  log << fmt::format("  wrote            {}, {}\n", (m.output_dir / files::kMap).string(),
                     (m.output_dir / files::kDataset).string());
  return r;
}

std::vector<StrategyOutcome> cmd_localise(const RunManifest& m, const Options& options, std::ostream& log) {
  const Inputs in = read_inputs(m);
  std::vector<StrategyOutcome> out(m.strategies.size());
  parallel_for(out.size(), options.threads, [&](std::size_t i) {
    auto& o = out[i];
    o.mode = m.strategies[i];
    try {
      o.run = filter::run_strategy(in.dataset, in.map, m.strategy_config(o.mode), m.icp);
    } catch (const filter::InitialisationError& e) {
      o.error = e.what();
      return;
    }
    o.mean_position_bound = mean_position_bound(o.run->states);
    if (!in.dataset.ground_truth.empty() && !o.run->states.empty()) {
      const auto& last = o.run->states.back();
      o.final_position_error =
          pose_error(last.state.pose, in.dataset.ground_truth.pose_at_time(last.timestamp)).position;
    }
  });

  const auto prov = provenance(m);
  for (const auto& o : out) {
    if (!o.run) continue;
    write_file(m.output_dir / files::state_log(o.mode), [&](std::ostream& s) { io::write_state_log(s, o.run->states, prov); });
    write_file(m.output_dir / files::event_log(o.mode), [&](std::ostream& s) { io::write_events(s, o.run->events, prov); });
  }

  log << fmt::format("{:<14} {:>8} {:>8} {:>10} {:>14} {:>14}\n", "strategy", "states", "updates", "accepted",
                     "final err [m]", "mean 95% [m]");
  for (const auto& o : out) {
    if (!o.run) {
      log << fmt::format("{:<14} initialisation failed: {}\n", to_string(o.mode), o.error);
      continue;
    }
    const auto accepted = filter::accepted_events(o.run->events).size();
    log << fmt::format("{:<14} {:>8} {:>8} {:>10} {:>14} {:>14.3f}\n", to_string(o.mode), o.run->states.size(),
                       o.run->events.size(), accepted,
                       o.final_position_error ? fmt::format("{:.3f}", *o.final_position_error) : std::string("n/a"),
                       o.mean_position_bound);
  }
  return out;
}

MetricsResult cmd_metrics(const RunManifest& m, const Options& options, std::ostream& log) {
  const Inputs in = read_inputs(m);
  const auto prov = provenance(m);
  MetricsResult r;
  const auto lengths = m.pau.lengths();

  std::map<StrategyMode, std::vector<filter::StateLogEntry>> states;
  svg::LinePlot pau_plot{"Probability of absence of updates", "window length l [m]", "P(AU_l)", {}, {}, {}, 0.0, 1.0};
  svg::LinePlot bound_plot{"95% position bound", "distance travelled [m]", "bound [m]", {}, {}, {}, 0.0, 0.0};
  for (const auto mode : m.strategies) {
    const fs::path sp = m.output_dir / files::state_log(mode);
    const fs::path ep = m.output_dir / files::event_log(mode);
    if (!fs::exists(sp) || !fs::exists(ep)) {
      r.warnings.push_back(fmt::format("no logs for {}; skipped", to_string(mode)));
      r.complete = false;
      continue;
    }
    auto st = read_file(sp, [](std::istream& s) { return io::read_state_log(s); });
    const auto ev = read_file(ep, [](std::istream& s) { return io::read_events(s); });
    if (st.empty()) {
      r.warnings.push_back(fmt::format("empty state log for {}; skipped", to_string(mode)));
      r.complete = false;
      continue;
    }
    StrategyMetrics sm;
    const double length = st.back().arc_length;
    sm.pau = metrics::pau_curve(std::span<const filter::UpdateEvent>(ev), length, lengths, m.pau.stride,
                                {m.pau.wrap});
    sm.cutoff = metrics::pau_cutoff(sm.pau, m.pau.cutoff);
    sm.area = metrics::pau_area(sm.pau);
    sm.mean_position_bound = mean_position_bound(st);
    write_file(m.output_dir / files::pau(mode), [&](std::ostream& s) { io::write_pau_csv(s, sm.pau, prov); });
    pau_plot.series.push_back({std::string(to_string(mode)), sm.pau.lengths, sm.pau.probabilities, false});
    const auto series = metrics::position_bound_series(st);
    bound_plot.series.push_back({std::string(to_string(mode)), series.arc, series.value, false});
    r.strategies.emplace(mode, std::move(sm));
    states.emplace(mode, std::move(st));
  }
  write_file(m.output_dir / files::kPauSvg, [&](std::ostream& s) { s << svg::render(pau_plot, svg_comment(m)); });
  write_file(m.output_dir / files::kBoundsSvg, [&](std::ostream& s) { s << svg::render(bound_plot, svg_comment(m)); });

  if (!has_truth(in.dataset)) {
    r.warnings.push_back("dataset has no ground truth; VPT and robustness margin skipped (VPT needs the true pose)");
    r.complete = false;
  } else {
    const auto& cfg = m.vpt.profile;
    const auto frames = select_frames(in.dataset, m.vpt.frame_stride);
    r.profile = metrics::vpt_profile(frames, in.map, cfg, m.icp, options.threads);
    for (const auto& w : r.profile->warnings) r.warnings.push_back(w);
    write_file(m.output_dir / files::kProfile, [&](std::ostream& s) { io::write_profile_csv(s, *r.profile, prov); });
    write_file(m.output_dir / files::kWindows, [&](std::ostream& s) { io::write_windows_csv(s, *r.profile, prov); });

    for (const double target : m.vpt.contour_arcs) {
      if (frames.empty()) break;
      const auto best = std::min_element(frames.begin(), frames.end(), [&](const auto& a, const auto& b) {
        return std::abs(a.arc_length - target) < std::abs(b.arc_length - target);
      });
      r.contours.push_back(metrics::vpt_evaluate(best->frame, in.map, *best->frame.true_pose, cfg.grid, m.icp,
                                                 cfg.tolerance, options.threads, best->arc_length));
    }
    write_file(m.output_dir / files::kLattice, [&](std::ostream& s) { io::write_lattice_csv(s, r.contours, prov); });
    write_file(m.output_dir / files::kContourSvg, [&](std::ostream& s) {
      s << svg::render_lattices(r.contours, cfg.theta_slice, cfg.rule,
                                fmt::format("Valid prior threshold at |dtheta| <= {:g} rad", cfg.theta_slice),
                                svg_comment(m));
    });

    const auto st = states.find(m.margin.strategy);
    if (st == states.end()) {
      r.warnings.push_back(fmt::format("margin strategy {} has no state log; margin skipped", to_string(m.margin.strategy)));
      r.complete = false;
    } else if (r.profile->radii.empty()) {
      r.warnings.push_back("no frames with a true pose; margin skipped");
      r.complete = false;
    } else {
      const auto bounds = metrics::position_bound_series(st->second);
      r.margin = metrics::robustness_margin({r.profile->arc_lengths, r.profile->radii}, bounds, m.margin.step);
      write_file(m.output_dir / files::kMargin, [&](std::ostream& s) { io::write_margin_csv(s, *r.margin, prov); });
      svg::LinePlot plot{"VPT radius against position bound", "distance travelled [m]", "[m]", {}, {}, {}, 0.0, 0.0};
      plot.series.push_back({"VPT radius", r.profile->arc_lengths, r.profile->radii, false});
      plot.series.push_back({fmt::format("95% bound ({})", to_string(m.margin.strategy)), bounds.arc, bounds.value, false});
      plot.bands = r.margin->flagged_intervals;
      plot.band_label = "margin <= 0";
      write_file(m.output_dir / files::kMarginSvg, [&](std::ostream& s) { s << svg::render(plot, svg_comment(m)); });
    }
  }

  log << fmt::format("{:<14} {:>12} {:>14} {:>14}\n", "strategy", "PAU area", fmt::format("l@P<={:g}", m.pau.cutoff),
                     "mean 95% [m]");
  for (const auto& [mode, sm] : r.strategies) {
    log << fmt::format("{:<14} {:>12.3f} {:>14} {:>14.3f}\n", to_string(mode), sm.area,
                       sm.cutoff ? fmt::format("{:g} m", *sm.cutoff) : std::string("never"), sm.mean_position_bound);
  }
  if (r.profile) {
    const auto zero = std::count(r.profile->radii.begin(), r.profile->radii.end(), 0.0);
    log << fmt::format("VPT: {} frames, {} with radius 0, {} windows of {:g} m\n", r.profile->radii.size(), zero,
                       r.profile->windows.size(), m.vpt.profile.window);
  }
  if (r.margin) {
    for (const auto& iv : r.margin->flagged_intervals) {
      log << fmt::format("margin <= 0 over [{:.1f}, {:.1f}] m\n", iv.begin, iv.end);
    }
  }
  for (const auto& w : r.warnings) log << "warning: " << w << "\n";
  return r;
}

int cmd_report(const RunManifest& m, const Options& options, std::ostream& log) {
  std::ostringstream text;
  text << io::provenance_line(provenance(m)) << "\n";
  if (!m.source.empty()) text << "manifest: " << m.source.string() << "\n";
  text << "\n== simulate ==\n";
  cmd_simulate(m, options, text);
  text << "\n== localise ==\n";
  const auto outcomes = cmd_localise(m, options, text);
  text << "\n== metrics ==\n";
  const auto metrics = cmd_metrics(m, options, text);
  if (metrics.profile) {
    text << "\nVPT windows (non-zero radii)\n";
    text << fmt::format("{:>8} {:>8} {:>10} {:>10} {:>10} {:>7}\n", "begin", "end", "min", "max", "median", "frames");
    for (const auto& w : metrics.profile->windows) {
      text << fmt::format("{:>8.1f} {:>8.1f} {:>10.2f} {:>10.2f} {:>10.2f} {:>7}\n", w.interval.begin, w.interval.end,
                          w.span_min, w.span_max, w.median, w.frames);
    }
  }
  write_file(m.output_dir / files::kReport, [&](std::ostream& s) { s << text.str(); });
  log << text.str();
  const bool all_ran = std::all_of(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.run.has_value(); });
  return all_ran && metrics.complete ? 0 : 1;
}

// ---------------------------------------------------------------------------
// Oracle comparisons
// ---------------------------------------------------------------------------

#ifdef LOCROBUST_HAVE_ORACLE

namespace {

struct CheckRow {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  std::string detail;
};

CheckRow check_fig3_instance() {
  // Nine windows of 2 m over a 10 m track; three of them see no update.
  const std::vector<double> events{1.5, 4.5, 6.5};
  const std::vector<double> lengths{2.0};
  const auto main = metrics::pau_curve(events, 10.0, lengths, 1.0);
  const auto brute = oracle::brute_pau(events, 10.0, lengths, 1.0);
  CheckRow row{"pau: 9-window instance equals 1/3", 1, 0, {}};
  if (main.probabilities[0] != 1.0 / 3.0 || brute.probabilities[0] != main.probabilities[0]) row.failures = 1;
  row.detail = fmt::format("P = {}", main.probabilities[0]);
  return row;
}

CheckRow check_pau_random(std::uint64_t seed) {
  CheckRow row{"pau: main equals brute force (bit-exact)", 200, 0, {}};
  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < row.cases; ++c) {
    const double length = std::uniform_real_distribution<double>(5.0, 50.0)(rng);
    const int n = std::uniform_int_distribution<int>(0, 20)(rng);
    std::vector<double> events;
    for (int i = 0; i < n; ++i) events.push_back(std::uniform_real_distribution<double>(0.0, length)(rng));
    std::sort(events.begin(), events.end());
    const double stride = std::uniform_int_distribution<int>(1, 4)(rng) * 0.25;
    const auto lengths = metrics::length_grid(0.5, std::min(length, 20.0), 0.5);
    const auto a = metrics::pau_curve(events, length, lengths, stride);
    const auto b = oracle::brute_pau(events, length, lengths, stride);
    if (a.probabilities != b.probabilities) ++row.failures;
  }
  return row;
}

CheckRow check_rigid_align(std::uint64_t seed) {
  CheckRow row{"rigid_align: closed form within 1e-3 of grid search", 100, 0, {}};
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::uniform_real_distribution<double> coord(-4.0, 4.0);
  std::uniform_real_distribution<double> shift(-2.0, 2.0);
  std::uniform_real_distribution<double> turn(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.05);
  constexpr double kResolution = 1e-3;
  double worst = 0.0;
  for (std::size_t c = 0; c < row.cases; ++c) {
    const Pose2D planted(shift(rng), shift(rng), turn(rng));
    const int n = std::uniform_int_distribution<int>(3, 6)(rng);
    std::vector<matcher::Correspondence> pairs;
    for (int i = 0; i < n; ++i) {
      const Vec2 p(coord(rng), coord(rng));
      pairs.push_back({p, transform_point(planted, p) + Vec2(noise(rng), noise(rng))});
    }
    const Pose2D fast = matcher::rigid_align(pairs);
    const auto brute = oracle::brute_rigid_align(pairs, kResolution);
    const double err = std::max({std::abs(fast.easting() - brute.pose.easting()),
                                 std::abs(fast.northing() - brute.pose.northing()),
                                 std::abs(angle_diff(fast.heading(), brute.pose.heading()))});
    worst = std::max(worst, err);
    if (err > kResolution) ++row.failures;
  }
  row.detail = fmt::format("worst component difference {:.2e}", worst);
  return row;
}

}  // namespace

int cmd_verify(std::uint64_t seed, const Options&, std::ostream& log) {
  const std::vector<CheckRow> rows{check_fig3_instance(), check_pau_random(seed), check_rigid_align(seed)};
  int failed = 0;
  log << fmt::format("{:<52} {:>6} {:>9}  {}\n", "check", "cases", "result", "detail");
  for (const auto& r : rows) {
    log << fmt::format("{:<52} {:>6} {:>9}  {}\n", r.name, r.cases, r.failures == 0 ? "PASS" : "FAIL", r.detail);
    if (r.failures != 0) ++failed;
  }
  return failed;
}

#else

int cmd_verify(std::uint64_t, const Options&, std::ostream& log) {
  log << "verify: built without the oracle library (LOCROBUST_WITH_ORACLE=OFF)\n";
  return 1;
}

#endif

}  // namespace locrobust::pipeline
