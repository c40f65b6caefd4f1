#include "locrobust/sim.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace locrobust::sim {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

// Independent generator per sensor stream so that changing one sensor's
// parameters never shifts the draws of another.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

int draw_poisson(std::mt19937_64& rng, double mean) {
  if (mean <= 0.0) return 0;
  return std::poisson_distribution<int>(mean)(rng);
}

}  // namespace

double RouteSegment::arc_length() const {
  return kind == Kind::Line ? length : radius * std::abs(angle);
}

double RouteSpec::length() const {
  double total = 0.0;
  for (const auto& seg : segments) total += seg.arc_length();
  return total;
}

Pose2D RouteSpec::pose_at(double s) const {
  Pose2D origin = start;
  double remaining = std::max(0.0, s);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    const double len = seg.arc_length();
    const bool last = i + 1 == segments.size();
    const double u = (remaining <= len || last) ? std::min(remaining, len) : len;
    Pose2D local;
    if (seg.kind == RouteSegment::Kind::Line) {
      local = Pose2D(u, 0.0, 0.0);
    } else {
      const double turn = (seg.angle >= 0.0 ? 1.0 : -1.0) * u / seg.radius;
      const double side = seg.angle >= 0.0 ? 1.0 : -1.0;
      local = Pose2D(seg.radius * std::sin(std::abs(turn)), side * seg.radius * (1.0 - std::cos(turn)), turn);
    }
    if (remaining <= len || last) return compose(origin, local);
    origin = compose(origin, local);
    remaining -= len;
  }
  return origin;
}

void validate(const WorldSpec& spec) {
  require(!spec.route.segments.empty(), "world: route has no segments");
  for (const auto& seg : spec.route.segments) {
    if (seg.kind == RouteSegment::Kind::Line) {
      require(seg.length > 0.0 && std::isfinite(seg.length), "world: line segment length must be positive");
    } else {
      require(seg.radius > 0.0 && std::isfinite(seg.radius), "world: arc radius must be positive");
      require(seg.angle != 0.0 && std::isfinite(seg.angle), "world: arc angle must be non-zero");
    }
  }
  const double total = spec.route.length();
  require(total > 0.0, "world: empty route");
  if (spec.route.closed) {
    const Pose2D end = spec.route.pose_at(total);
    require((end.position() - spec.route.start.position()).norm() < 0.5,
            "world: route is marked closed but does not return to its start");
  }
  auto check_interval = [&](const ArcInterval& iv, const std::string& what) {
    require(iv.begin >= 0.0 && iv.end <= total + 1e-9 && iv.begin <= iv.end,
            "world: " + what + " interval must lie within [0, route length]");
  };
  for (const auto& z : spec.zones) {
    check_interval(z.interval, "zone '" + z.name + "'");
    require(z.pole_density >= 0.0 && z.corner_density >= 0.0, "world: zone '" + z.name + "' has negative density");
  }
  for (const auto& d : spec.gps_dropout_zones) check_interval(d, "gps dropout");
  require(spec.lateral_min >= 0.0 && spec.lateral_max >= spec.lateral_min, "world: invalid lateral offset range");
  require(spec.route_sample_step > 0.0, "world: route sample step must be positive");
}

World generate_world(const WorldSpec& spec) {
  validate(spec);
  std::mt19937_64 rng = make_stream(spec.seed, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<MapFeature> features;
  int next_id = 0;
  auto place = [&](const FeatureZone& zone, FeatureClass cls, double density) {
    const int count = draw_poisson(rng, density * zone.interval.length() / 100.0);
    for (int k = 0; k < count; ++k) {
      const double s = zone.interval.begin + unit(rng) * zone.interval.length();
      const double side = unit(rng) < 0.5 ? 1.0 : -1.0;
      const double offset = spec.lateral_min + unit(rng) * (spec.lateral_max - spec.lateral_min);
      features.push_back({next_id++, cls, transform_point(spec.route.pose_at(s), Vec2(0.0, side * offset))});
    }
  };
  for (const auto& zone : spec.zones) {
    place(zone, FeatureClass::Pole, zone.pole_density);
    place(zone, FeatureClass::Corner, zone.corner_density);
  }

  const double total = spec.route.length();
  const auto n = static_cast<std::size_t>(std::floor(total / spec.route_sample_step + 1e-9));
  std::vector<double> times;
  std::vector<Pose2D> poses;
  for (std::size_t k = 0; k <= n; ++k) {
    const double s = static_cast<double>(k) * spec.route_sample_step;
    times.push_back(s);
    poses.push_back(spec.route.pose_at(s));
  }
  if (total - static_cast<double>(n) * spec.route_sample_step > 1e-9) {
    times.push_back(total);
    poses.push_back(spec.route.pose_at(total));
  }
  return {FeatureMap(std::move(features)), Trajectory::from_poses(times, poses)};
}

void validate(const SensorSpec& spec) {
  const auto& l = spec.lidar;
  require(l.max_range > 0.0 && l.min_range >= 0.0 && l.min_range < l.max_range, "sensors: invalid lidar range");
  require(l.fov > 0.0, "sensors: lidar fov must be positive");
  require(l.detection_probability >= 0.0 && l.detection_probability <= 1.0,
          "sensors: detection probability must be in [0, 1]");
  require(l.noise_sigma >= 0.0 && l.clutter_rate >= 0.0, "sensors: lidar noise and clutter must be >= 0");
  require(l.frame_period > 0.0, "sensors: lidar frame period must be positive");
  require(spec.gps.sigma >= 0.0 && spec.gps.period > 0.0 && spec.gps.speed_threshold >= 0.0,
          "sensors: invalid gps parameters");
  const auto& o = spec.odometry;
  require(o.velocity_sigma >= 0.0 && o.yaw_rate_sigma >= 0.0 && std::isfinite(o.yaw_rate_bias),
          "sensors: invalid odometry noise");
  require(o.period > 0.0, "sensors: odometry period must be positive");
}

bool in_sensor_footprint(const LidarSpec& lidar, const Pose2D& pose, const Vec2& feature) {
  const Vec2 local = transform_point(inverse(pose), feature);
  const double range = local.norm();
  if (range > lidar.max_range || range < lidar.min_range) return false;
  if (lidar.fov >= kTwoPi) return true;
  return std::abs(std::atan2(local.y(), local.x())) <= 0.5 * lidar.fov;
}

Dataset simulate_run(const FeatureMap& map, const Trajectory& route, const SensorSpec& sensors, double speed,
                     std::uint64_t seed, const std::vector<ArcInterval>& gps_dropout_zones) {
  require(speed > 0.0 && std::isfinite(speed), "simulate_run: speed must be positive");
  require(route.size() >= 2, "simulate_run: route needs at least two samples");
  validate(sensors);

  const double dt = sensors.odometry.period;
  const double step = speed * dt;
  // A sampled route is a chord polyline, slightly shorter than the curve it
  // samples; the slack keeps the final step.
  const auto steps = static_cast<std::size_t>(std::floor(route.length() / step + 5e-2));
  const auto gps_every = std::max<long>(1, std::lround(sensors.gps.period / dt));
  const auto frame_every = std::max<long>(1, std::lround(sensors.lidar.frame_period / dt));

  std::mt19937_64 odom_rng = make_stream(seed, 1);
  std::mt19937_64 gps_rng = make_stream(seed, 2);
  std::mt19937_64 lidar_rng = make_stream(seed, 3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Dataset data;
  std::vector<double> times;
  std::vector<Pose2D> poses;
  times.reserve(steps + 1);
  poses.reserve(steps + 1);

  Pose2D truth = route.pose_at_arc(0.0);
  double truth_arc = 0.0;
  const auto& lidar = sensors.lidar;

  auto emit_sensors = [&](std::size_t k, double t) {
    if (static_cast<long>(k) % gps_every == 0) {
      bool dropped = false;
      for (const auto& zone : gps_dropout_zones) dropped = dropped || zone.contains(truth_arc);
      if (!dropped) {
        const double ne = gauss(gps_rng);
        const double nn = gauss(gps_rng);
        data.gps_readings.push_back({t, truth.easting() + sensors.gps.sigma * ne,
                                     truth.northing() + sensors.gps.sigma * nn, sensors.gps.sigma});
      }
    }
    if (static_cast<long>(k) % frame_every == 0) {
      FeatureFrame frame;
      frame.timestamp = t;
      frame.true_pose = truth;
      const Pose2D to_sensor = inverse(truth);
      for (const auto& f : map.features()) {
        if (!in_sensor_footprint(lidar, truth, f.position)) continue;
        if (!(unit(lidar_rng) < lidar.detection_probability)) continue;
        const Vec2 local = transform_point(to_sensor, f.position);
        const double nx = gauss(lidar_rng);
        const double ny = gauss(lidar_rng);
        const Vec2 measured = local + lidar.noise_sigma * Vec2(nx, ny);
        if (measured.norm() > lidar.max_range) continue;
        frame.observations.push_back({f.cls, measured, f.id});
      }
      const int clutter = draw_poisson(lidar_rng, lidar.clutter_rate);
      const double half_fov = std::min(lidar.fov, kTwoPi) * 0.5;
      const double r2_min = lidar.min_range * lidar.min_range;
      const double r2_max = lidar.max_range * lidar.max_range;
      for (int c = 0; c < clutter; ++c) {
        const double r = std::sqrt(r2_min + unit(lidar_rng) * (r2_max - r2_min));
        const double bearing = -half_fov + unit(lidar_rng) * 2.0 * half_fov;
        const FeatureClass cls = unit(lidar_rng) < 0.5 ? FeatureClass::Pole : FeatureClass::Corner;
        frame.observations.push_back({cls, Vec2(r * std::cos(bearing), r * std::sin(bearing)), std::nullopt});
      }
      data.feature_frames.push_back(std::move(frame));
    }
  };

  times.push_back(0.0);
  poses.push_back(truth);
  emit_sensors(0, 0.0);

  double route_heading = truth.heading();
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double s = static_cast<double>(k) * step;
    const double next_heading = route.pose_at_arc(s).heading();
    const double turn = angle_diff(next_heading, route_heading);
    route_heading = next_heading;

    const double mid = truth.heading() + 0.5 * turn;
    const Pose2D next(truth.easting() + step * std::cos(mid), truth.northing() + step * std::sin(mid),
                      truth.heading() + turn);
    truth_arc += (next.position() - truth.position()).norm();
    truth = next;
    times.push_back(t);
    poses.push_back(truth);

    const auto& o = sensors.odometry;
    const double nv = gauss(odom_rng);
    const double nw = gauss(odom_rng);
    data.odometry.push_back({t, step + o.velocity_sigma * nv * dt, turn + (o.yaw_rate_bias + o.yaw_rate_sigma * nw) * dt});

    emit_sensors(k, t);
  }
  data.ground_truth = Trajectory::from_poses(times, poses);
  return data;
}

Dataset simulate_run(const World& world, const WorldSpec& spec, const SensorSpec& sensors, double speed,
                     std::uint64_t seed) {
  return simulate_run(world.map, world.route, sensors, speed, seed, spec.gps_dropout_zones);
}

namespace presets {

namespace {

constexpr double kCornerRadius = 10.0;
constexpr double kShortStraight = 30.0;

// Rounded rectangle of total length 470 m whose north straight is centred
// on arc length 175 m.
RouteSpec quad_route() {
  const double long_straight = (kQuadLength - kTwoPi * kCornerRadius) / 2.0 - kShortStraight;
  const double start_offset = 1.5 * long_straight + kShortStraight + kPi * kCornerRadius - 175.0;
  RouteSpec route;
  route.start = Pose2D(0.0, 0.0, 0.0);
  route.closed = true;
  route.segments = {
      RouteSegment::line(long_straight - start_offset), RouteSegment::arc(kCornerRadius, kPi / 2),
      RouteSegment::line(kShortStraight),               RouteSegment::arc(kCornerRadius, kPi / 2),
      RouteSegment::line(long_straight),                RouteSegment::arc(kCornerRadius, kPi / 2),
      RouteSegment::line(kShortStraight),               RouteSegment::arc(kCornerRadius, kPi / 2),
      RouteSegment::line(start_offset),
  };
  return route;
}

}  // namespace

WorldSpec quad_world(std::uint64_t seed) {
  WorldSpec spec;
  spec.route = quad_route();
  spec.seed = seed;
  spec.zones = {
      {"buildings-south", {0.0, kQuadDesert.begin}, 25.0, 30.0},
      {"open-lawn", kQuadDesert, 0.0, 0.0},
      {"buildings-north", {kQuadDesert.end, kQuadLength}, 25.0, 30.0},
  };
  return spec;
}

WorldSpec rich_world(std::uint64_t seed) {
  WorldSpec spec;
  spec.route = quad_route();
  spec.seed = seed;
  spec.zones = {{"campus", {0.0, kQuadLength}, 20.0, 40.0}};
  return spec;
}

SensorSpec default_sensors() { return SensorSpec{}; }

}  // namespace presets

}  // namespace locrobust::sim
