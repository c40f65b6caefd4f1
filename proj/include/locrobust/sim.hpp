#pragma once

#include "locrobust/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace locrobust::sim {

/// One piece of a route: a straight line of `length` meters, or a circular
/// arc of `radius` turning by `angle` radians (positive turns left). Arc
/// length of an arc piece is radius * |angle|.
struct RouteSegment {
  enum class Kind { Line, Arc };
  Kind kind = Kind::Line;
  double length = 0.0;
  double radius = 0.0;
  double angle = 0.0;

  static RouteSegment line(double length) { return {Kind::Line, length, 0.0, 0.0}; }
  static RouteSegment arc(double radius, double angle) { return {Kind::Arc, 0.0, radius, angle}; }
  double arc_length() const;
};

struct RouteSpec {
  Pose2D start;
  std::vector<RouteSegment> segments;
  bool closed = false;

  double length() const;
  /// Exact pose at arc length s (clamped to [0, length()]).
  Pose2D pose_at(double s) const;
};

struct FeatureZone {
  std::string name;
  ArcInterval interval;
  double pole_density = 0.0;    // features per 100 m of route
  double corner_density = 0.0;  // features per 100 m of route
};

struct WorldSpec {
  RouteSpec route;
  std::vector<FeatureZone> zones;
  std::vector<ArcInterval> gps_dropout_zones;
  std::uint64_t seed = 0;
  double lateral_min = 2.0;     // m, feature offset from the route centreline
  double lateral_max = 15.0;
  double route_sample_step = 0.5;  // m, spacing of the emitted route samples
};

/// Throws std::invalid_argument describing the first violated constraint.
void validate(const WorldSpec& spec);

struct World {
  FeatureMap map;
  /// Route sampled every `route_sample_step`; timestamps are nominal (1 s per meter).
  Trajectory route;
};

World generate_world(const WorldSpec& spec);

struct LidarSpec {
  double max_range = 12.0;
  double min_range = 0.5;
  double fov = kTwoPi;  // centred on the vehicle heading; >= 2*pi means all-round
  double detection_probability = 0.95;
  double noise_sigma = 0.03;
  double clutter_rate = 0.3;  // Poisson mean of false detections per frame
  double frame_period = 0.2;
};

struct GpsSpec {
  double sigma = 2.0;
  double period = 1.0;
  double speed_threshold = 0.5;
};

struct OdometrySpec {
  double velocity_sigma = 0.02;  // m/s
  double yaw_rate_sigma = 0.002; // rad/s
  double yaw_rate_bias = 0.001;  // rad/s, constant for a run
  double period = 0.1;
};

struct SensorSpec {
  LidarSpec lidar;
  GpsSpec gps;
  OdometrySpec odometry;
};

void validate(const SensorSpec& spec);

struct Dataset {
  Trajectory ground_truth;
  std::vector<OdometryIncrement> odometry;
  std::vector<GpsReading> gps_readings;
  std::vector<FeatureFrame> feature_frames;
};

/// Constant-speed traversal of `route`. GPS and lidar periods are rounded to
/// whole multiples of the odometry period so every sensor event coincides
/// with a ground-truth sample.
Dataset simulate_run(const FeatureMap& map, const Trajectory& route, const SensorSpec& sensors, double speed,
                     std::uint64_t seed, const std::vector<ArcInterval>& gps_dropout_zones = {});

/// Same-named convenience that carries the world's dropout zones.
Dataset simulate_run(const World& world, const WorldSpec& spec, const SensorSpec& sensors, double speed,
                     std::uint64_t seed);

/// Whether a map feature falls inside the sensor footprint at `pose`.
bool in_sensor_footprint(const LidarSpec& lidar, const Pose2D& pose, const Vec2& feature);

namespace presets {

/// 470 m rounded-rectangle loop, dense everywhere except a 50 m
/// zero-density stretch over [150, 200] m on the long north straight.
WorldSpec quad_world(std::uint64_t seed = 7);
/// Same loop with zone [150, 200] m returned separately for checks.
inline constexpr ArcInterval kQuadDesert{150.0, 200.0};
inline constexpr double kQuadLength = 470.0;
/// Same loop carrying features everywhere; poles sparser than corners.
WorldSpec rich_world(std::uint64_t seed = 11);
SensorSpec default_sensors();
inline constexpr double kDefaultSpeed = 5.0;

}  // namespace presets

}  // namespace locrobust::sim
