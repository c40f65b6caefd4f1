#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace locrobust {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

using Vec2 = Eigen::Vector2d;

/// Wraps an angle into (-pi, pi]. Throws std::domain_error on non-finite input.
double wrap_angle(double theta);

/// Signed shortest rotation from `b` to `a`, in (-pi, pi].
inline double angle_diff(double a, double b) { return wrap_angle(a - b); }

/// Planar pose in the map frame. Heading is measured from East and is kept
/// wrapped to (-pi, pi] by every constructor and operation.
class Pose2D {
 public:
  Pose2D() = default;
  Pose2D(double easting, double northing, double heading);
  Pose2D(const Vec2& position, double heading);

  static Pose2D identity() { return {}; }

  double easting() const { return easting_; }
  double northing() const { return northing_; }
  double heading() const { return heading_; }
  Vec2 position() const { return {easting_, northing_}; }

  bool operator==(const Pose2D&) const = default;

 private:
  double easting_ = 0.0;
  double northing_ = 0.0;
  double heading_ = 0.0;
};

/// a ⊕ b: `b` expressed in the frame of `a`, mapped to the frame `a` lives in.
Pose2D compose(const Pose2D& a, const Pose2D& b);
Pose2D inverse(const Pose2D& p);
/// inverse(a) ⊕ b.
Pose2D between(const Pose2D& a, const Pose2D& b);
Vec2 transform_point(const Pose2D& pose, const Vec2& point);

/// Euclidean position error and absolute wrapped heading error.
struct PoseError {
  double position = 0.0;
  double heading = 0.0;
};
PoseError pose_error(const Pose2D& estimate, const Pose2D& truth);

enum class FeatureClass : std::uint8_t { Pole, Corner };

std::string_view to_string(FeatureClass cls);
/// Accepts "pole" / "corner". Throws std::invalid_argument otherwise.
FeatureClass parse_feature_class(std::string_view text);

struct MapFeature {
  int id = 0;
  FeatureClass cls = FeatureClass::Pole;
  Vec2 position = Vec2::Zero();
};

/// Immutable landmark map with an exact per-class spatial hash for
/// nearest-neighbour queries. Safe to share across threads.
class FeatureMap {
 public:
  FeatureMap() = default;
  /// Throws std::invalid_argument on duplicate ids or non-finite positions.
  explicit FeatureMap(std::vector<MapFeature> features, double cell_size = 4.0);

  const std::vector<MapFeature>& features() const { return features_; }
  std::size_t size() const { return features_.size(); }
  bool empty() const { return features_.empty(); }
  std::size_t count(FeatureClass cls) const;

  /// Index of the nearest feature of class `cls` with distance <= radius.
  /// Ties resolve to the lowest index so results are order independent.
  std::optional<std::size_t> nearest(FeatureClass cls, const Vec2& point, double radius) const;

  /// Map containing only the features whose class is listed.
  FeatureMap restricted_to(std::span<const FeatureClass> classes) const;

 private:
  struct ClassIndex {
    std::unordered_map<std::int64_t, std::vector<std::size_t>> cells;
  };
  std::int64_t cell_key(std::int64_t cx, std::int64_t cy) const;
  std::int64_t cell_coord(double v) const;

  std::vector<MapFeature> features_;
  double cell_size_ = 4.0;
  ClassIndex index_[2];
};

struct FeatureObservation {
  FeatureClass cls = FeatureClass::Pole;
  Vec2 point = Vec2::Zero();  // sensor frame
  /// Simulator annotation: id of the map feature this detection came from,
  /// empty for clutter (or for frames without ground truth).
  std::optional<int> truth_id;
};

struct FeatureFrame {
  double timestamp = 0.0;
  std::vector<FeatureObservation> observations;
  /// Set only for simulated frames.
  std::optional<Pose2D> true_pose;

  bool empty() const { return observations.empty(); }
  /// Copy holding only observations of the listed classes.
  FeatureFrame restricted_to(std::span<const FeatureClass> classes) const;
};

struct ClassedPoint {
  FeatureClass cls = FeatureClass::Pole;
  Vec2 point = Vec2::Zero();
};

std::vector<ClassedPoint> transform_frame_to_global(const Pose2D& pose, const FeatureFrame& frame);

struct TrajectorySample {
  double timestamp = 0.0;
  Pose2D pose;
  double arc_length = 0.0;
};

/// Time-ordered poses with cumulative planar arc length (heading changes at
/// standstill add nothing).
class Trajectory {
 public:
  Trajectory() = default;
  /// Throws std::invalid_argument unless timestamps are strictly increasing.
  static Trajectory from_poses(std::span<const double> timestamps, std::span<const Pose2D> poses);

  const std::vector<TrajectorySample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  double length() const { return samples_.empty() ? 0.0 : samples_.back().arc_length; }
  const TrajectorySample& front() const { return samples_.front(); }
  const TrajectorySample& back() const { return samples_.back(); }

  /// Linear interpolation in position and shortest-path interpolation in
  /// heading; clamps outside [0, length()].
  Pose2D pose_at_arc(double arc) const;
  /// Same, parameterised by time.
  Pose2D pose_at_time(double t) const;
  double arc_at_time(double t) const;

 private:
  std::vector<TrajectorySample> samples_;
};

/// Closed interval of arc length [begin, end] in meters.
struct ArcInterval {
  double begin = 0.0;
  double end = 0.0;

  bool contains(double s) const { return s >= begin && s <= end; }
  double length() const { return end - begin; }
};

/// Length of the intersection of two intervals (0 when disjoint).
double overlap_length(const ArcInterval& a, const ArcInterval& b);

struct OdometryIncrement {
  double timestamp = 0.0;
  double distance = 0.0;       // m travelled since the previous increment
  double heading_change = 0.0; // rad
};

struct GpsReading {
  double timestamp = 0.0;
  double easting = 0.0;
  double northing = 0.0;
  double sigma = 0.0;
};

}  // namespace locrobust
