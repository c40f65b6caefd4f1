#include "locrobust/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace locrobust {

double wrap_angle(double theta) {
  if (!std::isfinite(theta)) {
    throw std::domain_error("wrap_angle: non-finite angle");
  }
  double r = std::remainder(theta, kTwoPi);  // [-pi, pi]
  if (r <= -kPi) r += kTwoPi;
  return r;
}

Pose2D::Pose2D(double easting, double northing, double heading)
    : easting_(easting), northing_(northing), heading_(wrap_angle(heading)) {}

Pose2D::Pose2D(const Vec2& position, double heading) : Pose2D(position.x(), position.y(), heading) {}

Pose2D compose(const Pose2D& a, const Pose2D& b) {
  const double c = std::cos(a.heading());
  const double s = std::sin(a.heading());
  return {a.easting() + c * b.easting() - s * b.northing(),
          a.northing() + s * b.easting() + c * b.northing(), a.heading() + b.heading()};
}

Pose2D inverse(const Pose2D& p) {
  const double c = std::cos(p.heading());
  const double s = std::sin(p.heading());
  return {-c * p.easting() - s * p.northing(), s * p.easting() - c * p.northing(), -p.heading()};
}

Pose2D between(const Pose2D& a, const Pose2D& b) { return compose(inverse(a), b); }

Vec2 transform_point(const Pose2D& pose, const Vec2& point) {
  const double c = std::cos(pose.heading());
  const double s = std::sin(pose.heading());
  return {pose.easting() + c * point.x() - s * point.y(), pose.northing() + s * point.x() + c * point.y()};
}

PoseError pose_error(const Pose2D& estimate, const Pose2D& truth) {
  return {(estimate.position() - truth.position()).norm(),
          std::abs(angle_diff(estimate.heading(), truth.heading()))};
}

std::string_view to_string(FeatureClass cls) {
  switch (cls) {
    case FeatureClass::Pole:
      return "pole";
    case FeatureClass::Corner:
      return "corner";
  }
  return "unknown";
}

FeatureClass parse_feature_class(std::string_view text) {
  if (text == "pole") return FeatureClass::Pole;
  if (text == "corner") return FeatureClass::Corner;
  throw std::invalid_argument("unknown feature class '" + std::string(text) + "'");
}

FeatureMap::FeatureMap(std::vector<MapFeature> features, double cell_size)
    : features_(std::move(features)), cell_size_(cell_size) {
  if (!(cell_size_ > 0.0)) throw std::invalid_argument("FeatureMap: cell size must be positive");
  std::unordered_set<int> ids;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto& f = features_[i];
    if (!std::isfinite(f.position.x()) || !std::isfinite(f.position.y())) {
      throw std::invalid_argument("FeatureMap: feature " + std::to_string(f.id) + " has a non-finite position");
    }
    if (!ids.insert(f.id).second) {
      throw std::invalid_argument("FeatureMap: duplicate feature id " + std::to_string(f.id));
    }
    auto& index = index_[static_cast<int>(f.cls)];
    index.cells[cell_key(cell_coord(f.position.x()), cell_coord(f.position.y()))].push_back(i);
  }
}

std::int64_t FeatureMap::cell_coord(double v) const {
  return static_cast<std::int64_t>(std::floor(v / cell_size_));
}

std::int64_t FeatureMap::cell_key(std::int64_t cx, std::int64_t cy) const {
  return (cx << 32) ^ (cy & 0xffffffffLL);
}

std::size_t FeatureMap::count(FeatureClass cls) const {
  return static_cast<std::size_t>(
      std::count_if(features_.begin(), features_.end(), [cls](const MapFeature& f) { return f.cls == cls; }));
}

std::optional<std::size_t> FeatureMap::nearest(FeatureClass cls, const Vec2& point, double radius) const {
  const auto& index = index_[static_cast<int>(cls)];
  if (index.cells.empty() || !(radius >= 0.0)) return std::nullopt;
  const std::int64_t cx = cell_coord(point.x());
  const std::int64_t cy = cell_coord(point.y());
  const auto rings = static_cast<std::int64_t>(std::ceil(radius / cell_size_));
  const double r2 = radius * radius;
  double best_d2 = std::numeric_limits<double>::infinity();
  std::optional<std::size_t> best;
  for (std::int64_t ix = cx - rings; ix <= cx + rings; ++ix) {
    for (std::int64_t iy = cy - rings; iy <= cy + rings; ++iy) {
      const auto it = index.cells.find(cell_key(ix, iy));
      if (it == index.cells.end()) continue;
      for (const std::size_t idx : it->second) {
        const double d2 = (features_[idx].position - point).squaredNorm();
        if (d2 > r2) continue;
        if (d2 < best_d2 || (d2 == best_d2 && idx < *best)) {
          best_d2 = d2;
          best = idx;
        }
      }
    }
  }
  return best;
}

FeatureMap FeatureMap::restricted_to(std::span<const FeatureClass> classes) const {
  std::vector<MapFeature> kept;
  for (const auto& f : features_) {
    if (std::find(classes.begin(), classes.end(), f.cls) != classes.end()) kept.push_back(f);
  }
  return FeatureMap(std::move(kept), cell_size_);
}

FeatureFrame FeatureFrame::restricted_to(std::span<const FeatureClass> classes) const {
  FeatureFrame out;
  out.timestamp = timestamp;
  out.true_pose = true_pose;
  for (const auto& o : observations) {
    if (std::find(classes.begin(), classes.end(), o.cls) != classes.end()) out.observations.push_back(o);
  }
  return out;
}

std::vector<ClassedPoint> transform_frame_to_global(const Pose2D& pose, const FeatureFrame& frame) {
  std::vector<ClassedPoint> out;
  out.reserve(frame.observations.size());
  for (const auto& o : frame.observations) out.push_back({o.cls, transform_point(pose, o.point)});
  return out;
}

Trajectory Trajectory::from_poses(std::span<const double> timestamps, std::span<const Pose2D> poses) {
  if (timestamps.size() != poses.size()) {
    throw std::invalid_argument("Trajectory: timestamp and pose counts differ");
  }
  Trajectory traj;
  traj.samples_.reserve(poses.size());
  double arc = 0.0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (i > 0) {
      if (!(timestamps[i] > timestamps[i - 1])) {
        throw std::invalid_argument("Trajectory: timestamps must be strictly increasing");
      }
      arc += (poses[i].position() - poses[i - 1].position()).norm();
    }
    traj.samples_.push_back({timestamps[i], poses[i], arc});
  }
  return traj;
}

namespace {

Pose2D interpolate(const TrajectorySample& a, const TrajectorySample& b, double u) {
  const Vec2 p = a.pose.position() + u * (b.pose.position() - a.pose.position());
  const double h = a.pose.heading() + u * angle_diff(b.pose.heading(), a.pose.heading());
  return {p, h};
}

}  // namespace

Pose2D Trajectory::pose_at_arc(double arc) const {
  if (samples_.empty()) throw std::logic_error("Trajectory::pose_at_arc on empty trajectory");
  if (arc <= samples_.front().arc_length) return samples_.front().pose;
  if (arc >= samples_.back().arc_length) return samples_.back().pose;
  const auto it = std::upper_bound(samples_.begin(), samples_.end(), arc,
                                   [](double s, const TrajectorySample& x) { return s < x.arc_length; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double span = b.arc_length - a.arc_length;
  const double u = span > 0.0 ? (arc - a.arc_length) / span : 0.0;
  return interpolate(a, b, u);
}

Pose2D Trajectory::pose_at_time(double t) const {
  if (samples_.empty()) throw std::logic_error("Trajectory::pose_at_time on empty trajectory");
  if (t <= samples_.front().timestamp) return samples_.front().pose;
  if (t >= samples_.back().timestamp) return samples_.back().pose;
  const auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                                   [](double v, const TrajectorySample& x) { return v < x.timestamp; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  return interpolate(a, b, (t - a.timestamp) / (b.timestamp - a.timestamp));
}

double Trajectory::arc_at_time(double t) const {
  if (samples_.empty()) return 0.0;
  if (t <= samples_.front().timestamp) return samples_.front().arc_length;
  if (t >= samples_.back().timestamp) return samples_.back().arc_length;
  const auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                                   [](double v, const TrajectorySample& x) { return v < x.timestamp; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double u = (t - a.timestamp) / (b.timestamp - a.timestamp);
  return a.arc_length + u * (b.arc_length - a.arc_length);
}

double overlap_length(const ArcInterval& a, const ArcInterval& b) {
  return std::max(0.0, std::min(a.end, b.end) - std::max(a.begin, b.begin));
}

}  // namespace locrobust
