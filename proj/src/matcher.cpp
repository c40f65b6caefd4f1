#include "locrobust/matcher.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace locrobust::matcher {

void IcpConfig::validate() const {
  if (!(correspondence_gate > 0.0)) throw std::invalid_argument("IcpConfig: gate must be positive");
  if (max_iterations < 1) throw std::invalid_argument("IcpConfig: max_iterations must be >= 1");
  if (min_inliers < 2) throw std::invalid_argument("IcpConfig: min_inliers must be >= 2");
  if (!(convergence_tol_m > 0.0) || !(convergence_tol_rad > 0.0)) {
    throw std::invalid_argument("IcpConfig: convergence tolerances must be positive");
  }
  if (!(max_rms >= 0.0)) throw std::invalid_argument("IcpConfig: max_rms must be >= 0");
}

namespace {

constexpr double kCoincidentTol = 1e-12;

std::optional<Pose2D> solve_rigid(std::span<const Correspondence> pairs) {
  Vec2 frame_mean = Vec2::Zero();
  Vec2 map_mean = Vec2::Zero();
  for (const auto& c : pairs) {
    frame_mean += c.frame_point;
    map_mean += c.map_point;
  }
  const double n = static_cast<double>(pairs.size());
  frame_mean /= n;
  map_mean /= n;

  double spread = 0.0;
  double cross = 0.0;
  double dot = 0.0;
  for (const auto& c : pairs) {
    const Vec2 p = c.frame_point - frame_mean;
    const Vec2 q = c.map_point - map_mean;
    spread = std::max(spread, p.norm());
    cross += p.x() * q.y() - p.y() * q.x();
    dot += p.x() * q.x() + p.y() * q.y();
  }
  if (spread < kCoincidentTol) return std::nullopt;

  const double theta = std::atan2(cross, dot);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const Vec2 rotated(c * frame_mean.x() - s * frame_mean.y(), s * frame_mean.x() + c * frame_mean.y());
  return Pose2D(map_mean - rotated, theta);
}

}  // namespace

Pose2D rigid_align(std::span<const Correspondence> pairs) {
  if (pairs.size() < 2) {
    throw std::invalid_argument("rigid_align: need at least 2 correspondences, got " + std::to_string(pairs.size()));
  }
  auto result = solve_rigid(pairs);
  if (!result) throw DegenerateAlignment("rigid_align: frame points coincide, rotation is unobservable");
  return *result;
}

MatchResult icp_match(const Pose2D& prior, const FeatureFrame& frame, const FeatureMap& map, const IcpConfig& cfg,
                      IcpTrace* trace) {
  cfg.validate();
  MatchResult result;
  result.pose = prior;
  if (frame.empty()) return result;

  const double gate = cfg.correspondence_gate;
  const double gate2 = gate * gate;
  const auto& features = map.features();
  std::vector<Correspondence> pairs;
  pairs.reserve(frame.observations.size());

  // Builds frame->map nearest-neighbour pairs at `pose`; returns the
  // truncated SSE and the SSE over accepted pairs.
  auto associate = [&](const Pose2D& pose, double& inlier_sse) {
    pairs.clear();
    IcpIteration* record = nullptr;
    if (trace) {
      trace->iterations.push_back({pose, 0.0, {}});
      record = &trace->iterations.back();
    }
    double truncated = 0.0;
    inlier_sse = 0.0;
    for (std::size_t i = 0; i < frame.observations.size(); ++i) {
      const auto& obs = frame.observations[i];
      const Vec2 global = transform_point(pose, obs.point);
      const auto nn = map.nearest(obs.cls, global, gate);
      if (!nn) {
        truncated += gate2;
        continue;
      }
      const double d2 = (features[*nn].position - global).squaredNorm();
      truncated += d2;
      inlier_sse += d2;
      pairs.push_back({global, features[*nn].position});
      if (record) record->pairs.push_back({i, *nn});
    }
    if (record) record->truncated_sse = truncated;
    return truncated;
  };

  Pose2D pose = prior;
  bool settled = false;
  double inlier_sse = 0.0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    associate(pose, inlier_sse);
    if (pairs.size() < 2) break;
    const auto delta = solve_rigid(pairs);
    if (!delta) break;
    ++result.iterations;
    const Pose2D next = compose(*delta, pose);
    const double moved = (next.position() - pose.position()).norm();
    const double turned = std::abs(angle_diff(next.heading(), pose.heading()));
    pose = next;
    if (moved < cfg.convergence_tol_m && turned < cfg.convergence_tol_rad) {
      settled = true;
      break;
    }
  }

  associate(pose, inlier_sse);
  result.pose = pose;
  result.inlier_count = static_cast<int>(pairs.size());
  result.rms = pairs.empty() ? 0.0 : std::sqrt(inlier_sse / static_cast<double>(pairs.size()));
  result.converged = settled && result.inlier_count >= cfg.min_inliers && result.rms <= cfg.max_rms;
  return result;
}

}  // namespace locrobust::matcher
