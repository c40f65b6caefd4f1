#pragma once

#include "locrobust/core.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace locrobust::matcher {

struct IcpConfig {
  double correspondence_gate = 3.0;  // m, max nearest-neighbour distance
  int max_iterations = 50;
  double convergence_tol_m = 1e-4;
  double convergence_tol_rad = 1e-5;
  int min_inliers = 3;
  double max_rms = 0.5;  // m

  void validate() const;
};

/// `converged` is the validity verdict: the iteration settled and the final
/// correspondence set passed the inlier-count and RMS gates.
struct MatchResult {
  bool converged = false;
  Pose2D pose;
  double rms = 0.0;
  int inlier_count = 0;
  int iterations = 0;
};

struct Correspondence {
  Vec2 frame_point;
  Vec2 map_point;
};

class DegenerateAlignment : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Closed-form least-squares rigid transform T with T ⊕ frame_point ≈ map_point.
/// Throws std::invalid_argument for fewer than two pairs and
/// DegenerateAlignment when all frame points coincide.
Pose2D rigid_align(std::span<const Correspondence> pairs);

/// Per-iteration record of an icp_match call, for instrumentation.
struct IcpIteration {
  Pose2D pose;  // estimate the correspondences were built from
  /// Sum over all frame points of min(d^2, gate^2), d the class-constrained
  /// nearest-neighbour distance at `pose`. Non-increasing across iterations.
  double truncated_sse = 0.0;
  struct Pair {
    std::size_t observation;
    std::size_t feature;
  };
  std::vector<Pair> pairs;
};

struct IcpTrace {
  std::vector<IcpIteration> iterations;
};

/// Class-constrained point ICP: frame points are registered to map features
/// of the same class starting from `prior`.
MatchResult icp_match(const Pose2D& prior, const FeatureFrame& frame, const FeatureMap& map, const IcpConfig& cfg,
                      IcpTrace* trace = nullptr);

}  // namespace locrobust::matcher
