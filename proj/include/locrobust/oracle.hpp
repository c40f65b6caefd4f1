#pragma once

// Brute-force reference implementations. They share no code with the
// optimised paths they are compared against and are only meant for tests
// and `locrobust verify`.

#include "locrobust/core.hpp"
#include "locrobust/matcher.hpp"
#include "locrobust/metrics.hpp"

#include <span>

namespace locrobust::oracle {

struct BruteAlignResult {
  Pose2D pose;
  /// All frame points coincide: translation is recovered, rotation is not
  /// observable and is reported as 0.
  bool degenerate = false;
};

/// Exhaustive coarse-to-fine grid search over (dx, dy, dtheta) minimising the
/// sum of squared pair distances, refined until the minimiser is located to
/// within `resolution` on every axis. Intended for <= 10 pairs.
BruteAlignResult brute_rigid_align(std::span<const matcher::Correspondence> pairs, double resolution);

/// Literal window-by-window enumeration of TRAJ_l and AU_l.
metrics::PauCurve brute_pau(std::span<const double> event_arcs, double trajectory_length,
                            std::span<const double> lengths, double stride);

}  // namespace locrobust::oracle
