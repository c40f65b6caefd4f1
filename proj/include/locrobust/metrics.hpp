#pragma once

#include "locrobust/core.hpp"
#include "locrobust/filter.hpp"
#include "locrobust/matcher.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace locrobust::metrics {

// ---------------------------------------------------------------------------
// Valid prior threshold
// ---------------------------------------------------------------------------

/// Lattice of prior perturbations. Offsets are k * step for integer k with
/// |k * step| <= extent, so each axis has 2 * half + 1 entries.
struct VptGridSpec {
  double xy_step = 1.0;
  double xy_extent = 10.0;
  double heading_step = 0.1;
  double heading_extent = 0.1;

  void validate() const;
  int xy_half() const;
  int heading_half() const;

  bool operator==(const VptGridSpec&) const = default;
};

struct ValidityTolerance {
  double position = 0.5;  // m
  double heading = 0.05;  // rad
};

/// Validity of every lattice offset at one map location. Offsets are applied
/// in the map frame: prior = (E + dx, N + dy, heading + dtheta).
class VptBoundary {
 public:
  VptBoundary() = default;
  VptBoundary(double arc_length, const Pose2D& true_pose, const VptGridSpec& grid);

  double arc_length() const { return arc_length_; }
  const Pose2D& true_pose() const { return true_pose_; }
  const VptGridSpec& grid() const { return grid_; }
  int xy_half() const { return xy_half_; }
  int heading_half() const { return heading_half_; }
  std::size_t cell_count() const { return valid_.size(); }

  /// Indices are signed offsets in lattice steps, |ix|,|iy| <= xy_half().
  bool valid(int ix, int iy, int ih) const { return valid_[flat(ix, iy, ih)] != 0; }
  void set_valid(int ix, int iy, int ih, bool v) { valid_[flat(ix, iy, ih)] = v ? 1 : 0; }
  bool zero_offset_valid() const { return valid(0, 0, 0); }

  bool operator==(const VptBoundary&) const = default;

 private:
  std::size_t flat(int ix, int iy, int ih) const;

  double arc_length_ = 0.0;
  Pose2D true_pose_;
  VptGridSpec grid_;
  int xy_half_ = 0;
  int heading_half_ = 0;
  std::vector<std::uint8_t> valid_;
};

/// Runs icp_match from every perturbed prior and marks the offset valid when
/// the match converged and landed within `tol` of `true_pose`. Lattice cells
/// are evaluated on `threads` workers; the result does not depend on it.
VptBoundary vpt_evaluate(const FeatureFrame& frame, const FeatureMap& map, const Pose2D& true_pose,
                         const VptGridSpec& grid, const matcher::IcpConfig& icp_cfg, const ValidityTolerance& tol,
                         unsigned threads = 1, double arc_length = 0.0);

/// How the heading slice collapses the lattice onto (dx, dy) cells.
enum class SliceRule {
  AllHeadings,  // cell valid only if valid at every |dtheta| <= slice
  AnyHeading,   // cell valid if valid at some |dtheta| <= slice
};

/// sqrt(valid cell count * xy_step^2) at the given heading slice. Throws
/// std::invalid_argument if the slice is not a lattice heading offset.
double vpt_radius(const VptBoundary& boundary, double theta_slice, SliceRule rule = SliceRule::AllHeadings);

struct LocatedFrame {
  double arc_length = 0.0;
  FeatureFrame frame;  // must carry true_pose
};

struct VptProfileConfig {
  VptGridSpec grid;
  ValidityTolerance tolerance;
  double theta_slice = 0.1;
  SliceRule rule = SliceRule::AllHeadings;
  double window = 6.0;  // m
};

struct VptWindow {
  ArcInterval interval;
  double span_min = 0.0;  // min / max / median of non-zero radii; 0 if none
  double span_max = 0.0;
  double median = 0.0;
  std::size_t frames = 0;
};

struct VptProfile {
  std::vector<double> arc_lengths;
  std::vector<double> radii;
  std::vector<VptWindow> windows;
  /// Frames with at least min_inliers observations whose zero-offset prior
  /// was nevertheless invalid.
  std::vector<std::string> warnings;
};

/// Radius per frame plus per-window aggregates over consecutive windows
/// [k * window, (k + 1) * window). Windows without frames are omitted.
VptProfile vpt_profile(std::span<const LocatedFrame> frames, const FeatureMap& map, const VptProfileConfig& cfg,
                       const matcher::IcpConfig& icp_cfg, unsigned threads = 1);

/// Window aggregation on its own, for precomputed radii.
std::vector<VptWindow> vpt_windows(std::span<const double> arc_lengths, std::span<const double> radii, double window);

double median(std::vector<double> values);

// ---------------------------------------------------------------------------
// Probability of absence of updates
// ---------------------------------------------------------------------------

struct PauCurve {
  std::vector<double> lengths;
  std::vector<double> probabilities;
  double window_stride = 0.0;
  double trajectory_length = 0.0;
};

struct PauOptions {
  /// Let windows run across the end of a loop back to its start.
  bool wrap = false;
};

/// Tolerance used when deciding whether a window [s, s + max_l] still fits.
inline constexpr double kWindowFitTol = 1e-9;

/// Number of shared window starts s_k = k * stride with s_k + max_l <= L.
/// With wrapping, every s_k < L is a start.
std::size_t pau_start_count(double trajectory_length, double max_length, double stride, bool wrap = false);

/// P(AU_l) for each l: the fraction of windows (s, s + l) over the shared
/// start set that contain no event strictly inside them.
PauCurve pau_curve(std::span<const double> event_arcs, double trajectory_length, std::span<const double> lengths,
                   double stride, const PauOptions& options = {});
/// Accepted events only are counted.
PauCurve pau_curve(std::span<const filter::UpdateEvent> events, double trajectory_length,
                   std::span<const double> lengths, double stride, const PauOptions& options = {});

/// Smallest listed l with P(AU_l) <= p; empty if the curve never gets there.
std::optional<double> pau_cutoff(const PauCurve& curve, double p);

/// Trapezoidal area under (l, P).
double pau_area(const PauCurve& curve);
/// pau_area(a) - pau_area(b); the curves must share their length grid.
double pau_area_between(const PauCurve& a, const PauCurve& b);

/// Evenly spaced lengths start, start + step, ... <= stop.
std::vector<double> length_grid(double start, double stop, double step);

// ---------------------------------------------------------------------------
// Robustness margin
// ---------------------------------------------------------------------------

struct ArcSeries {
  std::vector<double> arc;
  std::vector<double> value;
};

struct MarginReport {
  std::vector<double> arc;
  std::vector<double> radius;
  std::vector<double> bound;
  std::vector<double> margin;
  std::vector<std::uint8_t> flagged;
  /// Maximal runs of flagged grid points, widened by half a grid step.
  std::vector<ArcInterval> flagged_intervals;
};

/// Resamples both series onto a common grid of spacing `step` over their
/// overlap (radii by nearest sample, bounds linearly) and flags every point
/// with radius - bound <= 0. Throws std::invalid_argument on empty overlap.
MarginReport robustness_margin(const ArcSeries& vpt_radii, const ArcSeries& bounds, double step = 1.0);

/// Total length of `zone` covered by the report's flagged intervals.
double flagged_coverage(const MarginReport& report, const ArcInterval& zone);

/// Position-bound series (max of easting/northing 95% bounds) keyed by the
/// state log's arc length.
ArcSeries position_bound_series(std::span<const filter::StateLogEntry> states);

}  // namespace locrobust::metrics
