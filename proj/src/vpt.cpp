#include "locrobust/metrics.hpp"
#include "locrobust/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace locrobust::metrics {

namespace {

int steps_within(double extent, double step) { return static_cast<int>(std::floor(extent / step + 1e-9)); }

}  // namespace

void VptGridSpec::validate() const {
  if (!(xy_step > 0.0) || !(heading_step > 0.0)) throw std::invalid_argument("VptGridSpec: steps must be positive");
  if (!(xy_extent >= xy_step) || !(heading_extent >= heading_step)) {
    throw std::invalid_argument("VptGridSpec: extents must be at least one step");
  }
}

int VptGridSpec::xy_half() const { return steps_within(xy_extent, xy_step); }
int VptGridSpec::heading_half() const { return steps_within(heading_extent, heading_step); }

VptBoundary::VptBoundary(double arc_length, const Pose2D& true_pose, const VptGridSpec& grid)
    : arc_length_(arc_length), true_pose_(true_pose), grid_(grid) {
  grid_.validate();
  xy_half_ = grid_.xy_half();
  heading_half_ = grid_.heading_half();
  const std::size_t nxy = 2 * static_cast<std::size_t>(xy_half_) + 1;
  const std::size_t nh = 2 * static_cast<std::size_t>(heading_half_) + 1;
  valid_.assign(nxy * nxy * nh, 0);
}

std::size_t VptBoundary::flat(int ix, int iy, int ih) const {
  if (std::abs(ix) > xy_half_ || std::abs(iy) > xy_half_ || std::abs(ih) > heading_half_) {
    throw std::out_of_range("VptBoundary: lattice index out of range");
  }
  const std::size_t nxy = 2 * static_cast<std::size_t>(xy_half_) + 1;
  const std::size_t nh = 2 * static_cast<std::size_t>(heading_half_) + 1;
  return (static_cast<std::size_t>(ix + xy_half_) * nxy + static_cast<std::size_t>(iy + xy_half_)) * nh +
         static_cast<std::size_t>(ih + heading_half_);
}

VptBoundary vpt_evaluate(const FeatureFrame& frame, const FeatureMap& map, const Pose2D& true_pose,
                         const VptGridSpec& grid, const matcher::IcpConfig& icp_cfg, const ValidityTolerance& tol,
                         unsigned threads, double arc_length) {
  icp_cfg.validate();
  VptBoundary boundary(arc_length, true_pose, grid);
  if (frame.empty()) return boundary;

  const int hx = boundary.xy_half();
  const int hh = boundary.heading_half();
  const std::size_t nxy = 2 * static_cast<std::size_t>(hx) + 1;
  const std::size_t nh = 2 * static_cast<std::size_t>(hh) + 1;
  std::vector<std::uint8_t> verdict(nxy * nxy * nh, 0);
  parallel_for(verdict.size(), threads, [&](std::size_t flat) {
    const int ih = static_cast<int>(flat % nh) - hh;
    const int iy = static_cast<int>((flat / nh) % nxy) - hx;
    const int ix = static_cast<int>(flat / (nh * nxy)) - hx;
    const Pose2D prior(true_pose.easting() + ix * grid.xy_step, true_pose.northing() + iy * grid.xy_step,
                       true_pose.heading() + ih * grid.heading_step);
    const auto match = matcher::icp_match(prior, frame, map, icp_cfg);
    if (!match.converged) return;
    const auto err = pose_error(match.pose, true_pose);
    verdict[flat] = err.position <= tol.position && err.heading <= tol.heading ? 1 : 0;
  });
  for (std::size_t flat = 0; flat < verdict.size(); ++flat) {
    const int ih = static_cast<int>(flat % nh) - hh;
    const int iy = static_cast<int>((flat / nh) % nxy) - hx;
    const int ix = static_cast<int>(flat / (nh * nxy)) - hx;
    boundary.set_valid(ix, iy, ih, verdict[flat] != 0);
  }
  return boundary;
}

double vpt_radius(const VptBoundary& boundary, double theta_slice, SliceRule rule) {
  const double step = boundary.grid().heading_step;
  const double k = theta_slice / step;
  const double rounded = std::round(k);
  if (!(theta_slice >= 0.0) || std::abs(k - rounded) > 1e-9 * std::max(1.0, k) ||
      rounded > boundary.heading_half()) {
    throw std::invalid_argument(
        fmt::format("vpt_radius: heading slice {} is not a lattice offset (step {})", theta_slice, step));
  }
  const int slice = static_cast<int>(rounded);
  const int hx = boundary.xy_half();
  std::size_t count = 0;
  for (int ix = -hx; ix <= hx; ++ix) {
    for (int iy = -hx; iy <= hx; ++iy) {
      bool all = true;
      bool any = false;
      for (int ih = -slice; ih <= slice; ++ih) {
        const bool v = boundary.valid(ix, iy, ih);
        all = all && v;
        any = any || v;
      }
      if (rule == SliceRule::AllHeadings ? all : any) ++count;
    }
  }
  const double xy = boundary.grid().xy_step;
  return std::sqrt(static_cast<double>(count) * xy * xy);
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<VptWindow> vpt_windows(std::span<const double> arc_lengths, std::span<const double> radii, double window) {
  if (arc_lengths.size() != radii.size()) throw std::invalid_argument("vpt_windows: size mismatch");
  if (!(window > 0.0)) throw std::invalid_argument("vpt_windows: window must be positive");
  std::vector<VptWindow> out;
  std::size_t i = 0;
  while (i < arc_lengths.size()) {
    const auto k = static_cast<long>(std::floor(arc_lengths[i] / window));
    VptWindow w;
    w.interval = {static_cast<double>(k) * window, static_cast<double>(k + 1) * window};
    std::vector<double> nonzero;
    while (i < arc_lengths.size() && static_cast<long>(std::floor(arc_lengths[i] / window)) == k) {
      if (radii[i] > 0.0) nonzero.push_back(radii[i]);
      ++w.frames;
      ++i;
    }
    if (!nonzero.empty()) {
      const auto [lo, hi] = std::minmax_element(nonzero.begin(), nonzero.end());
      w.span_min = *lo;
      w.span_max = *hi;
      w.median = median(std::move(nonzero));
    }
    out.push_back(w);
  }
  return out;
}

VptProfile vpt_profile(std::span<const LocatedFrame> frames, const FeatureMap& map, const VptProfileConfig& cfg,
                       const matcher::IcpConfig& icp_cfg, unsigned threads) {
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].arc_length < frames[i - 1].arc_length) {
      throw std::invalid_argument("vpt_profile: frames must be ordered by arc length");
    }
  }
  for (const auto& f : frames) {
    if (!f.frame.true_pose) throw std::invalid_argument("vpt_profile: every frame needs a true pose");
  }

  VptProfile profile;
  profile.arc_lengths.resize(frames.size());
  profile.radii.resize(frames.size());
  std::vector<std::uint8_t> suspicious(frames.size(), 0);
  parallel_for(frames.size(), threads, [&](std::size_t i) {
    const auto& f = frames[i];
    const auto boundary = vpt_evaluate(f.frame, map, *f.frame.true_pose, cfg.grid, icp_cfg, cfg.tolerance, 1,
                                       f.arc_length);
    profile.arc_lengths[i] = f.arc_length;
    profile.radii[i] = vpt_radius(boundary, cfg.theta_slice, cfg.rule);
    const auto n = static_cast<int>(f.frame.observations.size());
    suspicious[i] = n >= icp_cfg.min_inliers && !boundary.zero_offset_valid() ? 1 : 0;
  });
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (suspicious[i]) {
      profile.warnings.push_back(fmt::format("zero-offset prior invalid at arc {:.2f} m with {} observations",
                                             frames[i].arc_length, frames[i].frame.observations.size()));
    }
  }
  profile.windows = vpt_windows(profile.arc_lengths, profile.radii, cfg.window);
  return profile;
}

}  // namespace locrobust::metrics
