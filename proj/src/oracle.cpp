#include "locrobust/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace locrobust::oracle {

namespace {

constexpr int kPointsPerAxis = 61;  // odd, so the centre is on the grid
constexpr int kRefineCells = 4;
// Translation and rotation are coupled through the lever arm of the points,
// so the grid is refined well past the requested resolution.
constexpr double kOversample = 20.0;

double pair_sse(std::span<const matcher::Correspondence> pairs, double x, double y, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  double sse = 0.0;
  for (const auto& p : pairs) {
    const double ex = c * p.frame_point.x() - s * p.frame_point.y() + x - p.map_point.x();
    const double ey = s * p.frame_point.x() + c * p.frame_point.y() + y - p.map_point.y();
    sse += ex * ex + ey * ey;
  }
  return sse;
}

}  // namespace

BruteAlignResult brute_rigid_align(std::span<const matcher::Correspondence> pairs, double resolution) {
  if (pairs.empty()) throw std::invalid_argument("brute_rigid_align: no correspondences");
  if (!(resolution > 0.0)) throw std::invalid_argument("brute_rigid_align: resolution must be positive");

  BruteAlignResult out;
  bool distinct = false;
  double reach_frame = 0.0;
  double reach_map = 0.0;
  for (const auto& p : pairs) {
    reach_frame = std::max(reach_frame, p.frame_point.norm());
    reach_map = std::max(reach_map, p.map_point.norm());
    for (const auto& q : pairs) {
      if ((p.frame_point - q.frame_point).norm() > 1e-12) distinct = true;
    }
  }
  out.degenerate = !distinct;

  // Any minimiser has |t| <= max|map| + max|frame|.
  std::array<double, 3> centre{0.0, 0.0, 0.0};
  std::array<double, 3> half{reach_frame + reach_map + 1.0, reach_frame + reach_map + 1.0, kPi};
  const int mid = kPointsPerAxis / 2;
  for (;;) {
    std::array<double, 3> spacing{};
    for (int a = 0; a < 3; ++a) spacing[a] = half[a] / mid;
    const int theta_points = out.degenerate ? 1 : kPointsPerAxis;

    double best = std::numeric_limits<double>::infinity();
    std::array<double, 3> arg = centre;
    for (int i = 0; i < kPointsPerAxis; ++i) {
      const double x = centre[0] + (i - mid) * spacing[0];
      for (int j = 0; j < kPointsPerAxis; ++j) {
        const double y = centre[1] + (j - mid) * spacing[1];
        for (int k = 0; k < theta_points; ++k) {
          const double theta = out.degenerate ? 0.0 : centre[2] + (k - mid) * spacing[2];
          const double e = pair_sse(pairs, x, y, theta);
          if (e < best) {
            best = e;
            arg = {x, y, theta};
          }
        }
      }
    }
    centre = arg;
    const double target = resolution / kOversample;
    const bool fine = spacing[0] <= target && spacing[1] <= target && (out.degenerate || spacing[2] <= target);
    if (fine) break;
    for (int a = 0; a < 3; ++a) half[a] = kRefineCells * spacing[a];
  }
  out.pose = Pose2D(centre[0], centre[1], centre[2]);
  return out;
}

metrics::PauCurve brute_pau(std::span<const double> event_arcs, double trajectory_length,
                            std::span<const double> lengths, double stride) {
  if (lengths.empty() || !(stride > 0.0)) throw std::invalid_argument("brute_pau: bad arguments");
  const double longest = *std::max_element(lengths.begin(), lengths.end());

  std::vector<double> starts;
  for (std::size_t k = 0;; ++k) {
    const double s = static_cast<double>(k) * stride;
    if (!(s + longest <= trajectory_length + metrics::kWindowFitTol)) break;
    starts.push_back(s);
  }
  if (starts.empty()) throw std::invalid_argument("brute_pau: no window fits");

  struct Window {
    double begin;
    double end;
  };
  metrics::PauCurve curve;
  curve.window_stride = stride;
  curve.trajectory_length = trajectory_length;
  for (const double l : lengths) {
    std::vector<Window> traj;
    for (const double s : starts) traj.push_back({s, s + l});
    std::vector<Window> absent;
    for (const auto& w : traj) {
      bool any = false;
      for (const double e : event_arcs) {
        if (e > w.begin && e < w.end) any = true;
      }
      if (!any) absent.push_back(w);
    }
    curve.lengths.push_back(l);
    curve.probabilities.push_back(static_cast<double>(absent.size()) / static_cast<double>(traj.size()));
  }
  return curve;
}

}  // namespace locrobust::oracle
