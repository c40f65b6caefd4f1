#include "locrobust/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace locrobust::metrics {

std::size_t pau_start_count(double trajectory_length, double max_length, double stride, bool wrap) {
  if (!(stride > 0.0)) throw std::invalid_argument("pau: stride must be positive");
  // Start with the floating estimate and settle it against the exact
  // predicate so the count agrees with a literal k = 0, 1, ... enumeration.
  if (wrap) {
    auto fits = [&](double k) { return k * stride < trajectory_length - kWindowFitTol; };
    double k = std::max(0.0, std::floor(trajectory_length / stride));
    while (k > 0.0 && !fits(k - 1.0)) k -= 1.0;
    while (fits(k)) k += 1.0;
    return static_cast<std::size_t>(k);
  }
  auto fits = [&](double k) { return k * stride + max_length <= trajectory_length + kWindowFitTol; };
  if (!fits(0.0)) return 0;
  double k = std::floor((trajectory_length - max_length) / stride);
  while (k > 0.0 && !fits(k)) k -= 1.0;
  while (fits(k + 1.0)) k += 1.0;
  return static_cast<std::size_t>(k) + 1;
}

namespace {

void check_lengths(std::span<const double> lengths, double trajectory_length) {
  if (lengths.empty()) throw std::invalid_argument("pau: no window lengths given");
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (!(lengths[i] > 0.0)) throw std::invalid_argument("pau: window lengths must be positive");
    if (i > 0 && !(lengths[i] > lengths[i - 1])) {
      throw std::invalid_argument("pau: window lengths must be strictly increasing");
    }
    if (lengths[i] > trajectory_length + kWindowFitTol) {
      throw std::invalid_argument("pau: window length exceeds the trajectory length");
    }
  }
}

}  // namespace

PauCurve pau_curve(std::span<const double> event_arcs, double trajectory_length, std::span<const double> lengths,
                   double stride, const PauOptions& options) {
  check_lengths(lengths, trajectory_length);
  const std::size_t starts = pau_start_count(trajectory_length, lengths.back(), stride, options.wrap);
  if (starts == 0) throw std::invalid_argument("pau: trajectory too short for the longest window");

  std::vector<double> events(event_arcs.begin(), event_arcs.end());
  std::sort(events.begin(), events.end());
  // Any event strictly inside (begin, end)?
  auto covered = [&](double begin, double end) {
    const auto it = std::upper_bound(events.begin(), events.end(), begin);
    return it != events.end() && *it < end;
  };

  PauCurve curve;
  curve.lengths.assign(lengths.begin(), lengths.end());
  curve.window_stride = stride;
  curve.trajectory_length = trajectory_length;
  for (const double l : lengths) {
    std::size_t absent = 0;
    for (std::size_t k = 0; k < starts; ++k) {
      const double s = static_cast<double>(k) * stride;
      bool hit = covered(s, s + l);
      if (options.wrap && !hit && s + l > trajectory_length) {
        hit = covered(s - trajectory_length, s + l - trajectory_length);
      }
      if (!hit) ++absent;
    }
    curve.probabilities.push_back(static_cast<double>(absent) / static_cast<double>(starts));
  }
  return curve;
}

PauCurve pau_curve(std::span<const filter::UpdateEvent> events, double trajectory_length,
                   std::span<const double> lengths, double stride, const PauOptions& options) {
  std::vector<double> arcs;
  for (const auto& e : events) {
    if (e.accepted) arcs.push_back(e.arc_length);
  }
  return pau_curve(arcs, trajectory_length, lengths, stride, options);
}

std::optional<double> pau_cutoff(const PauCurve& curve, double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("pau_cutoff: p must be in (0, 1)");
  for (std::size_t i = 0; i < curve.lengths.size(); ++i) {
    if (curve.probabilities[i] <= p) return curve.lengths[i];
  }
  return std::nullopt;
}

double pau_area(const PauCurve& curve) {
  if (curve.lengths.size() < 2 || curve.lengths.size() != curve.probabilities.size()) {
    throw std::invalid_argument("pau_area: need at least two samples");
  }
  double area = 0.0;
  for (std::size_t i = 1; i < curve.lengths.size(); ++i) {
    area += 0.5 * (curve.probabilities[i] + curve.probabilities[i - 1]) * (curve.lengths[i] - curve.lengths[i - 1]);
  }
  return area;
}

double pau_area_between(const PauCurve& a, const PauCurve& b) {
  if (a.lengths != b.lengths) throw std::invalid_argument("pau_area_between: curves use different length grids");
  return pau_area(a) - pau_area(b);
}

std::vector<double> length_grid(double start, double stop, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("length_grid: step must be positive");
  std::vector<double> out;
  for (std::size_t k = 0;; ++k) {
    const double v = start + static_cast<double>(k) * step;
    if (v > stop + 1e-9) break;
    out.push_back(v);
  }
  return out;
}

}  // namespace locrobust::metrics
