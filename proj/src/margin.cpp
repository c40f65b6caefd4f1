#include "locrobust/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace locrobust::metrics {

namespace {

void check_series(const ArcSeries& s, const char* what) {
  if (s.arc.empty() || s.arc.size() != s.value.size()) {
    throw std::invalid_argument(std::string("robustness_margin: empty or ragged ") + what + " series");
  }
  for (std::size_t i = 1; i < s.arc.size(); ++i) {
    if (s.arc[i] < s.arc[i - 1]) throw std::invalid_argument(std::string("robustness_margin: unsorted ") + what);
  }
}

double nearest_sample(const ArcSeries& s, double at) {
  const auto it = std::lower_bound(s.arc.begin(), s.arc.end(), at);
  if (it == s.arc.begin()) return s.value.front();
  if (it == s.arc.end()) return s.value.back();
  const auto hi = static_cast<std::size_t>(it - s.arc.begin());
  const std::size_t lo = hi - 1;
  return (at - s.arc[lo] <= s.arc[hi] - at) ? s.value[lo] : s.value[hi];
}

double linear_sample(const ArcSeries& s, double at) {
  const auto it = std::upper_bound(s.arc.begin(), s.arc.end(), at);
  if (it == s.arc.begin()) return s.value.front();
  if (it == s.arc.end()) return s.value.back();
  const auto hi = static_cast<std::size_t>(it - s.arc.begin());
  const std::size_t lo = hi - 1;
  const double span = s.arc[hi] - s.arc[lo];
  const double u = span > 0.0 ? (at - s.arc[lo]) / span : 1.0;
  return s.value[lo] + u * (s.value[hi] - s.value[lo]);
}

}  // namespace

MarginReport robustness_margin(const ArcSeries& vpt_radii, const ArcSeries& bounds, double step) {
  check_series(vpt_radii, "radius");
  check_series(bounds, "bound");
  if (!(step > 0.0)) throw std::invalid_argument("robustness_margin: step must be positive");
  const double begin = std::max(vpt_radii.arc.front(), bounds.arc.front());
  const double end = std::min(vpt_radii.arc.back(), bounds.arc.back());
  if (!(end >= begin)) throw std::invalid_argument("robustness_margin: series do not overlap");

  MarginReport report;
  const double first = std::ceil(begin / step - 1e-9) * step;
  for (std::size_t k = 0;; ++k) {
    const double s = first + static_cast<double>(k) * step;
    if (s > end + 1e-9) break;
    const double r = nearest_sample(vpt_radii, s);
    const double b = linear_sample(bounds, s);
    report.arc.push_back(s);
    report.radius.push_back(r);
    report.bound.push_back(b);
    report.margin.push_back(r - b);
    report.flagged.push_back(r - b <= 0.0 ? 1 : 0);
  }
  if (report.arc.empty()) throw std::invalid_argument("robustness_margin: overlap shorter than one grid step");

  const double half = 0.5 * step;
  for (std::size_t i = 0; i < report.arc.size();) {
    if (!report.flagged[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < report.arc.size() && report.flagged[j + 1]) ++j;
    report.flagged_intervals.push_back(
        {std::max(begin, report.arc[i] - half), std::min(end, report.arc[j] + half)});
    i = j + 1;
  }
  return report;
}

double flagged_coverage(const MarginReport& report, const ArcInterval& zone) {
  double covered = 0.0;
  for (const auto& iv : report.flagged_intervals) covered += overlap_length(iv, zone);
  return covered;
}

ArcSeries position_bound_series(std::span<const filter::StateLogEntry> states) {
  ArcSeries out;
  const auto bounds = filter::confidence_bound(states);
  for (std::size_t i = 0; i < states.size(); ++i) {
    // Several log entries can share an arc length (prediction then update);
    // the last one is the state carried forward.
    if (!out.arc.empty() && out.arc.back() == states[i].arc_length) {
      out.value.back() = bounds[i].position();
      continue;
    }
    out.arc.push_back(states[i].arc_length);
    out.value.push_back(bounds[i].position());
  }
  return out;
}

}  // namespace locrobust::metrics
