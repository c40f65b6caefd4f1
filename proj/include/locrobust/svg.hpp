#pragma once

// Minimal SVG line plots and lattice panels. Output depends only on the
// inputs (fixed number formatting, no timestamps), so files diff cleanly.

#include "locrobust/core.hpp"
#include "locrobust/metrics.hpp"

#include <string>
#include <vector>

namespace locrobust::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool step = false;  // draw as a staircase
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  /// Shaded x-ranges drawn behind the curves.
  std::vector<ArcInterval> bands;
  std::string band_label;
  /// Fixed y range; when lo >= hi the range is taken from the data.
  double y_min = 0.0;
  double y_max = 0.0;
};

std::string render(const LinePlot& plot, const std::string& comment = {});

/// One panel per boundary showing (dx, dy) cells valid under `rule` at
/// `theta_slice`, with the true pose at the panel centre.
std::string render_lattices(const std::vector<metrics::VptBoundary>& lattices, double theta_slice,
                            metrics::SliceRule rule, const std::string& title, const std::string& comment = {});

}  // namespace locrobust::svg
