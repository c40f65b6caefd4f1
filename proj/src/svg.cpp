#include "locrobust/svg.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace locrobust::svg {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) { return fmt::format("{:.2f}", v); }

double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (const double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

std::string tick_label(double v, double step) {
  if (std::abs(v) < step * 1e-6) v = 0.0;
  if (step >= 1.0) return fmt::format("{:.0f}", v);
  const int digits = static_cast<int>(std::ceil(-std::log10(step)));
  return fmt::format("{:.{}f}", v, digits);
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!(lo <= hi)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

std::string header(double w, double h, const std::string& comment) {
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0:.0f}\" height=\"{1:.0f}\" viewBox=\"0 0 {0:.0f} "
      "{1:.0f}\" font-family=\"sans-serif\" font-size=\"12\">\n",
      w, h);
  if (!comment.empty()) out += "<!-- " + escape(comment) + " -->\n";
  out += fmt::format("<rect width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n", w, h);
  return out;
}

}  // namespace

std::string render(const LinePlot& plot, const std::string& comment) {
  Range xr;
  Range yr;
  for (const auto& s : plot.series) {
    for (const double v : s.x) xr.add(v);
    for (const double v : s.y) yr.add(v);
  }
  for (const auto& b : plot.bands) {
    xr.add(b.begin);
    xr.add(b.end);
  }
  xr.finish();
  if (plot.y_min < plot.y_max) {
    yr.lo = plot.y_min;
    yr.hi = plot.y_max;
  } else {
    yr.add(0.0);
    yr.finish();
  }

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (std::clamp(y, yr.lo, yr.hi) - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::string out = header(kWidth, kHeight, comment);
  out += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                     num(kLeft + pw / 2), escape(plot.title));

  for (const auto& b : plot.bands) {
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#f4cccc\"/>\n", num(px(b.begin)),
                       num(kTop), num(std::max(0.0, px(b.end) - px(b.begin))), num(ph));
  }

  // Axes and ticks.
  out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                     num(kLeft), num(kTop), num(pw), num(ph));
  const double xs = nice_step(xr.hi - xr.lo, 8);
  for (double t = std::ceil(xr.lo / xs) * xs; t <= xr.hi + xs * 1e-9; t += xs) {
    out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", num(px(t)),
                       num(kTop + ph), num(kTop + ph + 5));
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num(px(t)), num(kTop + ph + 19),
                       tick_label(t, xs));
  }
  const double ys = nice_step(yr.hi - yr.lo, 6);
  for (double t = std::ceil(yr.lo / ys) * ys; t <= yr.hi + ys * 1e-9; t += ys) {
    out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#dddddd\"/>\n", num(kLeft),
                       num(py(t)), num(kLeft + pw));
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", num(kLeft - 6), num(py(t) + 4),
                       tick_label(t, ys));
  }
  out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num(kLeft + pw / 2),
                     num(kHeight - 12), escape(plot.x_label));
  out += fmt::format("<text x=\"18\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {0})\">{1}</text>\n",
                     num(kTop + ph / 2), escape(plot.y_label));

  for (std::size_t i = 0; i < plot.series.size(); ++i) {
    const auto& s = plot.series[i];
    const char* colour = kPalette[i % kPalette.size()];
    std::string pts;
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      if (s.step && k > 0) pts += fmt::format("{},{} ", num(px(s.x[k])), num(py(s.y[k - 1])));
      pts += fmt::format("{},{} ", num(px(s.x[k])), num(py(s.y[k])));
    }
    if (!pts.empty()) pts.pop_back();
    out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\" points=\"{}\"/>\n", colour, pts);
  }

  // Legend, one entry per series in insertion order.
  double ly = kTop + 10;
  const double lx = kLeft + pw + 15;
  for (std::size_t i = 0; i < plot.series.size(); ++i) {
    out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2.5\"/>\n", num(lx),
                       num(ly), num(lx + 22), num(ly), kPalette[i % kPalette.size()]);
    out += fmt::format("<text class=\"legend\" x=\"{}\" y=\"{}\">{}</text>\n", num(lx + 28), num(ly + 4),
                       escape(plot.series[i].name));
    ly += 20;
  }
  if (!plot.bands.empty() && !plot.band_label.empty()) {
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"22\" height=\"10\" fill=\"#f4cccc\"/>\n", num(lx), num(ly - 5));
    out += fmt::format("<text class=\"legend\" x=\"{}\" y=\"{}\">{}</text>\n", num(lx + 28), num(ly + 4),
                       escape(plot.band_label));
  }
  out += "</svg>\n";
  return out;
}

std::string render_lattices(const std::vector<metrics::VptBoundary>& lattices, double theta_slice,
                            metrics::SliceRule rule, const std::string& title, const std::string& comment) {
  constexpr double kPanel = 220.0;
  constexpr double kGap = 30.0;
  const std::size_t n = std::max<std::size_t>(1, lattices.size());
  const double w = kGap + static_cast<double>(n) * (kPanel + kGap);
  const double h = kPanel + 100.0;
  std::string out = header(w, h, comment);
  out += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n", num(w / 2),
                     escape(title));

  for (std::size_t p = 0; p < lattices.size(); ++p) {
    const auto& b = lattices[p];
    const int half = b.xy_half();
    const int side = 2 * half + 1;
    const double cell = kPanel / side;
    const double x0 = kGap + static_cast<double>(p) * (kPanel + kGap);
    const double y0 = 45.0;
    const int hmax = std::min(b.heading_half(), static_cast<int>(std::lround(theta_slice / b.grid().heading_step)));
    for (int ix = -half; ix <= half; ++ix) {
      for (int iy = -half; iy <= half; ++iy) {
        bool all = true;
        bool any = false;
        for (int ih = -hmax; ih <= hmax; ++ih) {
          const bool v = b.valid(ix, iy, ih);
          all = all && v;
          any = any || v;
        }
        const bool v = rule == metrics::SliceRule::AllHeadings ? all : any;
        out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"#ffffff\" "
                           "stroke-width=\"0.5\"/>\n",
                           num(x0 + (ix + half) * cell), num(y0 + (half - iy) * cell), num(cell), num(cell),
                           v ? "#2ca02c" : "#eeeeee");
      }
    }
    out += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"black\"/>\n", num(x0 + (half + 0.5) * cell),
                       num(y0 + (half + 0.5) * cell));
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", num(x0),
                       num(y0), num(kPanel), num(kPanel));
    const double extent = half * b.grid().xy_step;
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">arc {:.1f} m, dx/dy in [-{:g}, {:g}] m</text>\n",
                       num(x0 + kPanel / 2), num(y0 + kPanel + 18), b.arc_length(), extent, extent);
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">radius {:.2f} m</text>\n", num(x0 + kPanel / 2),
                       num(y0 + kPanel + 36), metrics::vpt_radius(b, hmax * b.grid().heading_step, rule));
  }
  out += "</svg>\n";
  return out;
}

}  // namespace locrobust::svg
