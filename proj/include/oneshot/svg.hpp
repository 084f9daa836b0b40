#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "oneshot/csv.hpp"
#include "oneshot/errors.hpp"

namespace oneshot {

// One line of a chart. Series sharing a group id render in the same color,
// which is how per-experiment bundles are drawn.
struct SvgSeries {
  std::string group;
  std::string label;
  std::vector<std::pair<double, double>> points;
};

struct SvgChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 880;
  int height = 520;
};

namespace detail {

inline const std::vector<std::string>& svg_palette() {
  static const std::vector<std::string> colors{
      "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
      "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"};
  return colors;
}

struct AxisRange {
  double lo = 0.0;
  double hi = 1.0;
};

inline AxisRange padded_range(double lo, double hi) {
  if (!(hi > lo)) {
    const double pad = std::max(0.5, std::abs(lo) * 0.1);
    return {lo - pad, hi + pad};
  }
  const double pad = (hi - lo) * 0.06;
  return {lo - pad, hi + pad};
}

}  // namespace detail

// Static line chart as standalone SVG text. The axis ranges cover every data
// point and are exposed as data-* attributes on the root element.
inline std::string render_line_chart(const SvgChartSpec& spec,
                                     const std::vector<SvgSeries>& series) {
  std::size_t total_points = 0;
  for (const auto& s : series) total_points += s.points.size();
  if (series.empty() || total_points == 0) {
    throw ConfigError("chart \"" + spec.title + "\": no data points");
  }

  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) {
        throw ConfigError("chart \"" + spec.title + "\": non-finite data point");
      }
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  const auto xr = detail::padded_range(x_min, x_max);
  const auto yr = detail::padded_range(y_min, y_max);

  const double margin_left = 72, margin_right = 24, margin_top = 44, margin_bottom = 56;
  const double plot_w = spec.width - margin_left - margin_right;
  const double plot_h = spec.height - margin_top - margin_bottom;
  auto to_px = [&](double x, double y) {
    const double px = margin_left + (x - xr.lo) / (xr.hi - xr.lo) * plot_w;
    const double py = margin_top + (yr.hi - y) / (yr.hi - yr.lo) * plot_h;
    return std::pair<double, double>(px, py);
  };

  // stable group -> color assignment in first-appearance order
  std::map<std::string, std::size_t> group_color;
  for (const auto& s : series) {
    group_color.emplace(s.group, group_color.size() % detail::svg_palette().size());
  }

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\""
      << spec.height << "\" viewBox=\"0 0 " << spec.width << " " << spec.height << "\""
      << " data-x-min=\"" << format_double(xr.lo) << "\" data-x-max=\"" << format_double(xr.hi)
      << "\" data-y-min=\"" << format_double(yr.lo) << "\" data-y-max=\""
      << format_double(yr.hi) << "\">\n";
  svg << "  <rect x=\"0\" y=\"0\" width=\"" << spec.width << "\" height=\"" << spec.height
      << "\" fill=\"white\"/>\n";
  svg << "  <text x=\"" << spec.width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << spec.title << "</text>\n";

  // axes
  svg << "  <line x1=\"" << margin_left << "\" y1=\"" << margin_top + plot_h << "\" x2=\""
      << margin_left + plot_w << "\" y2=\"" << margin_top + plot_h
      << "\" stroke=\"#333333\"/>\n";
  svg << "  <line x1=\"" << margin_left << "\" y1=\"" << margin_top << "\" x2=\"" << margin_left
      << "\" y2=\"" << margin_top + plot_h << "\" stroke=\"#333333\"/>\n";

  const int ticks = 5;
  for (int k = 0; k <= ticks; ++k) {
    const double fx = xr.lo + (xr.hi - xr.lo) * k / ticks;
    const double fy = yr.lo + (yr.hi - yr.lo) * k / ticks;
    const auto [px, py_base] = to_px(fx, yr.lo);
    const auto [px_base, py] = to_px(xr.lo, fy);
    svg << "  <line x1=\"" << px << "\" y1=\"" << margin_top + plot_h << "\" x2=\"" << px
        << "\" y2=\"" << margin_top + plot_h + 5 << "\" stroke=\"#333333\"/>\n";
    svg << "  <text x=\"" << px << "\" y=\"" << margin_top + plot_h + 20
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << format_double(std::round(fx * 1e4) / 1e4) << "</text>\n";
    svg << "  <line x1=\"" << margin_left - 5 << "\" y1=\"" << py << "\" x2=\"" << margin_left
        << "\" y2=\"" << py << "\" stroke=\"#333333\"/>\n";
    svg << "  <text x=\"" << margin_left - 8 << "\" y=\"" << py + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << format_double(std::round(fy * 1e4) / 1e4) << "</text>\n";
  }
  svg << "  <text x=\"" << margin_left + plot_w / 2 << "\" y=\"" << spec.height - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << spec.x_label
      << "</text>\n";
  svg << "  <text x=\"18\" y=\"" << margin_top + plot_h / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
      << "transform=\"rotate(-90 18 " << margin_top + plot_h / 2 << ")\">" << spec.y_label
      << "</text>\n";

  for (const auto& s : series) {
    if (s.points.empty()) continue;
    auto sorted = s.points;
    std::sort(sorted.begin(), sorted.end());
    svg << "  <polyline class=\"series\" data-group=\"" << s.group << "\" data-label=\""
        << s.label << "\" fill=\"none\" stroke=\""
        << detail::svg_palette()[group_color.at(s.group)] << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      const auto [px, py] = to_px(sorted[k].first, sorted[k].second);
      if (k > 0) svg << ' ';
      svg << format_double(std::round(px * 100) / 100) << ','
          << format_double(std::round(py * 100) / 100);
    }
    svg << "\"/>\n";
    for (const auto& [x, y] : sorted) {
      const auto [px, py] = to_px(x, y);
      svg << "  <circle cx=\"" << format_double(std::round(px * 100) / 100) << "\" cy=\""
          << format_double(std::round(py * 100) / 100) << "\" r=\"2.2\" fill=\""
          << detail::svg_palette()[group_color.at(s.group)] << "\"/>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace oneshot
