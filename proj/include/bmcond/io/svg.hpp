#pragma once

// Deterministic SVG line charts: fixed view box, polylines, optional point
// markers. Identical input gives identical bytes.

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "bmcond/io/csv.hpp"

namespace bmcond::io {

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#000000";
  bool markers = false;  ///< simulation curves carry markers, analytic ones do not
};

struct Panel {
  std::string title;
  std::vector<Series> series;
};

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                           "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

namespace detail {

inline std::string coord(double v) { return format_number(std::round(v * 100.0) / 100.0, 7); }

inline void write_panel(std::ostream& out, const Panel& p, double top, double width, double height) {
  constexpr double margin = 40.0;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : p.series) {
    for (double v : s.x)
      if (std::isfinite(v)) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y)
      if (std::isfinite(v)) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!(x1 > x0)) x0 = 0.0, x1 = 1.0;
  if (!(y1 > y0)) y0 -= 0.5, y1 += 0.5;
  const double pw = width - 2 * margin, ph = height - 2 * margin;
  auto px = [&](double v) { return margin + (v - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return top + margin + (1.0 - (v - y0) / (y1 - y0)) * ph; };

  out << "<g>\n";
  out << "<rect x=\"" << coord(margin) << "\" y=\"" << coord(top + margin) << "\" width=\"" << coord(pw)
      << "\" height=\"" << coord(ph) << "\" fill=\"none\" stroke=\"#888888\"/>\n";
  out << "<text x=\"" << coord(margin) << "\" y=\"" << coord(top + margin - 8) << "\" font-size=\"12\">" << p.title
      << " [" << format_number(y0, 4) << ", " << format_number(y1, 4) << "]</text>\n";
  for (const auto& s : p.series) {
    out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1\" points=\"";
    const std::size_t n = std::min(s.x.size(), s.y.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(s.y[i])) continue;
      out << coord(px(s.x[i])) << ',' << coord(py(s.y[i])) << (i + 1 < n ? " " : "");
    }
    out << "\"/>\n";
    if (s.markers) {
      const std::size_t every = std::max<std::size_t>(1, n / 24);
      for (std::size_t i = 0; i < n; i += every) {
        if (!std::isfinite(s.y[i])) continue;
        out << "<circle cx=\"" << coord(px(s.x[i])) << "\" cy=\"" << coord(py(s.y[i]))
            << "\" r=\"2.5\" fill=\"none\" stroke=\"" << s.color << "\"/>\n";
      }
    }
  }
  out << "</g>\n";
}

}  // namespace detail

/// Panels stacked vertically, each 800 x 320.
inline void write_svg(std::ostream& out, const std::vector<Panel>& panels) {
  constexpr double width = 800.0, height = 320.0;
  const double total = height * static_cast<double>(std::max<std::size_t>(1, panels.size()));
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << detail::coord(width) << ' ' << detail::coord(total)
      << "\" width=\"" << detail::coord(width) << "\" height=\"" << detail::coord(total) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  for (std::size_t k = 0; k < panels.size(); ++k)
    detail::write_panel(out, panels[k], height * static_cast<double>(k), width, height);
  out << "</svg>\n";
}

}  // namespace bmcond::io
