#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dbsi {

// Minimal SVG line charts: polylines, axes with ticks, a legend, optional
// dashed vertical event markers and dash-dot horizontal reference lines.
struct ChartSeries {
  std::string label;
  std::vector<double> y;  // x is the sample index
};

struct ChartSpec {
  std::string title;
  std::string x_label = "frame";
  std::string y_label;
  std::vector<ChartSeries> series;
  std::vector<long> vertical_markers;        // dashed, e.g. rescaling events
  std::vector<double> horizontal_references; // dash-dot, e.g. true norms
};

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline const char* series_color(std::size_t k) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return palette[k % 10];
}

// Round tick spacing to 1/2/5 times a power of ten.
inline double nice_step(double span, int target_ticks) {
  if (span <= 0) return 1.0;
  const double raw = span / target_ticks;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

}  // namespace detail

inline std::string render_chart_svg(const ChartSpec& spec) {
  if (spec.series.empty()) throw std::invalid_argument("chart: no series");
  std::size_t max_len = 0;
  for (const auto& s : spec.series) max_len = std::max(max_len, s.y.size());
  if (max_len == 0) throw std::invalid_argument("chart: empty trace");

  double y_min = std::numeric_limits<double>::infinity();
  double y_max = -y_min;
  for (const auto& s : spec.series)
    for (double v : s.y) {
      y_min = std::min(y_min, v);
      y_max = std::max(y_max, v);
    }
  for (double r : spec.horizontal_references) {
    y_min = std::min(y_min, r);
    y_max = std::max(y_max, r);
  }
  if (y_min == y_max) {
    y_min -= 1.0;
    y_max += 1.0;
  }
  const double pad = 0.05 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;

  const double W = 840, H = 480;
  const double ml = 72, mr = 16, mt = 36, mb = 48;
  const double pw = W - ml - mr, ph = H - mt - mb;
  const double x_max = static_cast<double>(max_len - 1);
  auto X = [&](double x) { return ml + (x_max > 0 ? x / x_max : 0.5) * pw; };
  auto Y = [&](double y) { return mt + (1.0 - (y - y_min) / (y_max - y_min)) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\" "
        "font-family=\"sans-serif\">"
     << spec.title << "</text>\n";

  // Axes.
  os << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
     << mt + ph << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
     << "\" stroke=\"black\"/>\n";

  const double xstep = detail::nice_step(x_max, 8);
  for (double x = 0; x <= x_max + 1e-9; x += xstep) {
    os << "<line x1=\"" << detail::svg_num(X(x)) << "\" y1=\"" << mt + ph << "\" x2=\""
       << detail::svg_num(X(x)) << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << detail::svg_num(X(x)) << "\" y=\"" << mt + ph + 20
       << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
       << static_cast<long>(x) << "</text>\n";
    if (x_max == 0) break;
  }
  const double ystep = detail::nice_step(y_max - y_min, 7);
  for (double y = std::ceil(y_min / ystep) * ystep; y <= y_max + 1e-9; y += ystep) {
    os << "<line x1=\"" << ml - 5 << "\" y1=\"" << detail::svg_num(Y(y)) << "\" x2=\"" << ml
       << "\" y2=\"" << detail::svg_num(Y(y)) << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << detail::svg_num(Y(y)) << "\" x2=\"" << ml + pw
       << "\" y2=\"" << detail::svg_num(Y(y)) << "\" stroke=\"#eeeeee\"/>\n";
    os << "<text x=\"" << ml - 8 << "\" y=\"" << detail::svg_num(Y(y) + 4)
       << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << y
       << "</text>\n";
  }
  os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 10
     << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << spec.x_label
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << mt + ph / 2
     << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" "
        "transform=\"rotate(-90 16 "
     << mt + ph / 2 << ")\">" << spec.y_label << "</text>\n";

  for (long m : spec.vertical_markers) {
    if (m < 0 || m > x_max) continue;
    os << "<line x1=\"" << detail::svg_num(X(m)) << "\" y1=\"" << mt << "\" x2=\""
       << detail::svg_num(X(m)) << "\" y2=\"" << mt + ph
       << "\" stroke=\"#555555\" stroke-dasharray=\"6,4\"/>\n";
  }
  for (double r : spec.horizontal_references) {
    os << "<line x1=\"" << ml << "\" y1=\"" << detail::svg_num(Y(r)) << "\" x2=\"" << ml + pw
       << "\" y2=\"" << detail::svg_num(Y(r))
       << "\" stroke=\"#333333\" stroke-dasharray=\"10,3,2,3\"/>\n";
  }

  for (std::size_t k = 0; k < spec.series.size(); ++k) {
    const auto& s = spec.series[k];
    if (s.y.empty()) continue;
    // Thin long traces so files stay small; every pixel column is kept.
    const std::size_t stride = std::max<std::size_t>(1, s.y.size() / 2000);
    os << "<polyline fill=\"none\" stroke=\"" << detail::series_color(k)
       << "\" stroke-width=\"1.3\" points=\"";
    for (std::size_t i = 0; i < s.y.size(); i += stride)
      os << detail::svg_num(X(static_cast<double>(i))) << "," << detail::svg_num(Y(s.y[i])) << " ";
    os << detail::svg_num(X(static_cast<double>(s.y.size() - 1))) << ","
       << detail::svg_num(Y(s.y.back()));
    os << "\"/>\n";
    const double ly = mt + 16 + 16 * static_cast<double>(k);
    os << "<line x1=\"" << ml + pw - 150 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw - 126
       << "\" y2=\"" << ly << "\" stroke=\"" << detail::series_color(k)
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << ml + pw - 120 << "\" y=\"" << ly + 4
       << "\" font-size=\"11\" font-family=\"sans-serif\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline void write_chart_svg(const ChartSpec& spec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write chart file: " + path);
  out << render_chart_svg(spec);
  if (!out) throw std::runtime_error("failed while writing chart file: " + path);
}

}  // namespace dbsi
