#pragma once

// Static SVG line charts for reports. Output depends only on the inputs.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace ost::plot {

struct Series {
  std::string label;
  std::vector<double> x, y;
  bool step = false;  // right-continuous step function instead of a polyline
};

struct Chart {
  std::string title, x_label, y_label;
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  std::vector<double> x_ticks, y_ticks;
  std::vector<Series> series;
  std::vector<double> marker_x;  // vertical guide lines
  std::string metadata;          // written into <metadata>
};

namespace detail {

inline std::string fmt(double v, const char* spec = "%.2f") {
  char buf[32];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline const char* color(std::size_t i) {
  static const char* palette[] = {"#1b6ca8", "#d1495b", "#2e8b57", "#edae49", "#6a4c93",
                                  "#00798c", "#8d6346", "#3d405b", "#e07a5f", "#81b29a"};
  return palette[i % (sizeof palette / sizeof *palette)];
}

}  // namespace detail

inline std::string render_svg(const Chart& c) {
  constexpr double W = 640, H = 420, L = 70, R = 170, T = 40, B = 55;
  const double pw = W - L - R, ph = H - T - B;
  auto sx = [&](double x) { return L + (x - c.x_min) / (c.x_max - c.x_min) * pw; };
  auto sy = [&](double y) { return T + ph - (y - c.y_min) / (c.y_max - c.y_min) * ph; };
  using detail::fmt;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  if (!c.metadata.empty()) o << "<metadata>" << detail::escape(c.metadata) << "</metadata>\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << detail::escape(c.title)
    << "</text>\n";
  o << "<g stroke=\"#999\" stroke-width=\"1\">\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T + ph << "\" x2=\"" << L + pw << "\" y2=\"" << T + ph << "\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << T + ph << "\"/>\n";
  o << "</g>\n";
  for (double x : c.x_ticks)
    o << "<text x=\"" << fmt(sx(x)) << "\" y=\"" << T + ph + 18 << "\" text-anchor=\"middle\">" << fmt(x, "%g")
      << "</text>\n";
  for (double y : c.y_ticks) {
    o << "<line x1=\"" << L << "\" y1=\"" << fmt(sy(y)) << "\" x2=\"" << L + pw << "\" y2=\"" << fmt(sy(y))
      << "\" stroke=\"#eee\"/>\n";
    o << "<text x=\"" << L - 8 << "\" y=\"" << fmt(sy(y) + 4) << "\" text-anchor=\"end\">" << fmt(y, "%g")
      << "</text>\n";
  }
  for (double x : c.marker_x)
    o << "<rect x=\"" << fmt(sx(x) - 6) << "\" y=\"" << T << "\" width=\"12\" height=\"" << ph
      << "\" fill=\"#bbb\" fill-opacity=\"0.4\"/>\n";
  o << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 14 << "\" text-anchor=\"middle\">" << detail::escape(c.x_label)
    << "</text>\n";
  o << "<text transform=\"translate(18," << T + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << detail::escape(c.y_label) << "</text>\n";

  for (std::size_t i = 0; i < c.series.size(); ++i) {
    const auto& s = c.series[i];
    std::string pts;
    auto add = [&](double x, double y) {
      x = std::clamp(x, c.x_min, c.x_max);
      pts += fmt(sx(x)) + "," + fmt(sy(y)) + " ";
    };
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (s.step && k > 0) add(s.x[k], s.y[k - 1]);
      add(s.x[k], s.y[k]);
    }
    if (!pts.empty()) pts.pop_back();
    o << "<polyline fill=\"none\" stroke=\"" << detail::color(i) << "\" stroke-width=\"2\" points=\"" << pts
      << "\"/>\n";
    if (!s.step)
      for (std::size_t k = 0; k < s.x.size(); ++k)
        o << "<circle cx=\"" << fmt(sx(s.x[k])) << "\" cy=\"" << fmt(sy(s.y[k])) << "\" r=\"3\" fill=\""
          << detail::color(i) << "\"/>\n";
    const double ly = T + 10 + 18 * static_cast<double>(i);
    o << "<line x1=\"" << L + pw + 14 << "\" y1=\"" << ly << "\" x2=\"" << L + pw + 34 << "\" y2=\"" << ly
      << "\" stroke=\"" << detail::color(i) << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << L + pw + 40 << "\" y=\"" << ly + 4 << "\">" << detail::escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

// Evenly spaced ticks covering [lo, hi] at a round step.
inline std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
  const double span = hi - lo;
  if (!(span > 0)) return {lo};
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) ticks.push_back(std::abs(t) < 1e-12 ? 0.0 : t);
  return ticks;
}

}  // namespace ost::plot
