#include "sncpd/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "sncpd/errors.hpp"

namespace sncpd {
namespace {

const char* kPalette[] = {"#1f6fb2", "#d1495b", "#3a7d44", "#8d5a97",
                          "#c98a2b", "#3b8ea5"};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_line_plot(const std::vector<PlotSeries>& series,
                             const PlotOptions& opt) {
  if (series.empty()) throw ConfigError("render_line_plot: no series");
  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  for (const PlotSeries& s : series) {
    if (s.x.size() != s.y.size() || s.x.empty())
      throw ConfigError("render_line_plot: series '" + s.label + "' malformed");
    for (double v : s.x) {
      x_min = std::min(x_min, v);
      x_max = std::max(x_max, v);
    }
    for (double v : s.y) {
      if (!std::isfinite(v)) continue;
      y_min = std::min(y_min, v);
      y_max = std::max(y_max, v);
    }
  }
  if (!std::isfinite(y_min)) {
    y_min = 0.0;
    y_max = 1.0;
  }
  if (x_max == x_min) x_max = x_min + 1.0;
  if (y_max == y_min) {
    y_min -= 0.5;
    y_max += 0.5;
  }
  const double pad_y = 0.05 * (y_max - y_min);
  y_min -= pad_y;
  y_max += pad_y;

  const double ml = 64, mr = 16, mt = opt.title.empty() ? 16 : 36, mb = 44;
  const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;
  auto px = [&](double v) { return ml + (v - x_min) / (x_max - x_min) * pw; };
  auto py = [&](double v) { return mt + (y_max - v) / (y_max - y_min) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width
      << "\" height=\"" << opt.height << "\" viewBox=\"0 0 " << opt.width << " "
      << opt.height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!opt.title.empty())
    svg << "<text x=\"" << opt.width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << escape(opt.title)
        << "</text>\n";

  // Axes with five ticks per side.
  svg << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x_min + (x_max - x_min) * k / 4.0;
    const double yv = y_min + (y_max - y_min) * k / 4.0;
    svg << "<line x1=\"" << fmt(px(xv)) << "\" y1=\"" << mt + ph << "\" x2=\""
        << fmt(px(xv)) << "\" y2=\"" << mt + ph + 4 << "\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << mt + ph + 16
        << "\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
    svg << "<line x1=\"" << ml - 4 << "\" y1=\"" << fmt(py(yv)) << "\" x2=\"" << ml
        << "\" y2=\"" << fmt(py(yv)) << "\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << ml - 7 << "\" y=\"" << fmt(py(yv) + 4)
        << "\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
  }
  svg << "</g>\n";
  svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << fmt(pw)
      << "\" height=\"" << fmt(ph) << "\" fill=\"none\" stroke=\"#333\"/>\n";
  if (!opt.x_label.empty())
    svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << opt.height - 8
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << escape(opt.x_label) << "</text>\n";
  if (!opt.y_label.empty())
    svg << "<text x=\"14\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 14 " << mt + ph / 2 << ")\">" << escape(opt.y_label)
        << "</text>\n";

  for (double mark : opt.vertical_marks) {
    if (mark < x_min || mark > x_max) continue;
    svg << "<line x1=\"" << fmt(px(mark)) << "\" y1=\"" << mt << "\" x2=\""
        << fmt(px(mark)) << "\" y2=\"" << mt + ph
        << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  }

  for (std::size_t s = 0; s < series.size(); ++s) {
    svg << "<polyline fill=\"none\" stroke=\"" << kPalette[s % 6]
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      if (!std::isfinite(series[s].y[i])) continue;
      svg << fmt(px(series[s].x[i])) << "," << fmt(py(series[s].y[i])) << " ";
    }
    svg << "\"/>\n";
    if (!series[s].label.empty())
      svg << "<text x=\"" << ml + 8 << "\" y=\"" << mt + 16 + 15 * double(s)
          << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << kPalette[s % 6]
          << "\">" << escape(series[s].label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_line_plot(const std::string& path, const std::vector<PlotSeries>& series,
                     const PlotOptions& opt) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << render_line_plot(series, opt);
  if (!f) throw IoError("failed writing " + path);
}

}  // namespace sncpd
