#pragma once

#include <string>
#include <vector>

namespace sncpd {

struct PlotSeries {
  std::vector<double> x, y;
  std::string label;
};

struct PlotOptions {
  std::string title;
  std::string x_label, y_label;
  std::vector<double> vertical_marks;  // dashed reference lines (e.g. change points)
  int width = 800, height = 480;
};

// Static line plot; returns the SVG document.
std::string render_line_plot(const std::vector<PlotSeries>& series,
                             const PlotOptions& opt);

void write_line_plot(const std::string& path, const std::vector<PlotSeries>& series,
                     const PlotOptions& opt);

}  // namespace sncpd
