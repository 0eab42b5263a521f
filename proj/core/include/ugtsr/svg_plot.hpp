#pragma once

#include <string>
#include <vector>

#include "ugtsr/matching_bench.hpp"

namespace ugtsr {

// One plotted series: points in data coordinates plus a legend label.
struct PlotSeries {
  std::string label;
  std::string color;  // any SVG color string
  std::vector<std::pair<double, double>> points;
};

// Minimal hand-rolled SVG scatter/line chart on log-log axes. Returns the
// SVG document text; both axes must receive strictly positive data.
std::string render_loglog_chart(const std::vector<PlotSeries>& series, const std::string& title,
                                const std::string& x_label, const std::string& y_label);

// Time-vs-K figure for a matching benchmark report (one series per matcher,
// slope noted in the legend). Writes the SVG to `path`.
void write_bench_plot(const BenchReport& report, const std::string& path);

}  // namespace ugtsr
