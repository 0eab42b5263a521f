#include "ugtsr/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ugtsr {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 440;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 20;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 55;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// Short human-readable tick label: powers of ten as plain numbers,
// everything else in scientific shorthand.
std::string tick_label(double v) {
  char buf[64];
  if (v >= 1.0 && v < 1e6) {
    std::snprintf(buf, sizeof(buf), "%g", v);
  } else {
    std::snprintf(buf, sizeof(buf), "%.0e", v);
  }
  return buf;
}

}  // namespace

std::string render_loglog_chart(const std::vector<PlotSeries>& series, const std::string& title,
                                const std::string& x_label, const std::string& y_label) {
  double min_x = 0.0, max_x = 0.0, min_y = 0.0, max_y = 0.0;
  bool first = true;
  for (const PlotSeries& s : series) {
    for (const auto& [x, y] : s.points) {
      if (x <= 0.0 || y <= 0.0) {
        throw std::invalid_argument("render_loglog_chart: data must be positive");
      }
      if (first) {
        min_x = max_x = x;
        min_y = max_y = y;
        first = false;
      } else {
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
      }
    }
  }
  if (first) throw std::invalid_argument("render_loglog_chart: no data");

  // Pad the log range a little so points stay off the frame.
  const double pad = 0.08;
  double lx0 = std::log10(min_x), lx1 = std::log10(max_x);
  double ly0 = std::log10(min_y), ly1 = std::log10(max_y);
  if (lx1 - lx0 < 1e-9) lx1 = lx0 + 1.0;
  if (ly1 - ly0 < 1e-9) ly1 = ly0 + 1.0;
  const double dx = (lx1 - lx0) * pad, dy = (ly1 - ly0) * pad;
  lx0 -= dx;
  lx1 += dx;
  ly0 -= dy;
  ly1 += dy;

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  const auto sx = [&](double x) {
    return kMarginLeft + (std::log10(x) - lx0) / (lx1 - lx0) * plot_w;
  };
  const auto sy = [&](double y) {
    return kMarginTop + plot_h - (std::log10(y) - ly0) / (ly1 - ly0) * plot_h;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  svg << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"16\">" << title << "</text>\n";

  // Frame.
  svg << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\"" << fmt(plot_w)
      << "\" height=\"" << fmt(plot_h) << "\" fill=\"none\" stroke=\"#444\"/>\n";

  // Decade grid lines and tick labels.
  for (int e = static_cast<int>(std::ceil(lx0)); e <= static_cast<int>(std::floor(lx1)); ++e) {
    const double v = std::pow(10.0, e);
    const double px = sx(v);
    svg << "<line x1=\"" << fmt(px) << "\" y1=\"" << kMarginTop << "\" x2=\"" << fmt(px)
        << "\" y2=\"" << kMarginTop + plot_h << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << fmt(px) << "\" y=\"" << kMarginTop + plot_h + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << tick_label(v) << "</text>\n";
  }
  for (int e = static_cast<int>(std::ceil(ly0)); e <= static_cast<int>(std::floor(ly1)); ++e) {
    const double v = std::pow(10.0, e);
    const double py = sy(v);
    svg << "<line x1=\"" << kMarginLeft << "\" y1=\"" << fmt(py) << "\" x2=\""
        << kMarginLeft + plot_w << "\" y2=\"" << fmt(py) << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << fmt(py + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << tick_label(v)
        << "</text>\n";
  }

  // Axis labels.
  svg << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << x_label
      << "</text>\n";
  svg << "<text x=\"16\" y=\"" << kMarginTop + plot_h / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 16 "
      << kMarginTop + plot_h / 2 << ")\">" << y_label << "</text>\n";

  // Series: polyline through sorted-x points plus dots, legend in the corner.
  int legend_y = kMarginTop + 16;
  for (const PlotSeries& s : series) {
    std::vector<std::pair<double, double>> pts = s.points;
    std::sort(pts.begin(), pts.end());
    svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) svg << fmt(sx(x)) << "," << fmt(sy(y)) << " ";
    svg << "\"/>\n";
    for (const auto& [x, y] : pts) {
      svg << "<circle cx=\"" << fmt(sx(x)) << "\" cy=\"" << fmt(sy(y)) << "\" r=\"3.5\" fill=\""
          << s.color << "\"/>\n";
    }
    svg << "<rect x=\"" << kMarginLeft + 12 << "\" y=\"" << legend_y - 9
        << "\" width=\"14\" height=\"4\" fill=\"" << s.color << "\"/>\n";
    svg << "<text x=\"" << kMarginLeft + 32 << "\" y=\"" << legend_y
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label << "</text>\n";
    legend_y += 18;
  }

  svg << "</svg>\n";
  return svg.str();
}

void write_bench_plot(const BenchReport& report, const std::string& path) {
  PlotSeries topk{"top-k matcher (slope " + fmt(report.topk_slope) + ")", "#1f77b4", {}};
  PlotSeries naive{"global attention (slope " + fmt(report.naive_slope) + ")", "#d62728", {}};
  for (const BenchRow& row : report.rows) {
    auto& dst = row.matcher == "topk" ? topk : naive;
    dst.points.emplace_back(static_cast<double>(row.codebook_size), row.median_seconds);
  }
  if (topk.points.empty() || naive.points.empty()) {
    throw std::invalid_argument("write_bench_plot: report is missing a matcher series");
  }
  const std::string svg = render_loglog_chart({topk, naive}, "Matching cost vs codebook size",
                                              "codebook size K", "median seconds per call");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write plot " + path);
  out << svg;
  if (!out) throw std::runtime_error("plot write failed: " + path);
}

}  // namespace ugtsr
