#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

// Minimal self-contained SVG plots. Every figure embeds the config hash it
// was produced from in <metadata>; no timestamps, so reruns are
// byte-identical.

namespace undu {

std::uint64_t fnv1a64(std::string_view text);

struct PlotOptions {
  double width = 720, height = 540;
  std::string title, xlabel, ylabel;
  std::uint64_t provenance_hash = 0;
};

struct LineSeries {
  std::vector<double> x, y;
  std::string label;
  std::string color;  // empty: picked from a palette
  bool markers = true;
  bool line = true;  // false: scatter only
};

std::string render_line_plot(const std::vector<LineSeries>& series, const PlotOptions& opt);

// values(r, c) drawn at x = xs[c], y = ys[r]; diverging palette when the
// data straddles zero, sequential otherwise.
std::string render_heatmap(const Eigen::MatrixXd& values, const Eigen::VectorXd& xs,
                           const Eigen::VectorXd& ys, const PlotOptions& opt);

struct BarSeries {
  std::vector<double> heights;
  std::string label;
  std::string color;
};

// Grouped bars at the given centers; all series must match the center count.
std::string render_bar_chart(const std::vector<double>& centers,
                             const std::vector<BarSeries>& series, const PlotOptions& opt);

}  // namespace undu
