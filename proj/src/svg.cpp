#include "undusim/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace undu {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
constexpr int kPaletteSize = 6;

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char ch : s) {
    if (ch == '&') out += "&amp;";
    else if (ch == '<') out += "&lt;";
    else if (ch == '>') out += "&gt;";
    else out += ch;
  }
  return out;
}

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

double nice_step(double range, int target) {
  if (!(range > 0)) return 1;
  const double raw = range / std::max(1, target);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  double step;
  if (norm < 1.5) step = 1;
  else if (norm < 3.5) step = 2;
  else if (norm < 7.5) step = 5;
  else step = 10;
  return step * mag;
}

struct Frame {
  double w, h;
  double ml = 70, mr = 24, mt = 44, mb = 56;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;

  double px(double x) const { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); }
  double py(double y) const { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); }

  void pad_degenerate() {
    if (!(xmax > xmin)) {
      const double p = std::max(1.0, std::abs(xmin) * 0.1);
      xmin -= p;
      xmax += p;
    }
    if (!(ymax > ymin)) {
      const double p = std::max(1.0, std::abs(ymin) * 0.1);
      ymin -= p;
      ymax += p;
    }
  }
};

void open_svg(std::ostringstream& os, const PlotOptions& opt) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(opt.width) << "\" height=\""
     << num(opt.height) << "\" viewBox=\"0 0 " << num(opt.width) << ' ' << num(opt.height)
     << "\">\n";
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(opt.provenance_hash));
  os << "<metadata id=\"provenance\">config-hash:" << hash << "</metadata>\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void draw_frame(std::ostringstream& os, const Frame& f, const PlotOptions& opt) {
  os << "<g font-family=\"sans-serif\" font-size=\"13\" fill=\"#222\">\n";
  if (!opt.title.empty())
    os << "<text x=\"" << num(0.5 * f.w) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"16\">"
       << xml_escape(opt.title) << "</text>\n";
  if (!opt.xlabel.empty())
    os << "<text x=\"" << num(f.ml + 0.5 * (f.w - f.ml - f.mr)) << "\" y=\"" << num(f.h - 12)
       << "\" text-anchor=\"middle\">" << xml_escape(opt.xlabel) << "</text>\n";
  if (!opt.ylabel.empty())
    os << "<text x=\"16\" y=\"" << num(f.mt + 0.5 * (f.h - f.mt - f.mb))
       << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << num(f.mt + 0.5 * (f.h - f.mt - f.mb)) << ")\">" << xml_escape(opt.ylabel) << "</text>\n";

  // axes box
  os << "<rect x=\"" << num(f.ml) << "\" y=\"" << num(f.mt) << "\" width=\""
     << num(f.w - f.ml - f.mr) << "\" height=\"" << num(f.h - f.mt - f.mb)
     << "\" fill=\"none\" stroke=\"#444\"/>\n";

  const double xs = nice_step(f.xmax - f.xmin, 6);
  for (double t = std::ceil(f.xmin / xs) * xs; t <= f.xmax + 1e-9 * xs; t += xs) {
    const double p = f.px(t);
    os << "<line x1=\"" << num(p) << "\" y1=\"" << num(f.h - f.mb) << "\" x2=\"" << num(p)
       << "\" y2=\"" << num(f.h - f.mb + 5) << "\" stroke=\"#444\"/>\n";
    os << "<text x=\"" << num(p) << "\" y=\"" << num(f.h - f.mb + 19)
       << "\" text-anchor=\"middle\" font-size=\"12\">" << num(std::abs(t) < 1e-12 ? 0 : t)
       << "</text>\n";
  }
  const double ys = nice_step(f.ymax - f.ymin, 6);
  for (double t = std::ceil(f.ymin / ys) * ys; t <= f.ymax + 1e-9 * ys; t += ys) {
    const double p = f.py(t);
    os << "<line x1=\"" << num(f.ml - 5) << "\" y1=\"" << num(p) << "\" x2=\"" << num(f.ml)
       << "\" y2=\"" << num(p) << "\" stroke=\"#444\"/>\n";
    os << "<text x=\"" << num(f.ml - 8) << "\" y=\"" << num(p + 4)
       << "\" text-anchor=\"end\" font-size=\"12\">" << num(std::abs(t) < 1e-12 ? 0 : t)
       << "</text>\n";
  }
  os << "</g>\n";
}

void draw_legend(std::ostringstream& os, const Frame& f, const std::vector<std::string>& labels,
                 const std::vector<std::string>& colors) {
  bool any = false;
  for (const std::string& l : labels)
    if (!l.empty()) any = true;
  if (!any) return;
  os << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\">\n";
  double y = f.mt + 14;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].empty()) continue;
    const double x = f.w - f.mr - 150;
    os << "<line x1=\"" << num(x) << "\" y1=\"" << num(y - 4) << "\" x2=\"" << num(x + 22)
       << "\" y2=\"" << num(y - 4) << "\" stroke=\"" << colors[i]
       << "\" stroke-width=\"2.5\"/>\n";
    os << "<text x=\"" << num(x + 28) << "\" y=\"" << num(y) << "\">" << xml_escape(labels[i])
       << "</text>\n";
    y += 17;
  }
  os << "</g>\n";
}

std::string lerp_color(const double a[3], const double b[3], double t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", int(a[0] + (b[0] - a[0]) * t + 0.5),
                int(a[1] + (b[1] - a[1]) * t + 0.5), int(a[2] + (b[2] - a[2]) * t + 0.5));
  return buf;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string render_line_plot(const std::vector<LineSeries>& series, const PlotOptions& opt) {
  if (series.empty()) throw std::invalid_argument("line plot needs at least one series");
  Frame f;
  f.w = opt.width;
  f.h = opt.height;
  bool first = true;
  for (const LineSeries& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("series x/y size mismatch");
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        f.xmin = f.xmax = s.x[i];
        f.ymin = f.ymax = s.y[i];
        first = false;
      }
      f.xmin = std::min(f.xmin, s.x[i]);
      f.xmax = std::max(f.xmax, s.x[i]);
      f.ymin = std::min(f.ymin, s.y[i]);
      f.ymax = std::max(f.ymax, s.y[i]);
    }
  }
  if (first) throw std::invalid_argument("line plot has no points");
  const double ypad = 0.06 * (f.ymax - f.ymin);
  f.ymin -= ypad;
  f.ymax += ypad;
  f.pad_degenerate();

  std::ostringstream os;
  open_svg(os, opt);
  draw_frame(os, f, opt);
  std::vector<std::string> labels, colors;
  for (size_t si = 0; si < series.size(); ++si) {
    const LineSeries& s = series[si];
    const std::string color = s.color.empty() ? kPalette[si % kPaletteSize] : s.color;
    labels.push_back(s.label);
    colors.push_back(color);
    if (s.line && s.x.size() > 1) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (size_t i = 0; i < s.x.size(); ++i)
        os << num(f.px(s.x[i])) << ',' << num(f.py(s.y[i])) << ' ';
      os << "\"/>\n";
    }
    if (s.markers)
      for (size_t i = 0; i < s.x.size(); ++i)
        os << "<circle cx=\"" << num(f.px(s.x[i])) << "\" cy=\"" << num(f.py(s.y[i]))
           << "\" r=\"3\" fill=\"" << color << "\"/>\n";
  }
  draw_legend(os, f, labels, colors);
  os << "</svg>\n";
  return os.str();
}

std::string render_heatmap(const Eigen::MatrixXd& values, const Eigen::VectorXd& xs,
                           const Eigen::VectorXd& ys, const PlotOptions& opt) {
  if (values.rows() != ys.size() || values.cols() != xs.size())
    throw std::invalid_argument("heatmap grid does not match value matrix");
  if (xs.size() < 1 || ys.size() < 1) throw std::invalid_argument("heatmap needs a nonempty grid");

  auto spacing = [](const Eigen::VectorXd& v) {
    if (v.size() < 2) return 1.0;
    return (v[v.size() - 1] - v[0]) / double(v.size() - 1);
  };
  const double dx = spacing(xs), dy = spacing(ys);

  Frame f;
  f.w = opt.width;
  f.h = opt.height;
  f.mr = 86;  // room for the colorbar
  f.xmin = xs.minCoeff() - 0.5 * std::abs(dx);
  f.xmax = xs.maxCoeff() + 0.5 * std::abs(dx);
  f.ymin = ys.minCoeff() - 0.5 * std::abs(dy);
  f.ymax = ys.maxCoeff() + 0.5 * std::abs(dy);
  f.pad_degenerate();

  const double vmin = values.minCoeff(), vmax = values.maxCoeff();
  const bool diverging = vmin < 0 && vmax > 0;
  const double lim = std::max(std::abs(vmin), std::abs(vmax));
  const double blue[3] = {33, 102, 172}, white[3] = {247, 247, 247}, red[3] = {178, 24, 43};
  auto color_of = [&](double v) {
    if (diverging) {
      const double t = lim > 0 ? std::clamp(v / lim, -1.0, 1.0) : 0.0;
      return t < 0 ? lerp_color(white, blue, -t) : lerp_color(white, red, t);
    }
    const double t = vmax > vmin ? (v - vmin) / (vmax - vmin) : 0.0;
    return lerp_color(white, blue, t);
  };

  std::ostringstream os;
  open_svg(os, opt);
  for (long r = 0; r < values.rows(); ++r)
    for (long c = 0; c < values.cols(); ++c) {
      const double x0 = f.px(xs[c] - 0.5 * dx), x1 = f.px(xs[c] + 0.5 * dx);
      const double y0 = f.py(ys[r] - 0.5 * dy), y1 = f.py(ys[r] + 0.5 * dy);
      os << "<rect x=\"" << num(std::min(x0, x1)) << "\" y=\"" << num(std::min(y0, y1))
         << "\" width=\"" << num(std::abs(x1 - x0)) << "\" height=\"" << num(std::abs(y1 - y0))
         << "\" fill=\"" << color_of(values(r, c)) << "\"/>\n";
    }
  draw_frame(os, f, opt);

  // discrete colorbar
  const int swatches = 12;
  const double bx = f.w - f.mr + 18, bw = 16;
  const double by0 = f.mt, bh = (f.h - f.mt - f.mb) / swatches;
  const double lo = diverging ? -lim : vmin, hi = diverging ? lim : vmax;
  for (int i = 0; i < swatches; ++i) {
    const double v = hi - (hi - lo) * (i + 0.5) / swatches;
    os << "<rect x=\"" << num(bx) << "\" y=\"" << num(by0 + i * bh) << "\" width=\"" << num(bw)
       << "\" height=\"" << num(bh + 0.5) << "\" fill=\"" << color_of(v) << "\"/>\n";
  }
  os << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#222\">\n";
  os << "<text x=\"" << num(bx + bw + 4) << "\" y=\"" << num(by0 + 10) << "\">" << num(hi)
     << "</text>\n";
  os << "<text x=\"" << num(bx + bw + 4) << "\" y=\"" << num(f.h - f.mb) << "\">" << num(lo)
     << "</text>\n";
  os << "</g>\n";
  os << "</svg>\n";
  return os.str();
}

std::string render_bar_chart(const std::vector<double>& centers,
                             const std::vector<BarSeries>& series, const PlotOptions& opt) {
  if (centers.empty() || series.empty()) throw std::invalid_argument("bar chart needs data");
  for (const BarSeries& s : series)
    if (s.heights.size() != centers.size())
      throw std::invalid_argument("bar series length does not match centers");

  double spacing = 1;
  if (centers.size() > 1) spacing = (centers.back() - centers.front()) / double(centers.size() - 1);

  Frame f;
  f.w = opt.width;
  f.h = opt.height;
  f.xmin = centers.front() - spacing;
  f.xmax = centers.back() + spacing;
  f.ymin = 0;
  f.ymax = 0;
  for (const BarSeries& s : series)
    for (double v : s.heights) {
      f.ymin = std::min(f.ymin, v);
      f.ymax = std::max(f.ymax, v);
    }
  f.ymax *= 1.08;
  f.pad_degenerate();

  std::ostringstream os;
  open_svg(os, opt);
  const double group = 0.8 * spacing;
  const double bw = group / double(series.size());
  std::vector<std::string> labels, colors;
  for (size_t si = 0; si < series.size(); ++si) {
    const std::string color =
        series[si].color.empty() ? kPalette[si % kPaletteSize] : series[si].color;
    labels.push_back(series[si].label);
    colors.push_back(color);
    for (size_t i = 0; i < centers.size(); ++i) {
      const double xc = centers[i] - 0.5 * group + (double(si) + 0.5) * bw;
      const double x0 = f.px(xc - 0.45 * bw), x1 = f.px(xc + 0.45 * bw);
      const double y0 = f.py(0), y1 = f.py(series[si].heights[i]);
      os << "<rect x=\"" << num(std::min(x0, x1)) << "\" y=\"" << num(std::min(y0, y1))
         << "\" width=\"" << num(std::abs(x1 - x0)) << "\" height=\"" << num(std::abs(y1 - y0))
         << "\" fill=\"" << color << "\"/>\n";
    }
  }
  draw_frame(os, f, opt);
  draw_legend(os, f, labels, colors);
  os << "</svg>\n";
  return os.str();
}

}  // namespace undu
