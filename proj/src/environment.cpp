#include "undusim/environment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>

namespace undu {

void Environment::build_index(double cell_mm) const {
  if (posts.empty()) { cells_.clear(); nx_ = ny_ = 0; return; }
  double rmax = 0;
  for (const Post& p : posts) rmax = std::max(rmax, p.radius_mm);
  cell_ = cell_mm > 0 ? cell_mm : std::max(4.0 * rmax, 1.0);
  ox_ = region.xmin - cell_;
  oy_ = region.ymin - cell_;
  nx_ = std::max(1, int(std::ceil((region.length() + 2 * cell_) / cell_)));
  ny_ = std::max(1, int(std::ceil((region.width() + 2 * cell_) / cell_)));
  cells_.assign(size_t(nx_) * size_t(ny_), {});
  for (int i = 0; i < int(posts.size()); ++i) {
    const Post& p = posts[i];
    const int x0 = std::clamp(int((p.center_mm.x() - p.radius_mm - ox_) / cell_), 0, nx_ - 1);
    const int x1 = std::clamp(int((p.center_mm.x() + p.radius_mm - ox_) / cell_), 0, nx_ - 1);
    const int y0 = std::clamp(int((p.center_mm.y() - p.radius_mm - oy_) / cell_), 0, ny_ - 1);
    const int y1 = std::clamp(int((p.center_mm.y() + p.radius_mm - oy_) / cell_), 0, ny_ - 1);
    for (int cy = y0; cy <= y1; ++cy)
      for (int cx = x0; cx <= x1; ++cx) cells_[size_t(cy) * nx_ + cx].push_back(i);
  }
}

void Environment::query_segment(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double inflate,
                                std::vector<int>& out) const {
  out.clear();
  if (posts.empty()) return;
  if (cells_.empty()) build_index();
  const double xmin = std::min(a.x(), b.x()) - inflate, xmax = std::max(a.x(), b.x()) + inflate;
  const double ymin = std::min(a.y(), b.y()) - inflate, ymax = std::max(a.y(), b.y()) + inflate;
  const int x0 = std::clamp(int((xmin - ox_) / cell_), 0, nx_ - 1);
  const int x1 = std::clamp(int((xmax - ox_) / cell_), 0, nx_ - 1);
  const int y0 = std::clamp(int((ymin - oy_) / cell_), 0, ny_ - 1);
  const int y1 = std::clamp(int((ymax - oy_) / cell_), 0, ny_ - 1);
  for (int cy = y0; cy <= y1; ++cy)
    for (int cx = x0; cx <= x1; ++cx)
      for (int i : cells_[size_t(cy) * nx_ + cx])
        if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
  std::sort(out.begin(), out.end());
}

namespace {

Region default_region(double L, const LatticeOptions& opt) {
  Region r;
  r.xmin = 0;
  r.xmax = opt.region_length_bodylengths * L;
  r.ymin = -0.5 * opt.region_width_bodylengths * L;
  r.ymax = 0.5 * opt.region_width_bodylengths * L;
  return r;
}

void fill_lattice(Environment& env, double d, LatticeGeometry geom, double radius) {
  if (!(d > 2.0 * radius)) throw std::invalid_argument("lattice spacing must exceed post diameter");
  const Region& r = env.region;
  if (geom == LatticeGeometry::square) {
    for (double y = r.ymin + 0.5 * d; y <= r.ymax - 0.25 * d; y += d)
      for (double x = r.xmin + 0.5 * d; x <= r.xmax - 0.25 * d; x += d)
        env.posts.push_back({{x, y}, radius});
  } else {
    const double dy = d * std::sqrt(3.0) / 2.0;
    int row = 0;
    for (double y = r.ymin + 0.5 * d; y <= r.ymax - 0.25 * d; y += dy, ++row) {
      const double off = (row % 2) ? 0.5 * d : 0.0;
      for (double x = r.xmin + 0.5 * d + off; x <= r.xmax - 0.25 * d; x += d)
        env.posts.push_back({{x, y}, radius});
    }
  }
  env.lattice_spacing_mm = d;
}

}  // namespace

Environment build_open(double L, const LatticeOptions& opt) {
  if (!(L > 0)) throw std::invalid_argument("body length must be > 0");
  Environment env;
  env.label = "open";
  env.region = default_region(L, opt);
  return env;
}

Environment build_lattice(double L, double density, LatticeGeometry geom, double radius,
                          const LatticeOptions& opt) {
  if (!(L > 0) || !(density > 0) || !(radius > 0))
    throw std::invalid_argument("lattice parameters must be positive");
  Environment env;
  env.label = "lattice";
  env.region = default_region(L, opt);
  double d = L / density;
  if (opt.snap_grid_mm > 0) d = std::max(1.0, std::round(d / opt.snap_grid_mm)) * opt.snap_grid_mm;
  fill_lattice(env, d, geom, radius);
  return env;
}

Environment build_lattice_by_wavelength_ratio(double L, double wavelength, double ratio,
                                              LatticeGeometry geom, double radius,
                                              const LatticeOptions& opt) {
  if (!(wavelength > 0) || !(ratio > 0)) throw std::invalid_argument("wave parameters must be positive");
  Environment env;
  env.label = "lattice";
  env.region = default_region(L, opt);
  double d = wavelength / ratio;
  if (opt.snap_grid_mm > 0) d = std::max(1.0, std::round(d / opt.snap_grid_mm)) * opt.snap_grid_mm;
  fill_lattice(env, d, geom, radius);
  return env;
}

Environment build_random_field(std::uint64_t seed, int count, double min_gap, double radius,
                               const Region& region) {
  if (count < 0 || !(radius > 0) || min_gap < 0) throw std::invalid_argument("bad field parameters");
  Environment env;
  env.label = "random";
  env.region = region;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(region.xmin + radius, region.xmax - radius);
  std::uniform_real_distribution<double> uy(region.ymin + radius, region.ymax - radius);
  const double min_center_dist = 2.0 * radius + min_gap;
  int attempts = 0;
  const int max_attempts = 20000 * std::max(1, count);
  while (int(env.posts.size()) < count) {
    if (++attempts > max_attempts)
      throw std::runtime_error("random field: cannot satisfy min_gap at this density");
    const Eigen::Vector2d c(ux(rng), uy(rng));
    bool ok = true;
    for (const Post& p : env.posts)
      if ((p.center_mm - c).norm() < min_center_dist) { ok = false; break; }
    if (ok) env.posts.push_back({c, radius});
  }
  return env;
}

Environment build_channel(double width, double length) {
  if (!(width > 0) || !(length > 0)) throw std::invalid_argument("channel dimensions must be positive");
  Environment env;
  env.label = "channel";
  env.region = {0, -0.5 * width, length, 0.5 * width};
  env.walls.push_back({{0, -0.5 * width}, {0, 1}});
  env.walls.push_back({{0, 0.5 * width}, {0, -1}});
  return env;
}

namespace {
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

std::string serialize_environment(const Environment& env) {
  std::ostringstream os;
  os << "# undusim environment v1\n";
  os << "label " << (env.label.empty() ? "unnamed" : env.label) << "\n";
  os << "region " << fmt(env.region.xmin) << " " << fmt(env.region.ymin) << " "
     << fmt(env.region.xmax) << " " << fmt(env.region.ymax) << "\n";
  if (env.lattice_spacing_mm > 0) os << "spacing " << fmt(env.lattice_spacing_mm) << "\n";
  for (const Post& p : env.posts)
    os << "post " << fmt(p.center_mm.x()) << " " << fmt(p.center_mm.y()) << " "
       << fmt(p.radius_mm) << "\n";
  for (const Wall& w : env.walls)
    os << "wall " << fmt(w.point_mm.x()) << " " << fmt(w.point_mm.y()) << " "
       << fmt(w.normal.x()) << " " << fmt(w.normal.y()) << "\n";
  return os.str();
}

Environment parse_environment(const std::string& text) {
  Environment env;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool have_region = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    auto bad = [&](const char* what) {
      throw std::runtime_error("environment file line " + std::to_string(lineno) + ": " + what);
    };
    if (key == "label") {
      ls >> env.label;
    } else if (key == "region") {
      if (!(ls >> env.region.xmin >> env.region.ymin >> env.region.xmax >> env.region.ymax))
        bad("region needs xmin ymin xmax ymax");
      if (env.region.length() <= 0 || env.region.width() <= 0) bad("region is degenerate");
      have_region = true;
    } else if (key == "spacing") {
      if (!(ls >> env.lattice_spacing_mm)) bad("spacing needs a value");
    } else if (key == "post") {
      Post p;
      if (!(ls >> p.center_mm.x() >> p.center_mm.y() >> p.radius_mm)) bad("post needs x y r");
      if (!(p.radius_mm > 0)) bad("post radius must be > 0");
      env.posts.push_back(p);
    } else if (key == "wall") {
      Wall w;
      if (!(ls >> w.point_mm.x() >> w.point_mm.y() >> w.normal.x() >> w.normal.y()))
        bad("wall needs px py nx ny");
      const double n = w.normal.norm();
      if (!(n > 1e-12)) bad("wall normal is zero");
      w.normal /= n;
      env.walls.push_back(w);
    } else {
      bad(("unknown directive '" + key + "'").c_str());
    }
  }
  if (!have_region) throw std::runtime_error("environment file: missing region line");
  return env;
}

}  // namespace undu
