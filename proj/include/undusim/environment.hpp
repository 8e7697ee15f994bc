#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

// Planar obstacle fields the body moves through: circular posts, frictional
// half-plane walls, and the bounding region whose crossing ends a run.

namespace undu {

struct Post {
  Eigen::Vector2d center_mm;
  double radius_mm;
};

// Half-plane wall: points q with (q - point) . normal >= 0 are free space.
struct Wall {
  Eigen::Vector2d point_mm;
  Eigen::Vector2d normal;  // unit, into free space
};

struct Region {
  double xmin = 0, ymin = 0, xmax = 0, ymax = 0;
  double length() const { return xmax - xmin; }
  double width() const { return ymax - ymin; }
  bool contains(const Eigen::Vector2d& p) const {
    return p.x() >= xmin && p.x() <= xmax && p.y() >= ymin && p.y() <= ymax;
  }
};

enum class LatticeGeometry { square, hex };

struct Environment {
  std::string label;
  Region region;
  std::vector<Post> posts;
  std::vector<Wall> walls;
  double lattice_spacing_mm = 0;  // 0 when not a lattice

  // uniform-grid index over posts, built on demand
  void build_index(double cell_mm = 0) const;
  // posts whose circles may overlap the segment a-b inflated by `inflate`
  void query_segment(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double inflate,
                     std::vector<int>& out) const;

 private:
  mutable std::vector<std::vector<int>> cells_;
  mutable int nx_ = 0, ny_ = 0;
  mutable double cell_ = 0, ox_ = 0, oy_ = 0;
};

struct LatticeOptions {
  double region_length_bodylengths = 4.5;
  double region_width_bodylengths = 3.0;
  double snap_grid_mm = 0;  // > 0 snaps spacing to multiples (pegboard pitch)
};

Environment build_open(double body_length_mm, const LatticeOptions& opt = {});

// Regular lattice from the body-length-to-spacing ratio: d = L / density.
Environment build_lattice(double body_length_mm, double density_L_over_d,
                          LatticeGeometry geometry, double post_radius_mm,
                          const LatticeOptions& opt = {});

// Regular lattice from the wave geometry: d = wavelength / ratio.
Environment build_lattice_by_wavelength_ratio(double body_length_mm, double wavelength_mm,
                                              double wavelength_spacing_ratio,
                                              LatticeGeometry geometry, double post_radius_mm,
                                              const LatticeOptions& opt = {});

// Blue-noise random field: `count` posts with pairwise surface gap >= min_gap.
Environment build_random_field(std::uint64_t seed, int count, double min_gap_mm,
                               double post_radius_mm, const Region& region);

// Two parallel frictional walls `width` apart, running along +x.
Environment build_channel(double width_mm, double length_mm);

std::string serialize_environment(const Environment& env);
Environment parse_environment(const std::string& text);

}  // namespace undu
