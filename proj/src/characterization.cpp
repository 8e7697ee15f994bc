#include "undusim/characterization.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace undu {

namespace {

void check_rig(const RigParams& rig) {
  if (!(rig.amplitude_deg > 0 && rig.amplitude_deg <= 90))
    throw std::invalid_argument("rig amplitude outside (0, 90] deg");
  if (!(rig.skin_stiffness_nmm_per_deg > 0)) throw std::invalid_argument("rig needs skin stiffness > 0");
  if (!(rig.lever_arm_mm > 0)) throw std::invalid_argument("rig lever arm must be > 0");
  if (!(rig.force_cap_n > 0)) throw std::invalid_argument("rig force cap must be > 0");
  if (!(rig.sweep_step_deg > 0)) throw std::invalid_argument("rig sweep step must be > 0");
}

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

}  // namespace

double ForceDeflectionCurve::deflection_at(double force_n) const {
  if (samples.empty()) return 0;
  if (force_n <= samples.front().force_n) return std::abs(samples.front().zeta_deg - alpha_deg);
  for (size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].force_n >= force_n) {
      const double f0 = samples[i - 1].force_n, f1 = samples[i].force_n;
      const double z0 = samples[i - 1].zeta_deg, z1 = samples[i].zeta_deg;
      const double w = f1 > f0 ? (force_n - f0) / (f1 - f0) : 1.0;
      return std::abs(z0 + w * (z1 - z0) - alpha_deg);
    }
  }
  return std::abs(samples.back().zeta_deg - alpha_deg);
}

ForceDeflectionCurve force_deflection_curve(double alpha_deg, double G, SweepDirection direction,
                                            const RigParams& rig) {
  check_rig(rig);
  ForceDeflectionCurve c;
  c.alpha_deg = alpha_deg;
  c.G = G;
  c.direction = direction;
  c.interval =
      feasible_angle_interval(alpha_deg, rig.amplitude_deg, G, rig.l0_mm_per_deg, rig.geometry);

  const double s = direction == SweepDirection::ccw ? 1.0 : -1.0;
  const double ks = rig.skin_stiffness_nmm_per_deg;
  const double bound = s > 0 ? c.interval.hi_deg : c.interval.lo_deg;
  const double zeta_cap = alpha_deg + s * rig.force_cap_n * rig.lever_arm_mm / ks;
  const double ramp_end = s > 0 ? std::min(bound, zeta_cap) : std::max(bound, zeta_cap);

  const double span = (ramp_end - alpha_deg) * s;  // >= 0
  const long nsteps = long(span / rig.sweep_step_deg);
  c.samples.reserve(size_t(nsteps) + 3);
  for (long k = 0; k <= nsteps; ++k) {
    const double dz = double(k) * rig.sweep_step_deg;
    c.samples.push_back({ks * dz / rig.lever_arm_mm, alpha_deg + s * dz});
  }
  if (c.samples.empty() || std::abs(c.samples.back().zeta_deg - ramp_end) > 1e-12)
    c.samples.push_back({ks * span / rig.lever_arm_mm, ramp_end});

  if ((ramp_end - zeta_cap) * s >= 0) {
    c.stop = SweepStop::force_cap;  // the ramp alone reaches the cap
  } else {
    c.samples.push_back({rig.force_cap_n, bound});  // rigid stop: force jump
    c.stop = std::abs(bound) >= 90.0 - 1e-9 ? SweepStop::mechanical_stop : SweepStop::cable_limit;
  }
  c.terminal_zeta_deg = c.samples.back().zeta_deg;
  return c;
}

ForceDeformationMap force_deformation_map(double G, const RigParams& rig, double alpha_step_deg,
                                          double force_step_n) {
  check_rig(rig);
  if (!(alpha_step_deg > 0) || !(force_step_n > 0))
    throw std::invalid_argument("map grid steps must be > 0");

  const long na = long(rig.amplitude_deg / alpha_step_deg + 1e-9);
  const long nf = long(rig.force_cap_n / force_step_n + 1e-9);
  ForceDeformationMap map;
  map.G = G;
  map.alpha_deg.resize(2 * na + 1);
  for (long a = -na; a <= na; ++a) map.alpha_deg[a + na] = double(a) * alpha_step_deg;
  map.force_n.resize(2 * nf + 1);
  for (long f = -nf; f <= nf; ++f) map.force_n[f + nf] = double(f) * force_step_n;
  map.deflection_deg.setZero(map.force_n.size(), map.alpha_deg.size());

  for (long a = 0; a < map.alpha_deg.size(); ++a) {
    const double alpha = map.alpha_deg[a];
    const ForceDeflectionCurve ccw = force_deflection_curve(alpha, G, SweepDirection::ccw, rig);
    const ForceDeflectionCurve cw = force_deflection_curve(alpha, G, SweepDirection::cw, rig);
    for (long f = 0; f < map.force_n.size(); ++f) {
      const double force = map.force_n[f];
      if (force > 0) map.deflection_deg(f, a) = ccw.deflection_at(force);
      else if (force < 0) map.deflection_deg(f, a) = -cw.deflection_at(-force);
    }
  }
  return map;
}

std::string map_to_csv(const ForceDeformationMap& map) {
  std::ostringstream os;
  os << "# undusim force-deformation map v1\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", map.G);
  os << "# G " << buf << "\n";
  os << "force_n";
  for (long a = 0; a < map.alpha_deg.size(); ++a) {
    std::snprintf(buf, sizeof buf, "%.10g", map.alpha_deg[a]);
    os << ',' << buf;
  }
  os << '\n';
  for (long f = 0; f < map.force_n.size(); ++f) {
    std::snprintf(buf, sizeof buf, "%.10g", map.force_n[f]);
    os << buf;
    for (long a = 0; a < map.alpha_deg.size(); ++a) {
      std::snprintf(buf, sizeof buf, "%.10g", map.deflection_deg(f, a));
      os << ',' << buf;
    }
    os << '\n';
  }
  return os.str();
}

std::vector<JointAxes> easy_hard_axes(const Eigen::VectorXd& posture_deg, double amplitude_deg,
                                      double G, double probe_n, const Eigen::Vector2d& motion_dir,
                                      const RigParams& rig, const MaterialParams& m) {
  check_rig(rig);
  if (!(probe_n > 0)) throw std::invalid_argument("probe force must be > 0");
  if (posture_deg.size() < 1) throw std::invalid_argument("posture needs at least one joint");
  if (!(motion_dir.norm() > 0)) throw std::invalid_argument("motion direction must be nonzero");

  const Eigen::Vector2d v = motion_dir.normalized();
  const BodyState body = make_posed_body(posture_deg, Eigen::Vector2d::Zero(), 0.0);
  const std::vector<LinkPose> poses = link_poses(body, m);
  const double ks = rig.skin_stiffness_nmm_per_deg;

  std::vector<JointAxes> out;
  out.reserve(size_t(posture_deg.size()));
  for (int j = 0; j < posture_deg.size(); ++j) {
    const double alpha = posture_deg[j];
    const AngleInterval iv =
        feasible_angle_interval(alpha, amplitude_deg, G, rig.l0_mm_per_deg, rig.geometry);
    const Eigen::Vector2d d = (poses[size_t(j) + 1].aft - poses[size_t(j) + 1].fore).normalized();

    double defl[2];  // probe along +v, then -v
    for (int k = 0; k < 2; ++k) {
      const double sgn = k == 0 ? 1.0 : -1.0;
      const double torque = rig.lever_arm_mm * probe_n * sgn * cross2(d, v);
      const double zeta = std::clamp(alpha + torque / ks, iv.lo_deg, iv.hi_deg);
      defl[k] = std::abs(zeta - alpha);
    }

    JointAxes ax;
    ax.joint = j;
    ax.easy_deflection_deg = std::max(defl[0], defl[1]);
    ax.hard_deflection_deg = std::min(defl[0], defl[1]);
    if (std::abs(defl[0] - defl[1]) < 1e-12) {
      ax.easy_sign = 0;
    } else {
      const double sgn = defl[0] > defl[1] ? 1.0 : -1.0;           // winning probe direction
      const double torque = rig.lever_arm_mm * probe_n * sgn * cross2(d, v);
      ax.easy_sign = torque >= 0 ? 1.0 : -1.0;                     // as a joint rotation
    }
    out.push_back(ax);
  }
  return out;
}

}  // namespace undu
