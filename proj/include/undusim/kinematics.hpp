#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

// Joint kinematics of a bilaterally cable-driven hinge and the serpenoid
// gait template. Angles cross the API in degrees, lengths in mm.

namespace undu {

constexpr double kPi = 3.14159265358979323846;

template <class Scalar> constexpr Scalar deg2rad(Scalar d) { return d * Scalar(kPi / 180.0); }
template <class Scalar> constexpr Scalar rad2deg(Scalar r) { return r * Scalar(180.0 / kPi); }

// Anchor offsets of the cable guides on either side of the hinge, mm.
// Chord 2*sqrt(L1^2+L2^2) = 79.196 mm, guide angle atan(L1/L2) = 45 deg.
struct JointGeometry {
  double l1_mm = 28.0;
  double l2_mm = 28.0;
  double chord() const { return 2.0 * std::sqrt(l1_mm * l1_mm + l2_mm * l2_mm); }
  double guide_angle_rad() const { return std::atan2(l1_mm, l2_mm); }
};

namespace detail {
inline void check_joint_angle(double alpha_deg) {
  if (!(alpha_deg >= -90.0 - 1e-9 && alpha_deg <= 90.0 + 1e-9))
    throw std::domain_error("joint angle outside [-90, 90] deg");
}
}  // namespace detail

// Taut length of the left cable across a joint bent to alpha. Strictly
// increasing in alpha: bending right (alpha > 0) pays out the left side.
template <class Scalar>
Scalar exact_cable_length_left(Scalar alpha_deg, const JointGeometry& g = {}) {
  detail::check_joint_angle(static_cast<double>(alpha_deg));
  return Scalar(g.chord()) * std::cos(-deg2rad(alpha_deg) / Scalar(2) + Scalar(g.guide_angle_rad()));
}

template <class Scalar>
Scalar exact_cable_length_right(Scalar alpha_deg, const JointGeometry& g = {}) {
  detail::check_joint_angle(static_cast<double>(alpha_deg));
  return Scalar(g.chord()) * std::cos(deg2rad(alpha_deg) / Scalar(2) + Scalar(g.guide_angle_rad()));
}

// Closed-form inverses, clamped to the +/-90 deg mechanical stops.
template <class Scalar>
Scalar cable_length_to_angle_left(Scalar length_mm, const JointGeometry& g = {}) {
  const Scalar c = Scalar(g.chord());
  const Scalar r = std::clamp(length_mm / c, Scalar(-1), Scalar(1));
  const Scalar a = rad2deg(Scalar(2) * (Scalar(g.guide_angle_rad()) - std::acos(r)));
  return std::clamp(a, Scalar(-90), Scalar(90));
}

template <class Scalar>
Scalar cable_length_to_angle_right(Scalar length_mm, const JointGeometry& g = {}) {
  const Scalar c = Scalar(g.chord());
  const Scalar r = std::clamp(length_mm / c, Scalar(-1), Scalar(1));
  const Scalar a = rad2deg(Scalar(2) * (std::acos(r) - Scalar(g.guide_angle_rad())));
  return std::clamp(a, Scalar(-90), Scalar(90));
}

// d(length)/d(angle) in mm/rad; left arm is positive, right negative.
template <class Scalar>
Scalar cable_moment_arm_left(Scalar alpha_deg, const JointGeometry& g = {}) {
  return Scalar(g.chord()) / Scalar(2) *
         std::sin(-deg2rad(alpha_deg) / Scalar(2) + Scalar(g.guide_angle_rad()));
}

template <class Scalar>
Scalar cable_moment_arm_right(Scalar alpha_deg, const JointGeometry& g = {}) {
  return -Scalar(g.chord()) / Scalar(2) *
         std::sin(deg2rad(alpha_deg) / Scalar(2) + Scalar(g.guide_angle_rad()));
}

// Generalized-compliance cable command. G = 0 keeps both cables at the
// exact taut length (rigid tracking); larger G pays out slack on the side
// the wave is not pressing, l0 mm per degree of granted deviation. The
// piecewise form is kept literal for all G >= 0, including G < 0.5 where
// the relax condition only engages near the wave crests.
struct CableCommand {
  double left_mm;
  double right_mm;
};

template <class Scalar>
CableCommand commanded_cable_lengths(Scalar alpha_deg, Scalar amplitude_deg, Scalar G,
                                     Scalar l0_mm_per_deg, const JointGeometry& geo = {}) {
  if (!(amplitude_deg > Scalar(0) && amplitude_deg <= Scalar(90)))
    throw std::domain_error("amplitude outside (0, 90] deg");
  if (!(G >= Scalar(0))) throw std::domain_error("compliance G must be >= 0");
  if (!(l0_mm_per_deg > Scalar(0))) throw std::domain_error("l0 must be > 0");
  if (!(std::abs(alpha_deg) <= amplitude_deg + Scalar(1e-9)))
    throw std::domain_error("suggested angle outside [-A, A]");

  const Scalar t = (Scalar(2) * G - Scalar(1)) * amplitude_deg;
  const Scalar pin = amplitude_deg * std::min(Scalar(1), Scalar(2) * G - Scalar(1));

  CableCommand c;
  if (alpha_deg <= -t)
    c.left_mm = static_cast<double>(exact_cable_length_left(alpha_deg, geo));
  else
    c.left_mm = static_cast<double>(exact_cable_length_left(-pin, geo) + l0_mm_per_deg * (t + alpha_deg));
  if (alpha_deg >= t)
    c.right_mm = static_cast<double>(exact_cable_length_right(alpha_deg, geo));
  else
    c.right_mm = static_cast<double>(exact_cable_length_right(pin, geo) + l0_mm_per_deg * (t - alpha_deg));
  return c;
}

// Range of joint angles the commanded cable pair admits. The left cable
// caps the upper end, the right cable the lower end; both clamp at the
// +/-90 deg stops. G = 0 degenerates to {alpha}.
struct AngleInterval {
  double lo_deg;
  double hi_deg;
  double width() const { return hi_deg - lo_deg; }
  bool contains(double a, double tol = 1e-9) const { return a >= lo_deg - tol && a <= hi_deg + tol; }
};

template <class Scalar>
AngleInterval feasible_angle_interval(Scalar alpha_deg, Scalar amplitude_deg, Scalar G,
                                      Scalar l0_mm_per_deg, const JointGeometry& geo = {}) {
  const CableCommand c = commanded_cable_lengths(alpha_deg, amplitude_deg, G, l0_mm_per_deg, geo);
  AngleInterval iv;
  iv.hi_deg = cable_length_to_angle_left(Scalar(c.left_mm), geo);
  iv.lo_deg = cable_length_to_angle_right(Scalar(c.right_mm), geo);
  if (iv.lo_deg > iv.hi_deg) {  // numerical guard; the pair is consistent by construction
    const double mid = 0.5 * (iv.lo_deg + iv.hi_deg);
    iv.lo_deg = iv.hi_deg = mid;
  }
  return iv;
}

// Motor pulley map: position counts per commanded cable length.
// gamma = -360 / (pi * pulley_diameter * degrees_per_count) = -86.8 /mm.
template <class Scalar>
Scalar motor_position(Scalar zero_counts, Scalar gamma_per_mm, Scalar length_mm) {
  return zero_counts + gamma_per_mm * length_mm;
}

enum class WaveDirection { retrograde, direct };

// Serpenoid gait template evaluated at a wave phase given in cycles.
// Joint i of N sits at spatial station i/N, i = 1..N. A retrograde wave
// (phase term subtracted) travels head to tail.
struct Gait {
  double amplitude_deg = 46.0;
  double spatial_frequency = 0.81;  // xi, wavelengths per body length
  double temporal_frequency_hz = 0.25;
  int n_joints = 7;
  WaveDirection direction = WaveDirection::retrograde;
};

inline double suggested_angle(const Gait& g, int joint_index_1based, double phase_cycles) {
  const double sgn = g.direction == WaveDirection::retrograde ? -1.0 : 1.0;
  const double arg = 2.0 * kPi * (g.spatial_frequency * joint_index_1based / g.n_joints) +
                     sgn * 2.0 * kPi * phase_cycles;
  return g.amplitude_deg * std::sin(arg);
}

inline Eigen::VectorXd suggested_angles(const Gait& g, double phase_cycles) {
  if (g.n_joints < 1) throw std::invalid_argument("gait needs at least one joint");
  Eigen::VectorXd a(g.n_joints);
  for (int i = 0; i < g.n_joints; ++i) a[i] = suggested_angle(g, i + 1, phase_cycles);
  return a;
}

}  // namespace undu
