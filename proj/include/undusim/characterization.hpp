#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "undusim/kinematics.hpp"
#include "undusim/mechanics.hpp"

// Virtual force-deformation rig: one joint is commanded to a posture and a
// point pusher rotates it quasi-statically while the fore link is clamped.
// Inside the feasible interval the only resistance is the elastic skin,
// tared about the commanded posture (the load cell reads zero at the sweep
// start); a taut cable or the mechanical stop ends the sweep with a jump to
// the force cap.

namespace undu {

struct RigParams {
  double amplitude_deg = 75.0;  // gait amplitude behind the cable policy
  double l0_mm_per_deg = 1.15;
  JointGeometry geometry;
  double skin_stiffness_nmm_per_deg = 1.0;
  double lever_arm_mm = 60.0;
  double force_cap_n = 6.0;
  double sweep_step_deg = 0.1;
};

enum class SweepDirection { cw, ccw };  // cw drives zeta down, ccw up

enum class SweepStop { force_cap, cable_limit, mechanical_stop };

struct ForceDeflectionSample {
  double force_n;
  double zeta_deg;
};

struct ForceDeflectionCurve {
  double alpha_deg = 0;
  double G = 0;
  SweepDirection direction = SweepDirection::ccw;
  AngleInterval interval{0, 0};
  std::vector<ForceDeflectionSample> samples;  // force monotone non-decreasing
  SweepStop stop = SweepStop::force_cap;
  double terminal_zeta_deg = 0;

  // |zeta - alpha| where the curve first reaches force_n (linear
  // interpolation); terminal deflection if it never does.
  double deflection_at(double force_n) const;
};

ForceDeflectionCurve force_deflection_curve(double alpha_deg, double G, SweepDirection direction,
                                            const RigParams& rig = {});

// Signed deflection over (suggested angle, signed force): positive forces
// from the ccw sweep, negative from cw.
struct ForceDeformationMap {
  double G = 0;
  Eigen::VectorXd alpha_deg;       // columns
  Eigen::VectorXd force_n;         // rows, signed
  Eigen::MatrixXd deflection_deg;  // zeta - alpha, signed
};

ForceDeformationMap force_deformation_map(double G, const RigParams& rig = {},
                                          double alpha_step_deg = 15.0,
                                          double force_step_n = 0.25);

std::string map_to_csv(const ForceDeformationMap& map);

// Directional compliance of each joint of a posture: the probe pushes the
// joint's aft link along +/- the motion direction and the closed-form rig
// predicts the emergent deflection.
struct JointAxes {
  int joint = 0;
  double easy_sign = 0;  // +1 ccw easier, -1 cw easier, 0 symmetric
  double easy_deflection_deg = 0;
  double hard_deflection_deg = 0;
};

std::vector<JointAxes> easy_hard_axes(const Eigen::VectorXd& posture_deg, double amplitude_deg,
                                      double G, double probe_n,
                                      const Eigen::Vector2d& motion_dir,
                                      const RigParams& rig = {}, const MaterialParams& m = {});

}  // namespace undu
