#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "undusim/environment.hpp"
#include "undusim/kinematics.hpp"

// Overdamped planar mechanics of the cable-driven chain. Each step solves a
// force balance over the body coordinates subject to the moving feasible
// joint intervals; taut cables appear as bound constraints whose multipliers
// are reported back as tensions.

namespace undu {

struct MaterialParams {
  double link_length_mm = 107.5;
  double link_width_mm = 68.0;  // capsule diameter
  double link_mass_kg = 0.55;
  double gravity_mps2 = 9.81;
  double mu_parallel = 0.25;  // wheel rolling direction
  double drag_ratio = 1.6;    // lateral over rolling friction
  double skin_stiffness_nmm_per_deg = 1.0;
  double skin_damping_nmms_per_deg = 0.5;
  double obstacle_stiffness_n_per_mm = 5.0;
  double obstacle_friction = 0.1;
  double slip_velocity_mm_s = 0.5;     // friction direction smoothing scale
  double translational_damping = 1e-4;  // N s/mm per link, regularization

  double link_radius() const { return 0.5 * link_width_mm; }
  double link_weight_n() const { return link_mass_kg * gravity_mps2; }
};

struct SolverParams {
  double force_tol_n = 1e-6;
  int max_iterations = 80;
  int max_substep_splits = 3;
  double stick_velocity_mm_s = 1e-3;
  double penetration_warn_fraction = 0.2;
};

// Chain state. Joint angles are degrees at this boundary; the solver works
// in radians internally. qdot covers (x, y, heading, joints) in mm/s, rad/s.
struct BodyState {
  Eigen::Vector2d head_mm = Eigen::Vector2d::Zero();  // fore end of link 0
  double heading_rad = 0;                             // absolute angle of link 0
  Eigen::VectorXd joint_deg;                          // N relative angles, +ccw
  Eigen::VectorXd qdot;                               // size 3 + N
  double time_s = 0;

  int n_joints() const { return int(joint_deg.size()); }
  int n_links() const { return n_joints() + 1; }
};

BodyState make_straight_body(int n_joints, const Eigen::Vector2d& head, double heading_rad);
// Body in the pose implied by the given joint angles, head at `head`.
BodyState make_posed_body(const Eigen::VectorXd& joint_deg, const Eigen::Vector2d& head,
                          double heading_rad);

struct LinkPose {
  Eigen::Vector2d fore, aft, center;
  double theta;
};
std::vector<LinkPose> link_poses(const BodyState& s, const MaterialParams& m);
Eigen::Vector2d center_of_mass(const BodyState& s, const MaterialParams& m);
// Lateral extent (max - min over link surface points) of the posed body.
double body_envelope_width(const BodyState& s, const MaterialParams& m);

// Ground reaction of one wheel: speed-independent magnitude opposing the
// velocity direction, split into rolling and lateral components.
Eigen::Vector2d ground_friction_force(const Eigen::Vector2d& v_mm_s, double theta,
                                      const MaterialParams& m);

struct JointCommand {
  Eigen::VectorXd alpha_deg;  // suggested angles, one per joint
  double amplitude_deg = 46.0;
  double G = 0.0;
  double l0_mm_per_deg = 1.15;
  JointGeometry geometry;
};

struct CableState {
  double commanded_left_mm = 0, commanded_right_mm = 0;
  double tension_left_n = 0, tension_right_n = 0;
  AngleInterval interval{0, 0};
};

struct ContactSample {
  int link = -1;
  int obstacle = -1;  // post index, or -1 for walls
  int wall = -1;
  Eigen::Vector2d point_mm = Eigen::Vector2d::Zero();
  Eigen::Vector2d force_n = Eigen::Vector2d::Zero();  // on the link
  Eigen::Vector2d normal = Eigen::Vector2d::Zero();   // obstacle -> link
  double penetration_mm = 0;
};

struct PointLoad {
  int link = 0;
  double along_mm = 0;  // position along the link axis from its fore joint
  Eigen::Vector2d force_n = Eigen::Vector2d::Zero();
};

struct StepResult {
  std::vector<CableState> cables;
  std::vector<ContactSample> contacts;
  double friction_dissipation_nmm = 0;
  double skin_energy_nmm = 0;      // elastic energy at end of step
  double max_penetration_mm = 0;
  bool penetration_warning = false;
  bool converged = true;
  int newton_iterations = 0;
  int substeps = 1;
  double residual_n = 0;
  int sticking_links = 0;
};

// Advance the body by dt toward the command evaluated at the end of the
// step. fix_head pins link 0 (characterization setups). Throws nothing;
// check StepResult::converged.
StepResult step(BodyState& s, const JointCommand& cmd, const Environment& env,
                const MaterialParams& m, const SolverParams& sp, double dt,
                std::span<const PointLoad> loads = {}, bool fix_head = false);

}  // namespace undu
