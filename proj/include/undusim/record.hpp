#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "undusim/controller.hpp"
#include "undusim/mechanics.hpp"

// Time-sampled trajectory of one trial plus the episode/event bookkeeping
// the analysis stage consumes. Serializes to a columnar CSV with `# key
// value` metadata lines ahead of the header row.

namespace undu {

enum class EndState { exited, stuck, aborted };
const char* to_string(EndState e);

struct RunSample {
  double time_s = 0;
  double phase_cycles = 0;
  int reversing = 0;
  Eigen::Vector2d com = Eigen::Vector2d::Zero();
  Eigen::VectorXd link_x, link_y, link_theta;            // N+1
  Eigen::VectorXd zeta_deg, alpha_deg;                   // N
  Eigen::VectorXd cable_left, cable_right;               // commanded, mm
  Eigen::VectorXd tension_left, tension_right;           // N
  Eigen::VectorXi contact;                               // N+1 flags
};

// One contiguous head-obstacle engagement.
struct CollisionEpisode {
  double t_start = 0, t_end = 0;
  double peak_force_n = 0;
  double angle_at_peak_deg = 0;
  int obstacle = -1, wall = -1;
  bool triggered_reversal = false;
};

struct RunRecord {
  // run identity
  int n_joints = 0;
  double body_length_mm = 0, link_length_mm = 0, link_mass_kg = 0;
  double amplitude_deg = 0, xi = 0, omega_hz = 0, G = 0, l0 = 0;
  int direction_direct = 0;  // 0 retrograde, 1 direct
  std::string env_label;
  std::string control_mode;
  std::uint64_t seed = 0;
  int trial = 0;

  std::vector<RunSample> samples;
  std::vector<ReversalEvent> reversals;
  std::vector<CollisionEpisode> episodes;

  EndState end_state = EndState::aborted;
  std::string diagnostic;
  double duration_s = 0;
  double cycles_completed = 0;
  double com_path_mm = 0;
  Eigen::Vector2d com_start = Eigen::Vector2d::Zero(), com_end = Eigen::Vector2d::Zero();
  double cable_work_pos_nmm = 0;   // positive contraction work
  double cable_work_net_nmm = 0;   // signed convention
  double friction_dissipation_nmm = 0;
  double skin_energy_start_nmm = 0, skin_energy_end_nmm = 0;
  int thrust_contacts = 0, inhibitory_contacts = 0;
  bool penetration_warning = false;

  double period_s() const { return omega_hz > 0 ? 1.0 / omega_hz : 0.0; }
};

std::string run_record_to_csv(const RunRecord& r);
RunRecord run_record_from_csv(const std::string& text);

}  // namespace undu
