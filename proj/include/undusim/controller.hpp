#pragma once

#include <array>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "undusim/mechanics.hpp"

// Gait executive. Open loop advances the wave phase at the commanded rate;
// closed loop additionally watches the head force sensors and plays the
// wave backwards for a fixed fraction of a cycle when a bin's force
// threshold is crossed.

namespace undu {

// Incidence of a head contact: 90 deg means dead ahead (centerline normal
// to the obstacle tangent), below/above 90 resolves which side of the nose
// took the hit. Clamped to [0, 180].
double collision_angle_deg(double head_theta_rad, const Eigen::Vector2d& obstacle_normal);

// Five force-sensor sectors, 65..115 deg in 10 deg bands. Returns 0..4, or
// -1 outside the sensed range.
int fsr_bin(double collision_angle_deg);

struct ReversalPolicy {
  // per-bin trigger forces; outer sectors never trigger
  std::array<double, 5> thresholds_n{std::numeric_limits<double>::infinity(), 5.0, 3.0, 5.0,
                                     std::numeric_limits<double>::infinity()};
  double reversal_duration_cycles = 0.125;
};

struct HeadReading {
  double angle_deg = 0;
  double force_n = 0;  // normal component
  int bin = -1;
  int obstacle = -1;
  int wall = -1;
};

// Strongest frontal head contact this step, if any.
std::optional<HeadReading> sense_head_collision(const BodyState& s,
                                                const std::vector<ContactSample>& contacts);

struct ReversalEvent {
  double time_s = 0;
  double angle_deg = 0;
  double force_n = 0;
  int bin = -1;
  int obstacle = -1;
  int wall = -1;
};

enum class ControlMode { open_loop, closed_loop };

class GaitController {
 public:
  GaitController(const Gait& gait, ControlMode mode, const ReversalPolicy& policy = {})
      : gait_(gait), mode_(mode), policy_(policy) {}

  // Advance by dt using last step's head reading; returns the wave phase in
  // cycles to command at the end of the interval. Phase is continuous and
  // piecewise linear: slope +omega forward, -omega while reversing.
  double advance(double dt, const std::optional<HeadReading>& reading);

  double phase_cycles() const { return phase_; }
  bool reversing() const { return reversing_; }
  const std::vector<ReversalEvent>& events() const { return events_; }
  const Gait& gait() const { return gait_; }

 private:
  Gait gait_;
  ControlMode mode_;
  ReversalPolicy policy_;
  double phase_ = 0;
  double time_ = 0;
  bool reversing_ = false;
  double reverse_until_ = 0;     // time when the current reversal ends
  double refractory_until_ = 0;  // no new trigger before this time
  std::vector<ReversalEvent> events_;
};

}  // namespace undu
