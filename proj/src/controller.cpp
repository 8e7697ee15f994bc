#include "undusim/controller.hpp"

#include <algorithm>
#include <cmath>

namespace undu {

double collision_angle_deg(double head_theta, const Eigen::Vector2d& n) {
  // forward = direction of travel = opposite the head link axis
  const Eigen::Vector2d fwd(-std::cos(head_theta), -std::sin(head_theta));
  const Eigen::Vector2d into = -n;  // head into the obstacle surface
  const double bearing = std::atan2(fwd.x() * into.y() - fwd.y() * into.x(), fwd.dot(into));
  return std::clamp(90.0 + rad2deg(bearing), 0.0, 180.0);
}

int fsr_bin(double angle_deg) {
  if (angle_deg < 65.0 || angle_deg > 115.0) return -1;
  return std::min(4, int((angle_deg - 65.0) / 10.0));
}

std::optional<HeadReading> sense_head_collision(const BodyState& s,
                                                const std::vector<ContactSample>& contacts) {
  std::optional<HeadReading> best;
  for (const ContactSample& c : contacts) {
    if (c.link != 0) continue;
    const double fn = c.force_n.dot(c.normal);
    if (fn <= 0) continue;
    if (!best || fn > best->force_n) {
      HeadReading r;
      r.angle_deg = collision_angle_deg(s.heading_rad, c.normal);
      r.force_n = fn;
      r.bin = fsr_bin(r.angle_deg);
      r.obstacle = c.obstacle;
      r.wall = c.wall;
      best = r;
    }
  }
  return best;
}

double GaitController::advance(double dt, const std::optional<HeadReading>& reading) {
  const double omega = gait_.temporal_frequency_hz;
  const double rev_time = policy_.reversal_duration_cycles / omega;

  // tolerant clock comparison: accumulated dt sums land within float noise
  // of the nominal expiry
  if (mode_ == ControlMode::closed_loop && !reversing_ && time_ >= refractory_until_ - 1e-9 &&
      reading &&
      reading->bin >= 0 && reading->force_n >= policy_.thresholds_n[size_t(reading->bin)]) {
    reversing_ = true;
    reverse_until_ = time_ + rev_time;
    ReversalEvent ev;
    ev.time_s = time_;
    ev.angle_deg = reading->angle_deg;
    ev.force_n = reading->force_n;
    ev.bin = reading->bin;
    ev.obstacle = reading->obstacle;
    ev.wall = reading->wall;
    events_.push_back(ev);
  }

  double remaining = dt;
  while (remaining > 1e-15) {
    if (reversing_) {
      const double seg = std::min(remaining, reverse_until_ - time_);
      phase_ -= omega * seg;
      time_ += seg;
      remaining -= seg;
      if (time_ >= reverse_until_ - 1e-15) {
        reversing_ = false;
        refractory_until_ = time_ + rev_time;
      }
    } else {
      phase_ += omega * remaining;
      time_ += remaining;
      remaining = 0;
    }
  }
  return phase_;
}

}  // namespace undu
