#include "undusim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace undu {

double total_length_mm(const MaterialParams& m, int n_joints) {
  return (n_joints + 1) * m.link_length_mm;
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

bool pose_overlaps(const BodyState& s, const MaterialParams& m, const Environment& env) {
  const std::vector<LinkPose> lp = link_poses(s, m);
  const double rl = m.link_radius();
  std::vector<int> near;
  for (const LinkPose& l : lp) {
    env.query_segment(l.fore, l.aft, rl, near);
    for (int pi : near) {
      const Post& p = env.posts[pi];
      const Eigen::Vector2d ab = l.aft - l.fore;
      const double t = std::clamp((p.center_mm - l.fore).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
      if ((l.fore + t * ab - p.center_mm).norm() < p.radius_mm + rl) return true;
    }
  }
  return false;
}

std::string fmt_time(double t) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3f", t);
  return b;
}

}  // namespace

BodyState spawn_body(const TrialSetup& setup, const Environment& env) {
  const Gait& gait = setup.gait;
  std::mt19937_64 rng(setup.seed * 0x9e3779b97f4a7c15ull ^ fnv1a(env.label) ^
                      (std::uint64_t(std::uint32_t(setup.trial)) << 32));
  std::uniform_real_distribution<double> u11(-1.0, 1.0);

  const double heading =
      kPi + deg2rad(setup.spawn_heading_jitter_deg) * u11(rng);
  double yjit = setup.spawn_y_jitter_mm;
  if (yjit < 0)
    yjit = env.lattice_spacing_mm > 0 ? 0.5 * env.lattice_spacing_mm : 0.15 * env.region.width();
  if (!env.walls.empty()) yjit = 0;  // channels: stay on the centerline
  double y0 = setup.spawn_y_mm + yjit * u11(rng);
  const double half_w = 0.5 * env.region.width();
  y0 = std::clamp(y0, env.region.ymin + 0.25 * half_w, env.region.ymax - 0.25 * half_w);

  const double head_x = env.region.xmin - setup.material.link_radius() - 2.0;
  const Eigen::VectorXd joints = suggested_angles(gait, 0.0);

  BodyState body = make_posed_body(joints, {head_x, y0}, heading);
  // posts cannot sit ahead of the field edge, so overlap at spawn is rare;
  // nudge sideways, then backward, if a stray geometry still intersects
  for (int back = 0; back < 4 && pose_overlaps(body, setup.material, env); ++back) {
    for (int k = 1; k <= 12; ++k) {
      const double dy = (k % 2 ? 1.0 : -1.0) * 5.0 * ((k + 1) / 2);
      body = make_posed_body(joints, {head_x - back * 0.5 * setup.material.link_length_mm, y0 + dy},
                             heading);
      if (!pose_overlaps(body, setup.material, env)) return body;
    }
  }
  return body;
}

RunRecord run_trial(const TrialSetup& setup, const Environment& env) {
  const Gait& gait = setup.gait;
  const int n = gait.n_joints;
  if (n < 1) throw std::invalid_argument("trial needs at least one joint");
  if (!(gait.temporal_frequency_hz > 0)) throw std::invalid_argument("wave frequency must be > 0");
  if (setup.steps_per_cycle < 8) throw std::invalid_argument("steps_per_cycle must be >= 8");
  if (setup.samples_per_cycle < 1) throw std::invalid_argument("samples_per_cycle must be >= 1");
  if (!(setup.max_cycles > 0)) throw std::invalid_argument("max_cycles must be > 0");

  const MaterialParams& m = setup.material;
  const double L = total_length_mm(m, n);
  const double period = 1.0 / gait.temporal_frequency_hz;
  const double dt = period / setup.steps_per_cycle;

  RunRecord rec;
  rec.n_joints = n;
  rec.body_length_mm = L;
  rec.link_length_mm = m.link_length_mm;
  rec.link_mass_kg = m.link_mass_kg;
  rec.amplitude_deg = gait.amplitude_deg;
  rec.xi = gait.spatial_frequency;
  rec.omega_hz = gait.temporal_frequency_hz;
  rec.G = setup.G;
  rec.l0 = setup.l0_mm_per_deg;
  rec.direction_direct = gait.direction == WaveDirection::direct ? 1 : 0;
  rec.env_label = env.label;
  rec.control_mode = setup.control == ControlMode::closed_loop ? "closed_loop" : "open_loop";
  rec.seed = setup.seed;
  rec.trial = setup.trial;

  BodyState body = spawn_body(setup, env);
  GaitController ctrl(gait, setup.control, setup.policy);

  JointCommand cmd;
  cmd.amplitude_deg = gait.amplitude_deg;
  cmd.G = setup.G;
  cmd.l0_mm_per_deg = setup.l0_mm_per_deg;
  cmd.geometry = setup.geometry;
  cmd.alpha_deg = suggested_angles(gait, 0.0);

  const double ks_rad = m.skin_stiffness_nmm_per_deg * (180.0 / kPi);
  auto skin_energy = [&](const BodyState& b) {
    double e = 0;
    for (int j = 0; j < n; ++j) e += 0.5 * ks_rad * std::pow(deg2rad(b.joint_deg[j]), 2);
    return e;
  };
  rec.skin_energy_start_nmm = skin_energy(body);
  rec.skin_energy_end_nmm = rec.skin_energy_start_nmm;

  std::vector<CableCommand> cc_prev(n), cc_now(n);
  for (int j = 0; j < n; ++j)
    cc_prev[j] = commanded_cable_lengths(cmd.alpha_deg[j], cmd.amplitude_deg, cmd.G,
                                         cmd.l0_mm_per_deg, cmd.geometry);

  Eigen::Vector2d com = center_of_mass(body, m);
  rec.com_start = com;

  StepResult last;
  auto take_sample = [&](double phase) {
    RunSample smp;
    smp.time_s = body.time_s;
    smp.phase_cycles = phase;
    smp.reversing = ctrl.reversing() ? 1 : 0;
    smp.com = com;
    const std::vector<LinkPose> lp = link_poses(body, m);
    smp.link_x.resize(n + 1);
    smp.link_y.resize(n + 1);
    smp.link_theta.resize(n + 1);
    for (int k = 0; k <= n; ++k) {
      smp.link_x[k] = lp[k].fore.x();
      smp.link_y[k] = lp[k].fore.y();
      smp.link_theta[k] = lp[k].theta;
    }
    smp.zeta_deg = body.joint_deg;
    smp.alpha_deg = cmd.alpha_deg;
    smp.cable_left.resize(n);
    smp.cable_right.resize(n);
    smp.tension_left = Eigen::VectorXd::Zero(n);
    smp.tension_right = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) {
      smp.cable_left[j] = cc_prev[j].left_mm;
      smp.cable_right[j] = cc_prev[j].right_mm;
      if (int(last.cables.size()) == n) {
        smp.tension_left[j] = last.cables[j].tension_left_n;
        smp.tension_right[j] = last.cables[j].tension_right_n;
      }
    }
    smp.contact = Eigen::VectorXi::Zero(n + 1);
    for (const ContactSample& c : last.contacts)
      if (c.link >= 0 && c.link <= n) smp.contact[c.link] = 1;
    rec.samples.push_back(std::move(smp));
  };
  take_sample(0.0);

  const double sample_dt = period / setup.samples_per_cycle;
  double next_sample = sample_dt;

  std::vector<Eigen::Vector2d> cycle_com{com};
  const int stuck_cycles = std::max(1, int(std::llround(setup.stuck_window_cycles)));

  struct OpenEpisode {
    CollisionEpisode ep;
    int quiet_steps = 0;
  };
  std::vector<OpenEpisode> open_eps;
  const int episode_gap_steps = std::max(1, setup.steps_per_cycle / 16);

  Eigen::Vector2d ema_v = Eigen::Vector2d::Zero();
  const double ema_beta = std::exp(-dt / (0.5 * period));

  int overload_steps = 0;
  const int overload_limit =
      std::max(1, int(std::llround(setup.overload_window_cycles * setup.steps_per_cycle)));
  bool entered = env.region.contains(com);
  EndState end = EndState::aborted;
  std::string diag = "cycle budget exhausted";

  std::optional<HeadReading> reading;
  const long max_steps = std::llround(setup.max_cycles * setup.steps_per_cycle);
  bool terminated = false;
  double phase_prev = 0.0;

  for (long step_i = 0; step_i < max_steps && !terminated; ++step_i) {
    const double phase = ctrl.advance(dt, reading);
    // command at the phase midpoint of the step: pairs with the centered
    // velocity estimate (u - u_prev)/dt to keep the stepping second order
    cmd.alpha_deg = suggested_angles(gait, 0.5 * (phase_prev + phase));
    phase_prev = phase;
    for (int j = 0; j < n; ++j)
      cc_now[j] = commanded_cable_lengths(cmd.alpha_deg[j], cmd.amplitude_deg, cmd.G,
                                          cmd.l0_mm_per_deg, cmd.geometry);

    last = step(body, cmd, env, m, setup.solver, dt);
    if (!last.converged) {
      end = EndState::aborted;
      diag = "force balance failed at t=" + fmt_time(body.time_s + dt) + " s";
      break;
    }

    for (int j = 0; j < n; ++j) {
      const double dl = cc_prev[j].left_mm - cc_now[j].left_mm;  // > 0 reels in
      const double dr = cc_prev[j].right_mm - cc_now[j].right_mm;
      const double tl = last.cables[j].tension_left_n;
      const double tr = last.cables[j].tension_right_n;
      rec.cable_work_pos_nmm += tl * std::max(0.0, dl) + tr * std::max(0.0, dr);
      rec.cable_work_net_nmm += tl * dl + tr * dr;
    }
    cc_prev = cc_now;

    rec.friction_dissipation_nmm += last.friction_dissipation_nmm;
    rec.penetration_warning = rec.penetration_warning || last.penetration_warning;
    rec.skin_energy_end_nmm = last.skin_energy_nmm;

    const Eigen::Vector2d com_new = center_of_mass(body, m);
    rec.com_path_mm += (com_new - com).norm();
    ema_v = ema_beta * ema_v + (1.0 - ema_beta) * ((com_new - com) / dt);
    com = com_new;

    if (ema_v.norm() > 1e-6) {
      const Eigen::Vector2d vhat = ema_v.normalized();
      for (const ContactSample& c : last.contacts) {
        const double along = c.force_n.dot(vhat);
        if (along > 1e-9)
          ++rec.thrust_contacts;
        else if (along < -1e-9)
          ++rec.inhibitory_contacts;
      }
    }

    reading = sense_head_collision(body, last.contacts);

    // head engagement episodes, grouped per obstacle with a short grace gap
    for (OpenEpisode& oe : open_eps) ++oe.quiet_steps;
    if (reading) {
      OpenEpisode* match = nullptr;
      for (OpenEpisode& oe : open_eps)
        if (oe.ep.obstacle == reading->obstacle && oe.ep.wall == reading->wall) {
          match = &oe;
          break;
        }
      if (!match) {
        OpenEpisode oe;
        oe.ep.t_start = body.time_s;
        oe.ep.obstacle = reading->obstacle;
        oe.ep.wall = reading->wall;
        open_eps.push_back(oe);
        match = &open_eps.back();
      }
      match->quiet_steps = 0;
      match->ep.t_end = body.time_s;
      if (reading->force_n >= match->ep.peak_force_n) {
        match->ep.peak_force_n = reading->force_n;
        match->ep.angle_at_peak_deg = reading->angle_deg;
      }
    }
    for (size_t i = 0; i < open_eps.size();) {
      if (open_eps[i].quiet_steps > episode_gap_steps) {
        rec.episodes.push_back(open_eps[i].ep);
        open_eps.erase(open_eps.begin() + long(i));
      } else {
        ++i;
      }
    }

    double fmax = 0;
    for (const ContactSample& c : last.contacts) fmax = std::max(fmax, c.force_n.norm());
    overload_steps = fmax > setup.overload_force_n ? overload_steps + 1 : 0;
    if (overload_steps >= overload_limit) {
      end = EndState::aborted;
      diag = "sustained contact overload";
      terminated = true;
    }

    if (body.time_s >= next_sample - 0.5 * dt) {
      take_sample(phase);
      next_sample += sample_dt;
    }

    if ((step_i + 1) % setup.steps_per_cycle == 0) {
      cycle_com.push_back(com);
      if (int(cycle_com.size()) > stuck_cycles) {
        const Eigen::Vector2d& past = cycle_com[cycle_com.size() - 1 - size_t(stuck_cycles)];
        if ((com - past).norm() < setup.stuck_fraction * L) {
          end = EndState::stuck;
          diag = "no progress over " + std::to_string(stuck_cycles) + " cycles";
          terminated = true;
        }
      }
    }

    if (!entered) {
      entered = env.region.contains(com);
    } else if (!env.region.contains(com)) {
      end = EndState::exited;
      diag = com.x() >= env.region.xmax ? "crossed the far edge" : "left the field sideways";
      terminated = true;
    }
  }

  if (rec.samples.empty() || rec.samples.back().time_s < body.time_s - 0.25 * dt)
    take_sample(ctrl.phase_cycles());

  for (OpenEpisode& oe : open_eps) rec.episodes.push_back(oe.ep);
  std::sort(rec.episodes.begin(), rec.episodes.end(),
            [](const CollisionEpisode& a, const CollisionEpisode& b) { return a.t_start < b.t_start; });
  rec.reversals = ctrl.events();
  for (const ReversalEvent& ev : rec.reversals)
    for (CollisionEpisode& ep : rec.episodes)
      if (ep.obstacle == ev.obstacle && ep.wall == ev.wall && ev.time_s >= ep.t_start - 1e-9 &&
          ev.time_s <= ep.t_end + 1e-9)
        ep.triggered_reversal = true;

  rec.end_state = end;
  rec.diagnostic = diag;
  rec.duration_s = body.time_s;
  rec.cycles_completed = body.time_s / period;
  rec.com_end = com;
  return rec;
}

}  // namespace undu
