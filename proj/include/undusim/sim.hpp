#pragma once

#include <cstdint>

#include "undusim/controller.hpp"
#include "undusim/environment.hpp"
#include "undusim/mechanics.hpp"
#include "undusim/record.hpp"

// Trial runner: spawns the body at the near edge of a field, drives it with
// the gait executive until it crosses the far side, stops making progress,
// or runs out of budget, and returns the sampled record.

namespace undu {

struct TrialSetup {
  Gait gait;
  double G = 1.0;
  double l0_mm_per_deg = 1.15;
  JointGeometry geometry;
  MaterialParams material;
  SolverParams solver;
  ControlMode control = ControlMode::open_loop;
  ReversalPolicy policy;
  std::uint64_t seed = 1;
  int trial = 0;

  double max_cycles = 40;
  int steps_per_cycle = 500;
  int samples_per_cycle = 32;
  double stuck_window_cycles = 10;   // no-progress window
  double stuck_fraction = 0.02;      // of body length over that window
  // Pathological-blowup guard only. Kept slower than the no-progress test so
  // a wedged body classifies as stuck, not aborted.
  double overload_force_n = 200;
  double overload_window_cycles = 12.0;
  double spawn_y_mm = 0;             // nominal lateral start
  double spawn_heading_jitter_deg = 2.0;
  double spawn_y_jitter_mm = -1;     // <0: half lattice spacing, or 15% of field width
};

double total_length_mm(const MaterialParams& m, int n_joints);

// Start pose: head just outside the field's -x edge pointing -x (so travel
// is +x), joints on the wave template at phase zero, lateral offset and
// heading jittered deterministically from (seed, env label, trial).
BodyState spawn_body(const TrialSetup& setup, const Environment& env);

RunRecord run_trial(const TrialSetup& setup, const Environment& env);

}  // namespace undu
