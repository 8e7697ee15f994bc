// Acceptance battery: exact closed-form checks plus desk-scale trend sweeps.
// Prints one [PASS]/[FAIL] line per criterion with the measured values and
// exits nonzero if anything failed.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <random>
#include <utility>
#include <string>
#include <thread>
#include <vector>

#include <undusim/analysis.hpp>
#include <undusim/characterization.hpp>
#include <undusim/environment.hpp>
#include <undusim/sim.hpp>

using namespace undu;

namespace {

std::string fmt(double v, const char* spec = "%.4g") {
  char b[64];
  std::snprintf(b, sizeof b, spec, v);
  return b;
}

struct Criterion {
  int id;
  std::string title;
  bool pass = false;
  std::string detail;
};

std::vector<Criterion> results;

void report(int id, const std::string& title, bool pass, const std::string& detail) {
  results.push_back({id, title, pass, detail});
  std::printf("[%s] %2d. %-28s %s\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  std::fflush(stdout);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0;
  double s = 0;
  for (double x : v) s += x;
  return s / double(v.size());
}

double sdev(const std::vector<double>& v) {
  if (v.size() < 2) return 0;
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size() - 1));
}

// ---------------------------------------------------------------- trials --

constexpr int kTrials = 3;
const std::vector<double> kGGrid{0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5};

enum class EnvKind { open, lattice, channel };

struct CellSpec {
  EnvKind env = EnvKind::open;
  double density = 0;        // lattice L/d
  double xi = 0.81;
  double amplitude = 46.0;
  WaveDirection direction = WaveDirection::retrograde;
  double drag_ratio = 1.6;
  double G = 0;
  ControlMode mode = ControlMode::open_loop;
  double max_cycles = 30;
  int trial = 0;
};

struct TrialResult {
  RunRecord rec;
  double eta = 0;
  bool eta_measured = false;
  TransportReport cot;
  bool ok = false;
  std::string error;
};

TrialSetup setup_for(const CellSpec& c) {
  TrialSetup s;
  s.gait.amplitude_deg = c.amplitude;
  s.gait.spatial_frequency = c.xi;
  s.gait.direction = c.direction;
  s.material.drag_ratio = c.drag_ratio;
  s.G = c.G;
  s.control = c.mode;
  s.trial = c.trial;
  s.max_cycles = c.max_cycles;
  return s;
}

Environment env_for(const CellSpec& c, const TrialSetup& s) {
  const double L = total_length_mm(s.material, s.gait.n_joints);
  LatticeOptions opt;
  opt.snap_grid_mm = 25.4;
  switch (c.env) {
    case EnvKind::open: return build_open(L);
    case EnvKind::lattice: return build_lattice(L, c.density, LatticeGeometry::square, 63.5, opt);
    case EnvKind::channel: return build_channel(180.0, 4.5 * L);
  }
  return build_open(L);
}

TrialResult run_cell(const CellSpec& c) {
  TrialResult out;
  try {
    const TrialSetup s = setup_for(c);
    const Environment env = env_for(c, s);
    out.rec = run_trial(s, env);
    try {
      out.eta = wave_efficiency(out.rec).eta;
      out.eta_measured = true;
    } catch (const std::exception&) {
      out.eta = 0;  // run ended before three full cycles
    }
    out.cot = cost_of_transport(out.rec);
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

void run_all(std::vector<CellSpec>& specs, std::vector<TrialResult>& slots, int jobs) {
  slots.resize(specs.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t i = next.fetch_add(1); i < specs.size(); i = next.fetch_add(1))
      slots[i] = run_cell(specs[i]);
  };
  const int n = std::max(1, std::min<int>(jobs, int(specs.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
}

struct CellStats {
  std::vector<double> etas;          // one per trial, 0 when unmeasured
  std::vector<double> cmts_defined;  // only defined values
  int stuck = 0, aborted = 0, exited = 0, errors = 0;
  double mean_eta() const { return mean(etas); }
  double sd_eta() const { return sdev(etas); }
};

CellStats collect(const std::vector<TrialResult>& all, size_t begin) {
  CellStats st;
  for (size_t k = 0; k < kTrials; ++k) {
    const TrialResult& r = all[begin + k];
    if (!r.ok) {
      ++st.errors;
      st.etas.push_back(0);
      continue;
    }
    st.etas.push_back(r.eta);
    if (r.cot.defined) st.cmts_defined.push_back(r.cot.c_mt);
    switch (r.rec.end_state) {
      case EndState::stuck: ++st.stuck; break;
      case EndState::aborted: ++st.aborted; break;
      case EndState::exited: ++st.exited; break;
    }
  }
  return st;
}

std::string eta_row(const std::vector<CellStats>& cells) {
  std::string s;
  for (const CellStats& c : cells) s += (s.empty() ? "" : " ") + fmt(c.mean_eta(), "%.3f");
  return s;
}

// ------------------------------------------------------------ exact tier --

void criterion_cable_geometry() {
  const double l0l = exact_cable_length_left(0.0);
  const double l0r = exact_cable_length_right(0.0);
  const double l90 = exact_cable_length_left(90.0);
  double rt = 0;
  for (double a = -90.0; a <= 90.0 + 1e-12; a += 0.25) {
    rt = std::max(rt, std::abs(cable_length_to_angle_left(exact_cable_length_left(a)) - a));
    rt = std::max(rt, std::abs(cable_length_to_angle_right(exact_cable_length_right(a)) - a));
  }
  const bool pass = std::abs(l0l - 56.0) <= 0.05 && std::abs(l0r - 56.0) <= 0.05 &&
                    std::abs(l90 - 79.2) <= 0.05 && rt < 1e-9;
  report(1, "cable geometry", pass,
         "L_l(0)=" + fmt(l0l, "%.4f") + " L_r(0)=" + fmt(l0r, "%.4f") + " (want 56.0+-0.05), L_l(90)=" +
             fmt(l90, "%.4f") + " (want 79.2+-0.05), round-trip max " + fmt(rt, "%.2e") +
             " deg (tol 1e-9)");
}

void criterion_command_continuity() {
  const double A = 46.0, l0 = 1.15, eps = 1e-7;
  double jump = 0;
  for (double G = 0.0; G <= 1.0 + 1e-12; G += 0.02) {
    const double t = (2.0 * G - 1.0) * A;
    for (double at : {-t, t}) {
      if (std::abs(at) > A - eps) continue;
      const CableCommand lo = commanded_cable_lengths(at - eps, A, G, l0);
      const CableCommand hi = commanded_cable_lengths(at + eps, A, G, l0);
      jump = std::max({jump, std::abs(lo.left_mm - hi.left_mm), std::abs(lo.right_mm - hi.right_mm)});
    }
  }

  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> ua(-A, A), ug(0.0, 2.0);
  double worst_nest = 0, worst_contain = 0;
  for (int k = 0; k < 1000; ++k) {
    const double a = ua(rng);
    double g1 = ug(rng), g2 = ug(rng);
    if (g1 > g2) std::swap(g1, g2);
    const AngleInterval i1 = feasible_angle_interval(a, A, g1, l0);
    const AngleInterval i2 = feasible_angle_interval(a, A, g2, l0);
    worst_nest = std::max({worst_nest, i2.lo_deg - i1.lo_deg, i1.hi_deg - i2.hi_deg});
    worst_contain = std::max({worst_contain, i1.lo_deg - a, a - i1.hi_deg});
  }
  const bool pass = jump < 1e-5 && worst_nest < 1e-9 && worst_contain < 1e-9;
  report(2, "command continuity, nesting", pass,
         "threshold jump " + fmt(jump, "%.2e") + " mm (tol 1e-5), nesting violation " +
             fmt(worst_nest, "%.2e") + " deg, containment violation " + fmt(worst_contain, "%.2e") +
             " deg (tol 1e-9, 1000 samples)");
}

void criterion_passive_onset() {
  const double A = 46.0, l0 = 1.15;
  auto fully_open = [&](double G) {
    for (double a = -A; a <= A + 1e-12; a += 0.1) {
      const AngleInterval iv = feasible_angle_interval(a, A, G, l0);
      if (iv.lo_deg > -90.0 + 1e-9 || iv.hi_deg < 90.0 - 1e-9) return false;
    }
    return true;
  };
  double onset_grid = -1;
  for (double G = 0.0; G <= 2.0 + 1e-12; G += 0.25)
    if (fully_open(G)) {
      onset_grid = G;
      break;
    }
  double lo = std::max(0.0, onset_grid - 0.25), hi = onset_grid;  // continuous refinement
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    (fully_open(mid) ? hi : lo) = mid;
  }
  const bool pass = onset_grid >= 1.5 - 1e-12 && onset_grid <= 2.0 + 1e-12;
  report(3, "fully-passive onset", pass,
         "first grid G with the full [-90,90] interval at every angle: " + fmt(onset_grid, "%.2f") +
             " (want 1.75+-0.25 on the quarter-step protocol grid; continuous onset " +
             fmt(0.5 * (lo + hi), "%.4f") + ")");
}

void criterion_shape_roundtrip(const RunRecord& flat_g0) {
  // synthetic orbit at a known spatial frequency
  const int S = 25, T = 48;
  const double xi_true = 1.13, R = 0.01;
  CurvatureProfile prof;
  prof.s.resize(S);
  for (int k = 0; k < S; ++k) prof.s[k] = double(k + 1) / S;
  prof.time_s.resize(T);
  prof.kappa.resize(T, S);
  std::vector<double> w1(T), w2(T);
  for (int t = 0; t < T; ++t) {
    prof.time_s[t] = t;
    const double phi = 2.0 * kPi * 2.0 * t / T;
    w1[t] = R * std::cos(phi);
    w2[t] = R * std::sin(phi);
    for (int k = 0; k < S; ++k)
      prof.kappa(t, k) = w1[t] * std::sin(2.0 * kPi * xi_true * prof.s[k]) +
                         w2[t] * std::cos(2.0 * kPi * xi_true * prof.s[k]);
  }
  double xi_err = 1e300, w_err = 1e300, variation = 1e300;
  std::string note;
  try {
    const ShapeFit fit = fit_spatial_frequency(prof);
    xi_err = std::abs(fit.xi - xi_true);
    w_err = 0;
    for (int t = 0; t < T; ++t) {
      const ShapePoint p = project_shape(prof.s, prof.kappa.row(t).transpose(), fit.xi);
      w_err = std::max({w_err, std::abs(p.w1 - w1[size_t(t)]), std::abs(p.w2 - w2[size_t(t)])});
    }
    // orbit circularity on the measured rigid flat run
    const CurvatureProfile mp = curvature_from_record(flat_g0);
    const ShapeFit mf = fit_spatial_frequency(mp);
    const PhaseSeries ps = phase_series(mp, mf.xi);
    double rmin = 1e300, rmax = 0;
    for (long t = 0; t < ps.radius.size(); ++t)
      if (ps.valid[size_t(t)]) {
        rmin = std::min(rmin, ps.radius[t]);
        rmax = std::max(rmax, ps.radius[t]);
      }
    variation = rmax > 0 ? (rmax - rmin) / rmax : 1e300;
  } catch (const std::exception& e) {
    note = std::string(" fit error: ") + e.what();
  }
  const bool pass = xi_err < 1e-9 && w_err < 1e-9 && variation < 0.05;
  report(4, "shape-space round trip", pass,
         "xi error " + fmt(xi_err, "%.2e") + ", weight error " + fmt(w_err, "%.2e") +
             " (tol 1e-9); measured-orbit radius variation " + fmt(variation * 100, "%.2f") +
             "% (tol 5%)" + note);
}

void criterion_tracking(const RunRecord& rec) {
  double worst = 0;
  for (const RunSample& s : rec.samples)
    worst = std::max(worst, (s.zeta_deg - s.alpha_deg).cwiseAbs().maxCoeff());
  report(5, "rigid tracking", worst < 0.5,
         "flat ground at G=0: max |zeta - alpha| = " + fmt(worst, "%.2e") + " deg (tol 0.5)");
}

void criterion_isotropic_null() {
  CellSpec c;
  c.env = EnvKind::open;
  c.drag_ratio = 1.0;
  c.G = 0.0;
  c.max_cycles = 5;
  const TrialResult r = run_cell(c);
  const bool pass = r.ok && r.eta_measured && std::abs(r.eta) < 0.02;
  report(6, "isotropic-friction null", pass,
         r.ok ? "drag ratio 1: |eta| = " + fmt(std::abs(r.eta), "%.4f") + " over 5 cycles (tol 0.02)"
              : "run failed: " + r.error);
}

void criterion_dt_convergence() {
  auto eta_at = [&](int steps_per_cycle) {
    CellSpec c;
    c.env = EnvKind::open;
    c.G = 0.0;
    c.max_cycles = 6;
    TrialSetup s = setup_for(c);
    s.steps_per_cycle = steps_per_cycle;
    const Environment env = env_for(c, s);
    return wave_efficiency(run_trial(s, env)).eta;
  };
  double e1 = 0, e2 = 0, rel = 1e300;
  std::string note;
  try {
    e1 = eta_at(500);
    e2 = eta_at(1000);
    rel = std::abs(e2 - e1) / std::max(1e-12, std::abs(e1));
  } catch (const std::exception& e) {
    note = std::string(" error: ") + e.what();
  }
  report(7, "timestep convergence", rel < 0.01,
         "flat eta " + fmt(e1, "%.5f") + " -> " + fmt(e2, "%.5f") +
             " when halving dt; relative change " + fmt(rel * 100, "%.3f") + "% (tol 1%)" + note);
}

// ------------------------------------------------------------ trend tier --

void criterion_flat_compliance(const std::vector<CellStats>& flat) {
  bool eta_strict = true, cmt_mono = true;
  std::vector<double> gs, etas, g_cmt, cmts;
  std::string undefined_note;
  for (size_t k = 0; k < flat.size(); ++k) {
    gs.push_back(kGGrid[k]);
    etas.push_back(flat[k].mean_eta());
    if (!flat[k].cmts_defined.empty()) {
      g_cmt.push_back(kGGrid[k]);
      cmts.push_back(mean(flat[k].cmts_defined));
    } else {
      undefined_note += (undefined_note.empty() ? "" : ",") + fmt(kGGrid[k], "%.2f");
    }
  }
  for (size_t k = 0; k + 1 < etas.size(); ++k) eta_strict = eta_strict && etas[k + 1] < etas[k];
  for (size_t k = 0; k + 1 < cmts.size(); ++k) cmt_mono = cmt_mono && cmts[k + 1] >= cmts[k] - 1e-9;
  const double sp_eta = etas.size() >= 2 ? spearman(gs, etas) : 0;
  const double sp_cmt = cmts.size() >= 2 ? spearman(g_cmt, cmts) : 0;
  const bool pass = eta_strict && cmt_mono && sp_eta < 0 && sp_cmt > 0;
  std::string detail = "mean eta by G: " + eta_row(flat) + "; spearman(G,eta)=" +
                       fmt(sp_eta, "%.2f") + ", spearman(G,c_mt)=" + fmt(sp_cmt, "%.2f");
  detail += "; c_mt: ";
  for (double v : cmts) detail += fmt(v, "%.3f") + " ";
  if (!undefined_note.empty())
    detail += "(no net motion, c_mt undefined at G=" + undefined_note + ")";
  report(8, "flat-ground compliance trend", pass, detail);
}

void criterion_dense_peak(const std::vector<CellStats>& dense) {
  size_t best = 0;
  for (size_t k = 1; k < dense.size(); ++k)
    if (dense[k].mean_eta() > dense[best].mean_eta()) best = k;
  const double g_best = kGGrid[best];
  const double peak = dense[best].mean_eta();
  const double eta_passive = dense.back().mean_eta();
  const int stuck0 = dense.front().stuck + dense.front().aborted;
  const bool pass = g_best >= 0.5 && g_best <= 1.0 && stuck0 >= 2 && eta_passive < 0.5 * peak;
  report(9, "dense-lattice sweet spot", pass,
         "mean eta by G: " + eta_row(dense) + "; argmax at G=" + fmt(g_best, "%.2f") +
             " (want [0.5,1]), G=0 stuck/aborted " + std::to_string(stuck0) + "/3 (want >=2), eta(1.5)=" +
             fmt(eta_passive, "%.3f") + " vs peak " + fmt(peak, "%.3f"));
}

void criterion_obstacle_aided(const std::vector<CellStats>& ramp) {
  // ramp holds open, sparse, medium, dense at G = 0.75
  bool pass = true;
  std::string detail = "mean eta open->sparse->medium->dense: " + eta_row(ramp) + "; steps:";
  for (size_t k = 0; k + 1 < ramp.size(); ++k) {
    const double a = ramp[k].mean_eta(), b = ramp[k + 1].mean_eta();
    const double pooled =
        std::sqrt(0.5 * (ramp[k].sd_eta() * ramp[k].sd_eta() + ramp[k + 1].sd_eta() * ramp[k + 1].sd_eta()));
    const bool ok = b >= a - pooled;
    pass = pass && ok;
    detail += " " + fmt(b - a, "%+.3f") + (ok ? "" : "(!)") + "/sd" + fmt(pooled, "%.3f");
  }
  report(10, "obstacle-aided speedup", pass, detail);
}

void criterion_closed_loop(const std::vector<CellStats>& open3, const std::vector<CellStats>& closed3) {
  bool pass = true;
  std::string detail;
  for (size_t k = 0; k < closed3.size(); ++k) {
    const double o = open3[k].mean_eta(), c = closed3[k].mean_eta();
    pass = pass && c > o;
    detail += (detail.empty() ? "G=" : "; G=") + fmt(kGGrid[k], "%.2f") + ": closed " +
              fmt(c, "%.3f") + (c > o ? " > " : " <= ") + "open " + fmt(o, "%.3f");
  }
  report(11, "closed-loop recovery gain", pass, detail);
}

void criterion_force_asymmetry() {
  auto deflections = [](double alpha, double G) {
    const ForceDeflectionCurve ccw = force_deflection_curve(alpha, G, SweepDirection::ccw);
    const ForceDeflectionCurve cw = force_deflection_curve(alpha, G, SweepDirection::cw);
    const double d1 = ccw.deflection_at(3.0), d2 = cw.deflection_at(3.0);
    return std::pair<double, double>{std::max(d1, d2), std::min(d1, d2)};
  };
  bool asym_ok = true, rigid_ok = true, passive_ok = true;
  double worst_ratio = 1e300, worst_rigid = 0, worst_band = 1;
  for (double a : {40.0, 60.0, 75.0})
    for (double sgn : {1.0, -1.0}) {
      const auto [easy, hard] = deflections(sgn * a, 0.75);
      const double ratio = easy / std::max(hard, 1e-12);
      worst_ratio = std::min(worst_ratio, ratio);
      asym_ok = asym_ok && ratio > 3.0;
      const auto [re, rh] = deflections(sgn * a, 0.0);
      worst_rigid = std::max(worst_rigid, re);
      rigid_ok = rigid_ok && re < 1.0 && rh < 1.0;
    }
  for (double a : {-15.0, 0.0, 15.0}) {
    const auto [easy, hard] = deflections(a, 1.5);
    const double ratio = easy / std::max(hard, 1e-12);
    worst_band = std::max(worst_band, ratio);
    passive_ok = passive_ok && ratio >= 0.5 && ratio <= 2.0;
  }
  const bool pass = asym_ok && rigid_ok && passive_ok;
  report(12, "force-deformation asymmetry", pass,
         "G=0.75 easy/hard at 3 N over |alpha| in [40,75]: min ratio " + fmt(worst_ratio, "%.3g") +
             " (want >3); G=0 max deflection " + fmt(worst_rigid, "%.2e") +
             " deg (want <1); G=1.5 near-center max ratio " + fmt(worst_band, "%.3f") +
             " (want within [0.5,2]; hard-stop asymmetry dominates at large alpha)");
}

void criterion_event_statistics(const std::vector<TrialResult>& dense075,
                                const std::vector<TrialResult>& closed_all) {
  std::vector<RunRecord> recs;
  for (const TrialResult& r : dense075)
    if (r.ok) recs.push_back(r.rec);
  EventCounts counts;
  std::string note;
  try {
    counts = count_head_events(recs);
  } catch (const std::exception& e) {
    note = std::string(" event error: ") + e.what();
  }
  const int total = counts.buckling + counts.gliding;
  const double frac = counts.fraction();
  const bool buckling_ok = total >= 10 && frac >= 0.15 && frac <= 0.50;

  int rev_total = 0, rev_high = 0;
  for (const TrialResult& r : closed_all) {
    if (!r.ok) continue;
    for (const CollisionEpisode& e : r.rec.episodes)
      if (e.triggered_reversal) {
        ++rev_total;
        if (e.angle_at_peak_deg >= 85.0) ++rev_high;
      }
  }
  const double high_frac = rev_total > 0 ? double(rev_high) / rev_total : 0;
  const bool reversal_ok = rev_total >= 5 && high_frac >= 0.5;

  report(13, "head-event statistics", buckling_ok && reversal_ok,
         "dense open loop at G=0.75: buckling fraction " + fmt(frac, "%.3f") + " of " +
             std::to_string(total) + " events (want [0.15,0.50]); closed-loop reversal angles >=85 deg: " +
             std::to_string(rev_high) + "/" + std::to_string(rev_total) + " = " +
             fmt(high_frac, "%.2f") + " (want >=0.5)" + note);
}

void criterion_channel(const std::vector<CellStats>& chan) {
  bool low_blocked = true;
  int low_runs = 0, low_bad = 0;
  for (size_t k = 0; k < chan.size(); ++k) {
    if (kGGrid[k] >= 1.0) continue;
    low_runs += int(chan[k].etas.size());
    const int moved = chan[k].exited;
    low_bad += moved;
    low_blocked = low_blocked && moved == 0 && chan[k].errors == 0;
  }
  bool high_moves = true;
  std::string high_detail;
  for (size_t k = 0; k < chan.size(); ++k) {
    if (kGGrid[k] < 1.0) continue;
    const double e = chan[k].mean_eta();
    high_moves = high_moves && e > 1e-4;
    high_detail += " eta(" + fmt(kGGrid[k], "%.2f") + ")=" + fmt(e, "%.4f");
  }
  double best_cmt = 1e300, best_g = -1;
  std::string cmt_detail;
  for (size_t k = 0; k < chan.size(); ++k) {
    if (chan[k].cmts_defined.empty()) continue;
    const double v = mean(chan[k].cmts_defined);
    cmt_detail += " c_mt(" + fmt(kGGrid[k], "%.2f") + ")=" + fmt(v, "%.3g");
    if (v < best_cmt) {
      best_cmt = v;
      best_g = kGGrid[k];
    }
  }
  const bool cmt_ok = best_g >= 1.0 && best_g <= 1.5;
  const bool pass = low_blocked && high_moves && cmt_ok;
  report(14, "channel compliance threshold", pass,
         "G<1: " + std::to_string(low_bad) + "/" + std::to_string(low_runs) +
             " runs escaped (want 0, rest stuck/aborted); G>=1:" + high_detail +
             " (want >1e-4); c_mt minimum at G=" + fmt(best_g, "%.2f") + " (want 1.25+-0.25);" +
             cmt_detail);
}

}  // namespace

int main(int argc, char** argv) {
  std::string tier = "all";
  int jobs = int(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--tier" && i + 1 < argc) tier = argv[++i];
    else if (a == "--jobs" && i + 1 < argc) jobs = std::max(1, std::atoi(argv[++i]));
    else {
      std::fprintf(stderr, "usage: acceptance [--tier exact|trend|all] [--jobs N]\n");
      return 2;
    }
  }
  const bool do_exact = tier == "all" || tier == "exact";
  const bool do_trend = tier == "all" || tier == "trend";
  if (!do_exact && !do_trend) {
    std::fprintf(stderr, "unknown tier '%s'\n", tier.c_str());
    return 2;
  }

  using clock = std::chrono::steady_clock;

  if (do_exact) {
    const auto t0 = clock::now();
    std::printf("== exact tier ==\n");
    criterion_cable_geometry();
    criterion_command_continuity();
    criterion_passive_onset();

    CellSpec rigid;
    rigid.env = EnvKind::open;
    rigid.G = 0.0;
    rigid.max_cycles = 5;
    const TrialResult flat_g0 = run_cell(rigid);
    if (!flat_g0.ok) {
      report(4, "shape-space round trip", false, "flat run failed: " + flat_g0.error);
      report(5, "rigid tracking", false, "flat run failed: " + flat_g0.error);
    } else {
      criterion_shape_roundtrip(flat_g0.rec);
      criterion_tracking(flat_g0.rec);
    }
    criterion_isotropic_null();
    criterion_dt_convergence();
    std::printf("exact tier took %.1f s\n\n",
                std::chrono::duration<double>(clock::now() - t0).count());
  }

  if (do_trend) {
    const auto t0 = clock::now();
    std::printf("== trend tier == (3 trials per cell, %d worker%s)\n", jobs,
                jobs == 1 ? "" : "s");

    std::vector<CellSpec> specs;
    auto push_grid = [&](CellSpec base, const std::vector<double>& gs) {
      for (double g : gs)
        for (int t = 0; t < kTrials; ++t) {
          base.G = g;
          base.trial = t;
          specs.push_back(base);
        }
    };

    CellSpec flat;
    flat.env = EnvKind::open;
    flat.max_cycles = 15;
    const size_t flat_at = specs.size();
    push_grid(flat, kGGrid);

    CellSpec dense;
    dense.env = EnvKind::lattice;
    dense.density = 3.3;
    dense.xi = 1.83;
    dense.max_cycles = 30;
    const size_t dense_at = specs.size();
    push_grid(dense, kGGrid);

    // obstacle-aided ramp at G = 0.75: open / sparse / medium (dense reused)
    const size_t ramp_at = specs.size();
    {
      CellSpec open075;
      open075.env = EnvKind::open;
      open075.max_cycles = 30;
      push_grid(open075, {0.75});
      CellSpec sparse = dense;
      sparse.density = 1.8;
      sparse.xi = 0.90;
      push_grid(sparse, {0.75});
      CellSpec medium = dense;
      medium.density = 2.8;
      medium.xi = 1.27;
      push_grid(medium, {0.75});
    }

    CellSpec closed = dense;
    closed.mode = ControlMode::closed_loop;
    const size_t closed_at = specs.size();
    push_grid(closed, {0.0, 0.25, 0.5});

    CellSpec chan;
    chan.env = EnvKind::channel;
    chan.amplitude = 60.0;
    chan.xi = 1.0;
    chan.direction = WaveDirection::direct;
    chan.drag_ratio = 1.0;
    chan.max_cycles = 40;
    const size_t chan_at = specs.size();
    push_grid(chan, kGGrid);

    std::vector<TrialResult> all;
    run_all(specs, all, jobs);

    int run_errors = 0;
    for (const TrialResult& r : all)
      if (!r.ok) {
        ++run_errors;
        std::printf("run error: %s\n", r.error.c_str());
      }

    std::vector<CellStats> flat_stats, dense_stats, chan_stats, closed_stats, ramp_stats;
    for (size_t k = 0; k < kGGrid.size(); ++k) {
      flat_stats.push_back(collect(all, flat_at + k * kTrials));
      dense_stats.push_back(collect(all, dense_at + k * kTrials));
      chan_stats.push_back(collect(all, chan_at + k * kTrials));
    }
    for (size_t k = 0; k < 3; ++k) closed_stats.push_back(collect(all, closed_at + k * kTrials));
    // open, sparse, medium, then the dense cells from the main sweep
    for (size_t k = 0; k < 3; ++k) ramp_stats.push_back(collect(all, ramp_at + k * kTrials));
    ramp_stats.push_back(dense_stats[3]);

    criterion_flat_compliance(flat_stats);
    criterion_dense_peak(dense_stats);
    criterion_obstacle_aided(ramp_stats);
    criterion_closed_loop({dense_stats[0], dense_stats[1], dense_stats[2]}, closed_stats);
    criterion_force_asymmetry();

    std::vector<TrialResult> dense075(all.begin() + long(dense_at + 3 * kTrials),
                                      all.begin() + long(dense_at + 4 * kTrials));
    std::vector<TrialResult> closed_all(all.begin() + long(closed_at),
                                        all.begin() + long(closed_at + 3 * kTrials));
    criterion_event_statistics(dense075, closed_all);
    criterion_channel(chan_stats);

    std::printf("trend tier took %.1f s over %zu runs%s\n",
                std::chrono::duration<double>(clock::now() - t0).count(), specs.size(),
                run_errors ? (" (" + std::to_string(run_errors) + " run errors)").c_str() : "");
  }

  int failures = 0;
  for (const Criterion& c : results)
    if (!c.pass) ++failures;
  std::printf("\n%zu criteria checked, %d failed\n", results.size(), failures);
  return failures > 0 ? 1 : 0;
}
