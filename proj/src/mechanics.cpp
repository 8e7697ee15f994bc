#include "undusim/mechanics.hpp"

#include <algorithm>
#include <cmath>

namespace undu {

namespace {

inline Eigen::Vector2d unit(double theta) { return {std::cos(theta), std::sin(theta)}; }
inline Eigen::Vector2d perp(const Eigen::Vector2d& v) { return {-v.y(), v.x()}; }
inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// Internal chain snapshot for one coordinate vector u = (x, y, th0, z1..zN),
// angles in radians.
struct Chain {
  int n;                                // joints
  std::vector<Eigen::Vector2d> fore;    // fore point of each link (= joint positions)
  std::vector<double> theta;            // absolute link angles
  std::vector<Eigen::Vector2d> vfore;   // velocity of each fore point
  std::vector<double> omega;            // absolute angular rates
  double ell;

  void build(const Eigen::VectorXd& u, const Eigen::VectorXd& udot, double link_len) {
    ell = link_len;
    n = int(u.size()) - 3;
    fore.resize(n + 1);
    theta.resize(n + 1);
    vfore.resize(n + 1);
    omega.resize(n + 1);
    fore[0] = {u[0], u[1]};
    theta[0] = u[2];
    vfore[0] = {udot[0], udot[1]};
    omega[0] = udot[2];
    for (int k = 1; k <= n; ++k) {
      theta[k] = theta[k - 1] + u[2 + k];
      omega[k] = omega[k - 1] + udot[2 + k];
      const Eigen::Vector2d seg = ell * unit(theta[k - 1]);
      fore[k] = fore[k - 1] + seg;
      vfore[k] = vfore[k - 1] + omega[k - 1] * perp(seg);
    }
  }
  Eigen::Vector2d point(int link, double along) const { return fore[link] + along * unit(theta[link]); }
  Eigen::Vector2d point_velocity(int link, const Eigen::Vector2d& p) const {
    return vfore[link] + omega[link] * perp(p - fore[link]);
  }
};

// One applied force: world-frame f at point p on a link.
struct Applied {
  int link;
  Eigen::Vector2d p, f;
};

struct EvalScratch {
  Chain chain;                          // midpoint configuration
  Chain chain_end;                      // end configuration (contact frame)
  std::vector<Applied> forces;          // forces acting in the midpoint frame
  std::vector<Applied> contact_forces;  // forces acting in the end frame
  std::vector<int> near;
  std::vector<ContactSample> contacts;  // filled only when collecting
};

// Project world-frame point forces into generalized coordinates by suffix
// sums over the chain they act on. Accumulates into g.
void assemble_generalized(const Chain& ch, const std::vector<Applied>& forces,
                          Eigen::VectorXd& g) {
  const int n = ch.n;
  std::vector<Eigen::Vector2d> fsum(n + 1, Eigen::Vector2d::Zero());
  std::vector<double> msum(n + 1, 0.0);  // torque about world origin
  for (const Applied& ap : forces) {
    fsum[ap.link] += ap.f;
    msum[ap.link] += cross2(ap.p, ap.f);
  }
  Eigen::Vector2d sf = Eigen::Vector2d::Zero();
  double sm = 0;
  for (int k = n; k >= 1; --k) {
    sf += fsum[k];
    sm += msum[k];
    g[2 + k] += sm - cross2(ch.fore[k], sf);
  }
  sf += fsum[0];
  sm += msum[0];
  g[0] += sf.x();
  g[1] += sf.y();
  g[2] += sm - cross2(ch.fore[0], sf);
}

Eigen::Vector2d smoothed_ground_friction(const Eigen::Vector2d& v, double theta,
                                         const MaterialParams& m, double v0) {
  const double speed = v.norm();
  if (speed <= 0) return Eigen::Vector2d::Zero();
  const Eigen::Vector2d t = unit(theta), nrm = perp(t);
  const Eigen::Vector2d vhat = v / speed;
  const double scale = speed / (speed + v0);
  const double w = m.link_weight_n();
  return -w * scale *
         (m.mu_parallel * vhat.dot(t) * t + m.mu_parallel * m.drag_ratio * vhat.dot(nrm) * nrm);
}

Eigen::Vector2d smoothed_dir(const Eigen::Vector2d& v, double v0) {
  const double s = v.norm();
  if (s <= 0) return Eigen::Vector2d::Zero();
  return v / (s + v0);
}

class StepProblem {
 public:
  StepProblem(const Eigen::VectorXd& u0, const JointCommand& cmd, const Environment& env,
              const MaterialParams& m, const SolverParams& sp, double dt,
              std::span<const PointLoad> loads, bool fix_head)
      : u0_(u0), env_(env), m_(m), sp_(sp), dt_(dt), loads_(loads), fix_head_(fix_head) {
    const int n = int(u0.size()) - 3;
    lo_.resize(n);
    hi_.resize(n);
    for (int j = 0; j < n; ++j) {
      const AngleInterval iv = feasible_angle_interval(cmd.alpha_deg[j], cmd.amplitude_deg, cmd.G,
                                                       cmd.l0_mm_per_deg, cmd.geometry);
      lo_[j] = deg2rad(iv.lo_deg);
      hi_[j] = deg2rad(iv.hi_deg);
    }
    arm_ = 0.5 * m.link_length_mm;
  }

  const Eigen::VectorXd& lo() const { return lo_; }
  const Eigen::VectorXd& hi() const { return hi_; }

  void clamp_joints(Eigen::VectorXd& u) const {
    for (int j = 0; j < int(lo_.size()); ++j)
      u[3 + j] = std::clamp(u[3 + j], lo_[j], hi_[j]);
  }

  // Generalized force residual for the step ending at u. Smooth forces
  // (friction, damping, skin, external loads) are evaluated at the
  // configuration midpoint, where (u - u_prev)/dt is the centered velocity
  // estimate: the implicit midpoint rule, second order in dt. Stiff
  // unilateral contacts are instead evaluated at the end configuration —
  // the dissipative choice, which expels an overlapped start without the
  // midpoint's elastic overshoot. Statics see no difference: at u == u_prev
  // the two frames coincide.
  Eigen::VectorXd residual(const Eigen::VectorXd& u, EvalScratch& s, bool collect = false) const {
    const int n = int(u.size()) - 3;
    Eigen::VectorXd udot = (u - u0_) / dt_;
    const Eigen::VectorXd um = u0_ + 0.5 * (u - u0_);
    s.chain.build(um, udot, m_.link_length_mm);
    s.chain_end.build(u, udot, m_.link_length_mm);
    s.forces.clear();
    s.contact_forces.clear();
    if (collect) s.contacts.clear();
    const Chain& ch = s.chain;
    const Chain& ce = s.chain_end;

    // wheel friction and translational regularization at link centers
    for (int k = 0; k <= n; ++k) {
      const Eigen::Vector2d c = ch.point(k, 0.5 * m_.link_length_mm);
      const Eigen::Vector2d v = ch.point_velocity(k, c);
      Eigen::Vector2d f = smoothed_ground_friction(v, ch.theta[k], m_, v0_eff());
      f -= damp_scale_ * m_.translational_damping * v;
      s.forces.push_back({k, c, f});
    }

    // post contacts: capsule segment vs circle, in the end frame
    const double rl = m_.link_radius();
    for (int k = 0; k <= n; ++k) {
      const Eigen::Vector2d a = ce.fore[k];
      const Eigen::Vector2d b = ce.point(k, m_.link_length_mm);
      env_.query_segment(a, b, rl + 1.0, s.near);
      for (int pi : s.near) {
        const Post& post = env_.posts[pi];
        const Eigen::Vector2d ab = b - a;
        const double t = std::clamp((post.center_mm - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
        const Eigen::Vector2d q = a + t * ab;
        Eigen::Vector2d d = q - post.center_mm;
        const double dist = d.norm();
        const double pen = post.radius_mm + rl - dist;
        if (pen <= 0) continue;
        const Eigen::Vector2d nrm = dist > 1e-9 ? Eigen::Vector2d(d / dist) : Eigen::Vector2d(1, 0);
        const Eigen::Vector2d cp = q - rl * nrm;
        const Eigen::Vector2d fn = m_.obstacle_stiffness_n_per_mm * pen * nrm;
        const Eigen::Vector2d vcp = ce.point_velocity(k, cp);
        const Eigen::Vector2d vt = vcp - vcp.dot(nrm) * nrm;
        const Eigen::Vector2d ft =
            -m_.obstacle_friction * fn.norm() * smoothed_dir(vt, v0_eff());
        s.contact_forces.push_back({k, cp, fn + ft});
        if (collect)
          s.contacts.push_back({k, pi, -1, cp, fn + ft, nrm, pen});
      }
      // wall contacts at both capsule ends
      for (int wi = 0; wi < int(env_.walls.size()); ++wi) {
        const Wall& w = env_.walls[wi];
        for (const Eigen::Vector2d& e : {a, b}) {
          const double pen = rl - (e - w.point_mm).dot(w.normal);
          if (pen <= 0) continue;
          const Eigen::Vector2d cp = e - rl * w.normal;
          const Eigen::Vector2d fn = m_.obstacle_stiffness_n_per_mm * pen * w.normal;
          const Eigen::Vector2d vcp = ce.point_velocity(k, cp);
          const Eigen::Vector2d vt = vcp - vcp.dot(w.normal) * w.normal;
          const Eigen::Vector2d ft =
              -m_.obstacle_friction * fn.norm() * smoothed_dir(vt, v0_eff());
          s.contact_forces.push_back({k, cp, fn + ft});
          if (collect)
            s.contacts.push_back({k, -1, wi, cp, fn + ft, w.normal, pen});
        }
      }
    }

    // external loads
    for (const PointLoad& pl : loads_) {
      const Eigen::Vector2d p = ch.point(pl.link, pl.along_mm);
      s.forces.push_back({pl.link, p, pl.force_n});
    }

    // each force set projects through the chain it acts on
    Eigen::VectorXd g = Eigen::VectorXd::Zero(3 + n);
    assemble_generalized(ch, s.forces, g);
    assemble_generalized(ce, s.contact_forces, g);

    // skin spring and joint damping act on the joint coordinates directly
    const double ks = m_.skin_stiffness_nmm_per_deg * (180.0 / kPi);
    const double bs = m_.skin_damping_nmms_per_deg * (180.0 / kPi);
    for (int j = 0; j < n; ++j)
      g[3 + j] += -ks * um[3 + j] - bs * udot[3 + j];
    return g;
  }

  double scale(int i) const { return i < 2 ? 1.0 : arm_; }

  // Smoothing continuation: the solver may widen the stick-slip transition
  // to regain a tractable landscape, then tighten back to the physical
  // scale. Results only count at scale 1.
  void set_slip_scale(double s) { slip_scale_ = s; }
  double v0_eff() const { return m_.slip_velocity_mm_s * slip_scale_; }
  // Damping continuation: a stiff viscous term pins the root near the step
  // anchor; walking it back down with warm starts selects the nearest root
  // of the physical equations. Results only count at scale 1.
  void set_damp_scale(double s) { damp_scale_ = s; }

  bool fixed_head() const { return fix_head_; }
  const SolverParams& solver() const { return sp_; }

 private:
  Eigen::VectorXd u0_;
  const Environment& env_;
  const MaterialParams& m_;
  const SolverParams& sp_;
  double dt_;
  std::span<const PointLoad> loads_;
  bool fix_head_;
  Eigen::VectorXd lo_, hi_;
  double arm_;
  double slip_scale_ = 1.0;
  double damp_scale_ = 1.0;
};

enum CoordState : std::uint8_t { kFree = 0, kAtLo = 1, kAtHi = 2, kEq = 3, kFixed = 4 };

// Projected Newton with an active set over the joint boxes. Returns true on
// force balance within tolerance.
bool solve_balance(const StepProblem& prob, Eigen::VectorXd& u, EvalScratch& scratch,
                   std::vector<std::uint8_t>& st, int& iters_out, double& resid_out) {
  const int dim = int(u.size());
  const int n = dim - 3;
  const SolverParams& sp = prob.solver();
  const double bound_tol = 1e-12;

  prob.clamp_joints(u);
  st.assign(dim, kFree);
  if (prob.fixed_head()) st[0] = st[1] = st[2] = kFixed;
  for (int j = 0; j < n; ++j)
    if (prob.hi()[j] - prob.lo()[j] < 1e-12) st[3 + j] = kEq;

  Eigen::VectorXd R = prob.residual(u, scratch);
  std::vector<int> free_ix;
  free_ix.reserve(dim);

  // KKT violation per coordinate: a bound holds any residual of consistent
  // sign, everything else must balance. Independent of the working set, so
  // line-search descent telescopes across active-set changes.
  auto merit_component = [&](const Eigen::VectorXd& uu, const Eigen::VectorXd& RR,
                             int i) -> double {
    if (st[i] == kFixed || st[i] == kEq) return 0.0;
    if (i >= 3) {
      const int j = i - 3;
      const bool at_lo = uu[i] <= prob.lo()[j] + bound_tol;
      const bool at_hi = uu[i] >= prob.hi()[j] - bound_tol;
      if (at_lo && at_hi) return 0.0;
      if (at_lo) return std::max(RR[i], 0.0);
      if (at_hi) return std::max(-RR[i], 0.0);
    }
    return std::abs(RR[i]);
  };
  auto merit_max = [&](const Eigen::VectorXd& uu, const Eigen::VectorXd& RR) {
    double m = 0;
    for (int i = 0; i < dim; ++i) m = std::max(m, merit_component(uu, RR, i) / prob.scale(i));
    return m;
  };
  auto merit_norm = [&](const Eigen::VectorXd& uu, const Eigen::VectorXd& RR) {
    double m = 0;
    for (int i = 0; i < dim; ++i) m += std::pow(merit_component(uu, RR, i) / prob.scale(i), 2);
    return std::sqrt(m);
  };

  // A joint hovering near a stop with the net torque pressing into it can be
  // landed on the stop outright — the stop then holds the whole residual,
  // whereas the Newton approach would crawl there through stick-slip at the
  // slip-velocity scale. If the landing turns out wrong the active-set sign
  // test frees the joint again. Used only when ordinary descent is cornered
  // or stalled, so healthy solves never see it.
  int snaps = 0;
  auto try_snap = [&]() -> bool {
    if (snaps >= 2 * n) return false;
    bool snapped = false;
    for (int j = 0; j < n; ++j) {
      const int i = 3 + j;
      if (st[i] == kEq || st[i] == kFixed) continue;
      const double snap = 5e-3;  // rad
      if (u[i] > prob.lo()[j] + bound_tol && u[i] <= prob.lo()[j] + snap && R[i] < 0) {
        u[i] = prob.lo()[j];
        snapped = true;
      } else if (u[i] < prob.hi()[j] - bound_tol && u[i] >= prob.hi()[j] - snap && R[i] > 0) {
        u[i] = prob.hi()[j];
        snapped = true;
      }
    }
    if (snapped) {
      ++snaps;
      R = prob.residual(u, scratch);
    }
    return snapped;
  };

  int iter = 0;
  int stall = 0;
  for (; iter < sp.max_iterations; ++iter) {
    // refresh the active set from bound proximity and multiplier signs
    for (int j = 0; j < n; ++j) {
      const int i = 3 + j;
      if (st[i] == kEq || st[i] == kFixed) continue;
      if (u[i] <= prob.lo()[j] + bound_tol)
        st[i] = R[i] <= 0 ? kAtLo : kFree;
      else if (u[i] >= prob.hi()[j] - bound_tol)
        st[i] = R[i] >= 0 ? kAtHi : kFree;
      else
        st[i] = kFree;
    }
    free_ix.clear();
    for (int i = 0; i < dim; ++i)
      if (st[i] == kFree) free_ix.push_back(i);

    const double rmax = merit_max(u, R);
    resid_out = rmax;
    if (rmax < sp.force_tol_n) { iters_out = iter; return true; }
    if (free_ix.empty()) { iters_out = iter; return rmax < 10.0 * sp.force_tol_n; }

    // forward-difference Jacobian over the free coordinates
    const int nf = int(free_ix.size());
    Eigen::MatrixXd J(nf, nf);
    Eigen::VectorXd Rp;
    for (int c = 0; c < nf; ++c) {
      const int ic = free_ix[c];
      const double h = ic < 2 ? 1e-6 : 1e-7;
      const double saved = u[ic];
      u[ic] = saved + h;
      Rp = prob.residual(u, scratch);
      u[ic] = saved;
      for (int r = 0; r < nf; ++r) J(r, c) = (Rp[free_ix[r]] - R[free_ix[r]]) / h;
    }

    Eigen::VectorXd rhs(nf);
    for (int r = 0; r < nf; ++r) rhs[r] = -R[free_ix[r]];

    const double r0 = merit_norm(u, R);

    Eigen::VectorXd u_trial;
    auto trial_norm = [&](const Eigen::VectorXd& d, double tstep, Eigen::VectorXd& Rp) {
      u_trial = u;
      for (int c = 0; c < nf; ++c) u_trial[free_ix[c]] += tstep * d[c];
      prob.clamp_joints(u_trial);
      Rp = prob.residual(u_trial, scratch);
      return merit_norm(u_trial, Rp);
    };

    // Newton direction first; if no step length descends, re-solve with
    // Levenberg damping in scaled coordinates, bending toward steepest
    // descent. Stick-slip friction curves on the slip-velocity scale, far
    // below the step size, so the plain Newton model can be invalid until
    // the step is bent and shortened. Within each attempt, free coordinates
    // sitting on a bound whose solve component points out of the box are
    // pinned and the reduced system re-solved: clamping them instead would
    // silently invalidate the model for every other coordinate.
    bool moved = false;
    std::vector<char> enabled(size_t(nf), 1);
    for (int attempt = 0; attempt < 8 && !moved; ++attempt) {
      std::fill(enabled.begin(), enabled.end(), char(1));
      Eigen::VectorXd d = Eigen::VectorXd::Zero(nf);
      for (int pass = 0; pass <= nf; ++pass) {
        std::vector<int> en;
        for (int c = 0; c < nf; ++c)
          if (enabled[size_t(c)]) en.push_back(c);
        if (en.empty()) break;
        const int ne = int(en.size());
        Eigen::MatrixXd Je(ne, ne);
        Eigen::VectorXd re(ne);
        for (int r = 0; r < ne; ++r) {
          re[r] = rhs[en[size_t(r)]];
          for (int c = 0; c < ne; ++c) Je(r, c) = J(en[size_t(r)], en[size_t(c)]);
        }
        Eigen::VectorXd de;
        if (attempt == 0) {
          de = Je.partialPivLu().solve(re);
        } else {
          for (int r = 0; r < ne; ++r) {
            const double s = prob.scale(free_ix[en[size_t(r)]]);
            Je.row(r) /= s;
            re[r] /= s;
          }
          Eigen::MatrixXd JtJ = Je.transpose() * Je;
          const double lam = std::pow(10.0, attempt - 4) * std::max(JtJ.diagonal().maxCoeff(), 1e-12);
          JtJ.diagonal().array() += lam;
          de = JtJ.ldlt().solve(Je.transpose() * re);
        }
        d.setZero();
        if (de.allFinite())
          for (int r = 0; r < ne; ++r) d[en[size_t(r)]] = de[r];
        bool changed = false;
        for (int c = 0; c < nf; ++c) {
          const int i = free_ix[c];
          if (i < 3 || !enabled[size_t(c)]) continue;
          const bool at_lo = u[i] <= prob.lo()[i - 3] + bound_tol;
          const bool at_hi = u[i] >= prob.hi()[i - 3] - bound_tol;
          if ((at_lo && d[c] < 0) || (at_hi && d[c] > 0)) {
            enabled[size_t(c)] = 0;
            changed = true;
          }
        }
        if (!changed) break;
      }
      if (!d.allFinite() || d.cwiseAbs().maxCoeff() == 0.0) continue;

      // trust-region cap: keep per-coordinate moves physical
      double dscale = 1.0;
      for (int c = 0; c < nf; ++c) {
        const double cap = free_ix[c] < 2 ? 25.0 : 0.35;  // mm, rad
        dscale = std::min(dscale, cap / std::max(cap, std::abs(d[c])));
      }
      const double dmax = d.cwiseAbs().maxCoeff();
      double tstep = dscale;
      for (int ls = 0; ls < 40; ++ls) {
        const double rn = trial_norm(d, tstep, Rp);
        if (rn < r0 * (1.0 - std::max(1e-4 * tstep, 1e-12)) || rn < sp.force_tol_n) {
          moved = true;
          u = u_trial;
          R = Rp;
          break;
        }
        tstep *= 0.5;
        if (tstep * dmax < 1e-8) break;  // below meaningful progress
      }
    }
    if (!moved) {
      // cornered: no direction descends — land a hovering joint if there is
      // one, otherwise let the caller substep
      if (try_snap()) {
        stall = 0;
        continue;
      }
      resid_out = merit_max(u, R);
      iters_out = iter;
      return false;
    }
    // descent so shallow it will never finish inside the iteration budget
    // counts as cornered too
    if (merit_norm(u, R) > r0 * 0.999) {
      if (++stall >= 3 && try_snap()) stall = 0;
    } else {
      stall = 0;
    }
  }
  const double rmax = merit_max(u, R);
  resid_out = rmax;
  iters_out = iter;
  return rmax < 10.0 * sp.force_tol_n;
}

}  // namespace

BodyState make_straight_body(int n_joints, const Eigen::Vector2d& head, double heading) {
  return make_posed_body(Eigen::VectorXd::Zero(n_joints), head, heading);
}

BodyState make_posed_body(const Eigen::VectorXd& joint_deg, const Eigen::Vector2d& head,
                          double heading) {
  BodyState s;
  s.head_mm = head;
  s.heading_rad = heading;
  s.joint_deg = joint_deg;
  s.qdot = Eigen::VectorXd::Zero(3 + joint_deg.size());
  return s;
}

std::vector<LinkPose> link_poses(const BodyState& s, const MaterialParams& m) {
  const int n = s.n_joints();
  std::vector<LinkPose> out(n + 1);
  Eigen::Vector2d p = s.head_mm;
  double th = s.heading_rad;
  for (int k = 0; k <= n; ++k) {
    if (k > 0) th += deg2rad(s.joint_deg[k - 1]);
    const Eigen::Vector2d dir = Eigen::Vector2d(std::cos(th), std::sin(th));
    out[k].fore = p;
    out[k].aft = p + m.link_length_mm * dir;
    out[k].center = p + 0.5 * m.link_length_mm * dir;
    out[k].theta = th;
    p = out[k].aft;
  }
  return out;
}

Eigen::Vector2d center_of_mass(const BodyState& s, const MaterialParams& m) {
  const std::vector<LinkPose> lp = link_poses(s, m);
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const LinkPose& l : lp) c += l.center;
  return c / double(lp.size());
}

double body_envelope_width(const BodyState& s, const MaterialParams& m) {
  const std::vector<LinkPose> lp = link_poses(s, m);
  Eigen::Vector2d mean_dir = Eigen::Vector2d::Zero();
  for (const LinkPose& l : lp) mean_dir += Eigen::Vector2d(std::cos(l.theta), std::sin(l.theta));
  if (mean_dir.norm() < 1e-12) mean_dir = {1, 0};
  mean_dir.normalize();
  const Eigen::Vector2d lat(-mean_dir.y(), mean_dir.x());
  double yl = 1e300, yh = -1e300;
  for (const LinkPose& l : lp)
    for (const Eigen::Vector2d& e : {l.fore, l.aft}) {
      const double y = e.dot(lat);
      yl = std::min(yl, y);
      yh = std::max(yh, y);
    }
  return (yh - yl) + m.link_width_mm;
}

Eigen::Vector2d ground_friction_force(const Eigen::Vector2d& v, double theta,
                                      const MaterialParams& m) {
  const double speed = v.norm();
  if (speed == 0) return Eigen::Vector2d::Zero();
  const Eigen::Vector2d t = unit(theta), nrm = perp(t);
  const Eigen::Vector2d vhat = v / speed;
  const double w = m.link_weight_n();
  return -w * (m.mu_parallel * vhat.dot(t) * t + m.mu_parallel * m.drag_ratio * vhat.dot(nrm) * nrm);
}

StepResult step(BodyState& s, const JointCommand& cmd, const Environment& env,
                const MaterialParams& m, const SolverParams& sp, double dt,
                std::span<const PointLoad> loads, bool fix_head) {
  StepResult out;
  const int n = s.n_joints();
  if (int(cmd.alpha_deg.size()) != n) {
    out.converged = false;
    return out;
  }

  Eigen::VectorXd u0(3 + n);
  u0[0] = s.head_mm.x();
  u0[1] = s.head_mm.y();
  u0[2] = s.heading_rad;
  for (int j = 0; j < n; ++j) u0[3 + j] = deg2rad(s.joint_deg[j]);

  EvalScratch scratch;
  std::vector<std::uint8_t> st;

  Eigen::VectorXd u = u0;
  bool ok = false;
  int total_iters = 0;
  int nsub = 1;
  for (int split = 0; split <= sp.max_substep_splits; ++split, nsub *= 2) {
    u = u0;
    ok = true;
    Eigen::VectorXd usub = u0;
    for (int ss = 0; ss < nsub && ok; ++ss) {
      StepProblem sub(usub, cmd, env, m, sp, dt / nsub, loads, fix_head);
      int it = 0;
      double res = 0;
      Eigen::VectorXd unext = usub;
      ok = solve_balance(sub, unext, scratch, st, it, res);
      total_iters += it;
      if (!ok) {
        // Near-stuck friction puts structure in the residual at the
        // slip-velocity scale, which can starve Newton of progress. Widen
        // the stick-slip transition, solve the easy landscape, then tighten
        // back to the physical scale with warm starts. A stage that flew
        // past the motion cap restarts from the anchor instead of warm-
        // starting the next stage with a spurious iterate.
        for (const double sc : {64.0, 16.0, 4.0, 2.0, 1.0}) {
          sub.set_slip_scale(sc);
          int it2 = 0;
          ok = solve_balance(sub, unext, scratch, st, it2, res);
          total_iters += it2;
          if (!ok) {
            const double dxy = std::hypot(unext[0] - usub[0], unext[1] - usub[1]);
            double drot = 0;
            for (int i = 2; i < 3 + n; ++i) drot = std::max(drot, std::abs(unext[i] - usub[i]));
            if (dxy > 0.25 * m.link_length_mm || drot > 0.35) unext = usub;
          }
        }
      }
      if (ok) {
        // A balance that lands more than a quarter link (or a trust cap of
        // rotation) from the anchor is suspect: the midpoint equations admit
        // spurious distant roots where saturated friction plus the small
        // viscous term balances a load that a nearby root also balances.
        // Re-derive the root by damping continuation from the anchor: the
        // warm-started descent lands on the near root when one exists and
        // tracks honestly to the far root when none does (e.g. elastic
        // expulsion from a deep overlap, where large motion is the answer).
        const double dxy = std::hypot(unext[0] - usub[0], unext[1] - usub[1]);
        double drot = 0;
        for (int i = 2; i < 3 + n; ++i) drot = std::max(drot, std::abs(unext[i] - usub[i]));
        if (dxy > 0.25 * m.link_length_mm || drot > 0.35) {
          Eigen::VectorXd ucont = usub;
          bool okc = false;
          for (const double dc : {1000.0, 100.0, 10.0, 1.0}) {
            sub.set_damp_scale(dc);
            int it3 = 0;
            double res3 = 0;
            okc = solve_balance(sub, ucont, scratch, st, it3, res3);
            total_iters += it3;
            if (okc) res = res3;
          }
          sub.set_damp_scale(1.0);
          if (okc)
            unext = ucont;
          else
            ok = false;  // shorter steps shrink the spurious basins
        }
      }
      out.residual_n = res;
      usub = unext;
    }
    if (ok) { u = usub; out.substeps = nsub; break; }
  }
  out.newton_iterations = total_iters;
  out.converged = ok;
  if (!ok) return out;

  // final residual with contact collection for reporting
  StepProblem fin(u0, cmd, env, m, sp, dt, loads, fix_head);
  Eigen::VectorXd R = fin.residual(u, scratch, true);
  out.contacts = scratch.contacts;
  for (const ContactSample& c : out.contacts) {
    out.max_penetration_mm = std::max(out.max_penetration_mm, c.penetration_mm);
    const double ref = c.obstacle >= 0 ? env.posts[c.obstacle].radius_mm : m.link_radius();
    if (c.penetration_mm > sp.penetration_warn_fraction * ref) out.penetration_warning = true;
  }

  // cable states: interval, commanded lengths, tensions from bound residuals
  out.cables.resize(n);
  for (int j = 0; j < n; ++j) {
    CableState& cs = out.cables[j];
    const CableCommand cc = commanded_cable_lengths(cmd.alpha_deg[j], cmd.amplitude_deg, cmd.G,
                                                    cmd.l0_mm_per_deg, cmd.geometry);
    cs.commanded_left_mm = cc.left_mm;
    cs.commanded_right_mm = cc.right_mm;
    cs.interval = feasible_angle_interval(cmd.alpha_deg[j], cmd.amplitude_deg, cmd.G,
                                          cmd.l0_mm_per_deg, cmd.geometry);
    const int i = 3 + j;
    const double z = u[i];
    const double zdeg = rad2deg(z);
    const bool at_lo = z <= deg2rad(cs.interval.lo_deg) + 1e-10;
    const bool at_hi = z >= deg2rad(cs.interval.hi_deg) - 1e-10;
    if (!(at_lo || at_hi)) continue;
    const double tau_c = -R[i];  // holding torque, N mm
    if (at_lo && at_hi) {        // degenerate interval: sign picks the taut side
      if (tau_c < 0)
        cs.tension_left_n = std::max(0.0, -tau_c / cable_moment_arm_left(zdeg, cmd.geometry));
      else
        cs.tension_right_n = std::max(0.0, -tau_c / cable_moment_arm_right(zdeg, cmd.geometry));
    } else if (at_hi) {
      cs.tension_left_n = std::max(0.0, -tau_c / cable_moment_arm_left(zdeg, cmd.geometry));
    } else {
      cs.tension_right_n = std::max(0.0, -tau_c / cable_moment_arm_right(zdeg, cmd.geometry));
    }
  }

  // dissipation and skin energy bookkeeping at the converged state
  const Eigen::VectorXd udot = (u - u0) / dt;
  {
    Chain& ch = scratch.chain;  // rebuilt by the final residual call
    double diss = 0;
    int stick = 0;
    for (int k = 0; k <= n; ++k) {
      const Eigen::Vector2d c = ch.point(k, 0.5 * m.link_length_mm);
      const Eigen::Vector2d v = ch.point_velocity(k, c);
      diss += -smoothed_ground_friction(v, ch.theta[k], m, m.slip_velocity_mm_s).dot(v) * dt;
      if (v.norm() < sp.stick_velocity_mm_s) ++stick;
    }
    for (const ContactSample& c : out.contacts) {
      const Eigen::Vector2d vcp = ch.point_velocity(c.link, c.point_mm);
      const Eigen::Vector2d vt = vcp - vcp.dot(c.normal) * c.normal;
      const Eigen::Vector2d ft = c.force_n - c.force_n.dot(c.normal) * c.normal;
      diss += -ft.dot(vt) * dt;
    }
    out.friction_dissipation_nmm = diss;
    out.sticking_links = stick;
    double e = 0;
    const double ks = m.skin_stiffness_nmm_per_deg * (180.0 / kPi);
    for (int j = 0; j < n; ++j) e += 0.5 * ks * u[3 + j] * u[3 + j];
    out.skin_energy_nmm = e;
  }

  // commit
  s.head_mm = {u[0], u[1]};
  s.heading_rad = u[2];
  for (int j = 0; j < n; ++j) s.joint_deg[j] = rad2deg(u[3 + j]);
  s.qdot = udot;
  s.time_s += dt;
  return out;
}

}  // namespace undu
