#include "undusim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "undusim/kinematics.hpp"

namespace undu {

namespace {

double wrap_pi(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a <= -kPi) a += 2.0 * kPi;
  return a;
}

// Least-squares slope of y over x.
double regression_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0) return 0;
  return sxy / sxx;
}

Eigen::MatrixXd basis_matrix(const Eigen::VectorXd& s, double xi) {
  Eigen::MatrixXd M(s.size(), 2);
  for (int i = 0; i < s.size(); ++i) {
    M(i, 0) = std::sin(2.0 * kPi * xi * s[i]);
    M(i, 1) = std::cos(2.0 * kPi * xi * s[i]);
  }
  return M;
}

// Residual energy of the dominant plane against the basis at xi.
double subspace_misfit(const Eigen::MatrixXd& pcs, const Eigen::VectorXd& s, double xi) {
  const Eigen::MatrixXd M = basis_matrix(s, xi);
  const Eigen::Matrix2d mtm = M.transpose() * M;
  if (std::abs(mtm.determinant()) < 1e-10) return std::numeric_limits<double>::infinity();
  const Eigen::Matrix2d inv = mtm.inverse();
  double j = 0;
  for (int c = 0; c < pcs.cols(); ++c) {
    const Eigen::VectorXd v = pcs.col(c);
    const Eigen::VectorXd r = v - M * (inv * (M.transpose() * v));
    j += r.squaredNorm();
  }
  return j;
}

// Natural cubic spline through (u_i, y_i).
struct Spline {
  std::vector<double> u, y, m;  // knots, values, second derivatives

  void build(const std::vector<double>& uu, const std::vector<double>& yy) {
    u = uu;
    y = yy;
    const int n = int(u.size());
    m.assign(n, 0.0);
    if (n < 3) return;
    std::vector<double> a(n, 0), b(n, 0), c(n, 0), r(n, 0);
    b[0] = b[n - 1] = 1;
    for (int i = 1; i + 1 < n; ++i) {
      const double h0 = u[i] - u[i - 1], h1 = u[i + 1] - u[i];
      a[i] = h0;
      b[i] = 2 * (h0 + h1);
      c[i] = h1;
      r[i] = 6 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    for (int i = 1; i < n; ++i) {  // Thomas sweep
      const double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      r[i] -= w * r[i - 1];
    }
    m[n - 1] = r[n - 1] / b[n - 1];
    for (int i = n - 2; i >= 0; --i) m[i] = (r[i] - c[i] * m[i + 1]) / b[i];
  }

  int seg(double x) const {
    int lo = 0, hi = int(u.size()) - 2;
    while (lo < hi) {
      const int mid = (lo + hi + 1) / 2;
      if (u[size_t(mid)] <= x) lo = mid;
      else hi = mid - 1;
    }
    return lo;
  }
  double eval(double x) const {
    const int i = seg(x);
    const double h = u[i + 1] - u[i], t = x - u[i];
    const double c1 = (y[i + 1] - y[i]) / h - h * (2 * m[i] + m[i + 1]) / 6;
    return y[i] + c1 * t + 0.5 * m[i] * t * t + (m[i + 1] - m[i]) / (6 * h) * t * t * t;
  }
  double deriv(double x) const {
    const int i = seg(x);
    const double h = u[i + 1] - u[i], t = x - u[i];
    const double c1 = (y[i + 1] - y[i]) / h - h * (2 * m[i] + m[i + 1]) / 6;
    return c1 + m[i] * t + (m[i + 1] - m[i]) / (2 * h) * t * t;
  }
  double deriv2(double x) const {
    const int i = seg(x);
    const double h = u[i + 1] - u[i], t = x - u[i];
    return m[i] + (m[i + 1] - m[i]) / h * t;
  }
};

bool segments_intersect(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                        const Eigen::Vector2d& c, const Eigen::Vector2d& d) {
  auto cross = [](const Eigen::Vector2d& p, const Eigen::Vector2d& q) {
    return p.x() * q.y() - p.y() * q.x();
  };
  const double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

}  // namespace

CurvatureProfile curvature_from_record(const RunRecord& rec) {
  const int n = rec.n_joints;
  if (n < 1 || rec.samples.empty()) throw std::invalid_argument("record has no shape data");
  if (!(rec.link_length_mm > 0)) throw std::invalid_argument("record missing link length");
  CurvatureProfile p;
  p.s.resize(n);
  for (int j = 0; j < n; ++j) p.s[j] = double(j + 1) / n;
  p.time_s.resize(long(rec.samples.size()));
  p.kappa.resize(long(rec.samples.size()), n);
  for (size_t t = 0; t < rec.samples.size(); ++t) {
    p.time_s[long(t)] = rec.samples[t].time_s;
    for (int j = 0; j < n; ++j)
      p.kappa(long(t), j) = deg2rad(rec.samples[t].zeta_deg[j]) / rec.link_length_mm;
  }
  return p;
}

CurvatureProfile curvature_from_centerlines(const std::string& text, int stations) {
  if (stations < 3) throw std::invalid_argument("need at least 3 stations");
  std::map<long, std::map<long, Eigen::Vector2d>> frames;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tok;
    double v[4];
    bool ok = true;
    for (int i = 0; i < 4; ++i) {
      if (!std::getline(ls, tok, ',')) { ok = false; break; }
      char* end = nullptr;
      v[i] = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str()) { ok = false; break; }
    }
    if (!ok) {
      if (lineno == 1) continue;  // header row
      throw std::runtime_error("centerline CSV line " + std::to_string(lineno) +
                               ": expected frame,point,x,y");
    }
    frames[long(v[0])][long(v[1])] = {v[2], v[3]};
  }
  if (frames.empty()) throw std::runtime_error("centerline CSV: no data rows");

  CurvatureProfile p;
  p.s.resize(stations);
  for (int k = 0; k < stations; ++k) p.s[k] = double(k + 1) / stations;
  p.time_s.resize(long(frames.size()));
  p.kappa.resize(long(frames.size()), stations);

  long row = 0;
  for (const auto& [frame, pts_map] : frames) {
    std::vector<Eigen::Vector2d> pts;
    pts.reserve(pts_map.size());
    for (const auto& [idx, q] : pts_map) pts.push_back(q);
    if (pts.size() < 5)
      throw std::invalid_argument("centerline frame " + std::to_string(frame) +
                                  " has fewer than 5 points");
    for (size_t i = 0; i + 1 < pts.size(); ++i)
      for (size_t j = i + 2; j + 1 < pts.size(); ++j)
        if (segments_intersect(pts[i], pts[i + 1], pts[j], pts[j + 1]))
          throw std::invalid_argument("centerline frame " + std::to_string(frame) +
                                      " self-intersects");

    std::vector<double> u(pts.size(), 0), xs(pts.size()), ys(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
      if (i > 0) {
        const double d = (pts[i] - pts[i - 1]).norm();
        if (!(d > 0))
          throw std::invalid_argument("centerline frame " + std::to_string(frame) +
                                      " has duplicate consecutive points");
        u[i] = u[i - 1] + d;
      }
      xs[i] = pts[i].x();
      ys[i] = pts[i].y();
    }
    Spline sx, sy;
    sx.build(u, xs);
    sy.build(u, ys);

    // arc-length table from a dense sweep of the spline
    const int dense = int(pts.size()) * 25;
    std::vector<double> du(dense + 1), arc(dense + 1, 0.0);
    Eigen::Vector2d prev(sx.eval(0), sy.eval(0));
    du[0] = 0;
    for (int i = 1; i <= dense; ++i) {
      du[i] = u.back() * double(i) / dense;
      const Eigen::Vector2d q(sx.eval(du[i]), sy.eval(du[i]));
      arc[i] = arc[i - 1] + (q - prev).norm();
      prev = q;
    }
    const double total = arc.back();
    for (int k = 0; k < stations; ++k) {
      const double target = p.s[k] * total;
      const auto it = std::lower_bound(arc.begin(), arc.end(), target);
      double uu;
      if (it == arc.begin()) uu = du.front();
      else if (it == arc.end()) uu = du.back();
      else {
        const size_t hi = size_t(it - arc.begin());
        const double f = (target - arc[hi - 1]) / std::max(1e-300, arc[hi] - arc[hi - 1]);
        uu = du[hi - 1] + f * (du[hi] - du[hi - 1]);
      }
      const double x1 = sx.deriv(uu), y1 = sy.deriv(uu);
      const double x2 = sx.deriv2(uu), y2 = sy.deriv2(uu);
      const double speed2 = x1 * x1 + y1 * y1;
      if (!(speed2 > 1e-300))
        throw std::invalid_argument("centerline frame " + std::to_string(frame) +
                                    " is degenerate (zero tangent)");
      p.kappa(row, k) = (x1 * y2 - y1 * x2) / std::pow(speed2, 1.5);
    }
    p.time_s[row] = double(frame);
    ++row;
  }
  return p;
}

Eigen::Matrix<double, 2, Eigen::Dynamic> shape_projection_matrix(const Eigen::VectorXd& s,
                                                                 double xi) {
  if (!(xi > 0)) throw std::invalid_argument("xi must be > 0");
  const Eigen::MatrixXd M = basis_matrix(s, xi);
  const Eigen::Matrix2d mtm = M.transpose() * M;
  if (std::abs(mtm.determinant()) < 1e-10)
    throw std::invalid_argument("shape basis is singular at this xi/station grid");
  return mtm.inverse() * M.transpose();
}

ShapePoint project_shape(const Eigen::VectorXd& s, const Eigen::VectorXd& kappa_row, double xi) {
  if (s.size() != kappa_row.size()) throw std::invalid_argument("station/curvature size mismatch");
  const auto P = shape_projection_matrix(s, xi);
  const Eigen::Vector2d w = P * kappa_row;
  ShapePoint out;
  out.w1 = w[0];
  out.w2 = w[1];
  out.radius = w.norm();
  out.phase_rad = std::atan2(w[1], w[0]);
  out.residual = (kappa_row - basis_matrix(s, xi) * w).norm();
  return out;
}

ShapeFit fit_spatial_frequency(const CurvatureProfile& prof) {
  const long T = prof.kappa.rows(), S = prof.kappa.cols();
  if (T < 3 || S < 3) throw std::invalid_argument("curvature profile too small for a fit");
  const Eigen::RowVectorXd mean = prof.kappa.colwise().mean();
  const Eigen::MatrixXd X = prof.kappa.rowwise() - mean;
  const Eigen::MatrixXd C = X.transpose() * X / double(T);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
  if (eig.info() != Eigen::Success) throw std::runtime_error("eigen decomposition failed");
  const Eigen::VectorXd ev = eig.eigenvalues();  // ascending
  const double total = ev.sum();
  if (!(total > 1e-300)) throw std::invalid_argument("curvature data is rank-deficient");

  ShapeFit fit;
  fit.mode1 = eig.eigenvectors().col(S - 1);
  fit.mode2 = eig.eigenvectors().col(S - 2);
  fit.variance_captured = (ev[S - 1] + ev[S - 2]) / total;
  fit.low_variance_warning = fit.variance_captured < 0.85;

  Eigen::MatrixXd pcs(S, 2);
  pcs.col(0) = fit.mode1;
  pcs.col(1) = fit.mode2;

  const double lo = 0.05, hi = 3.0, step = 0.005;
  double best_xi = lo, best_j = std::numeric_limits<double>::infinity();
  for (double xi = lo; xi <= hi + 1e-12; xi += step) {
    const double j = subspace_misfit(pcs, prof.s, xi);
    if (j < best_j) {
      best_j = j;
      best_xi = xi;
    }
  }
  // golden refinement inside the winning cell
  double a = std::max(lo, best_xi - step), b = std::min(hi, best_xi + step);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = subspace_misfit(pcs, prof.s, x1), f2 = subspace_misfit(pcs, prof.s, x2);
  for (int it = 0; it < 200 && (b - a) > 1e-13; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = subspace_misfit(pcs, prof.s, x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = subspace_misfit(pcs, prof.s, x2);
    }
  }
  fit.xi = 0.5 * (a + b);
  return fit;
}

PhaseSeries phase_series(const CurvatureProfile& prof, double xi) {
  const long T = prof.kappa.rows();
  if (T < 1) throw std::invalid_argument("empty profile");
  PhaseSeries ps;
  ps.time_s = prof.time_s;
  ps.phi_rad.resize(T);
  ps.radius.resize(T);
  ps.valid.assign(size_t(T), 0);

  const auto P = shape_projection_matrix(prof.s, xi);
  Eigen::VectorXd raw(T);
  double rmax = 0;
  for (long t = 0; t < T; ++t) {
    const Eigen::Vector2d w = P * prof.kappa.row(t).transpose();
    ps.radius[t] = w.norm();
    raw[t] = std::atan2(w[1], w[0]);
    rmax = std::max(rmax, ps.radius[t]);
  }
  const double floor_r = std::max(1e-12, 0.02 * rmax);
  double phi = 0;
  bool have_prev = false;
  double prev_raw = 0;
  for (long t = 0; t < T; ++t) {
    if (ps.radius[t] >= floor_r) {
      if (have_prev) phi += wrap_pi(raw[t] - prev_raw);
      else phi = raw[t];
      prev_raw = raw[t];
      have_prev = true;
      ps.valid[size_t(t)] = 1;
    }
    ps.phi_rad[t] = phi;  // carried forward when the orbit collapses
  }
  return ps;
}

EfficiencyReport wave_efficiency(const RunRecord& rec) {
  if (rec.samples.size() < 4) throw std::invalid_argument("record has too few samples");
  if (!(rec.omega_hz > 0)) throw std::invalid_argument("record missing wave frequency");
  const double T0 = 1.0 / rec.omega_hz;
  const double t_begin = rec.samples.front().time_s, t_end = rec.samples.back().time_s;
  const long avail = long((t_end - t_begin + 1e-9) / T0);
  if (avail < 3)
    throw std::invalid_argument("wave efficiency needs at least 3 full cycles of data");
  const long K = std::min(avail, std::max<long>(3, avail - 1));
  const double t1 = t_end, t0 = t1 - double(K) * T0;

  auto interp = [&](double t, auto&& get) {
    const auto& smp = rec.samples;
    if (t <= smp.front().time_s) return get(smp.front());
    if (t >= smp.back().time_s) return get(smp.back());
    size_t lo = 0, hi = smp.size() - 1;
    while (lo + 1 < hi) {
      const size_t mid = (lo + hi) / 2;
      if (smp[mid].time_s <= t) lo = mid;
      else hi = mid;
    }
    const double f = (t - smp[lo].time_s) / std::max(1e-300, smp[hi].time_s - smp[lo].time_s);
    return Eigen::Vector2d(get(smp[lo]) + f * (get(smp[hi]) - get(smp[lo])));
  };
  auto com_of = [](const RunSample& s) { return s.com; };
  auto head_of = [](const RunSample& s) { return Eigen::Vector2d(s.link_x[0], s.link_y[0]); };

  EfficiencyReport rep;
  rep.window_start_s = t0;
  rep.window_end_s = t1;
  const double dur = double(K) * T0;
  rep.v_com_mm_s = (interp(t1, com_of) - interp(t0, com_of)).norm() / dur;
  rep.v_head_mm_s = (interp(t1, head_of) - interp(t0, head_of)).norm() / dur;

  const CurvatureProfile prof = curvature_from_record(rec);
  double xi = rec.xi;
  double f_hz = rec.omega_hz;
  bool fallback = true;
  const double cmd_radius =
      rec.amplitude_deg > 0 ? deg2rad(rec.amplitude_deg) / rec.link_length_mm : 0;
  try {
    const ShapeFit fit = fit_spatial_frequency(prof);
    const PhaseSeries ps = phase_series(prof, fit.xi);
    std::vector<double> ts, ph;
    double rsum = 0;
    long rn = 0;
    for (long t = 0; t < ps.time_s.size(); ++t) {
      if (ps.time_s[t] < t0 - 1e-9 || ps.time_s[t] > t1 + 1e-9) continue;
      rsum += ps.radius[t];
      ++rn;
      if (ps.valid[size_t(t)]) {
        ts.push_back(ps.time_s[t]);
        ph.push_back(ps.phi_rad[t]);
      }
    }
    const double mean_r = rn > 0 ? rsum / double(rn) : 0;
    if (ts.size() >= 8 && (cmd_radius <= 0 || mean_r > 0.05 * cmd_radius)) {
      const double slope = regression_slope(ts, ph);
      const double fm = std::abs(slope) / (2.0 * kPi);
      if (fm > 0.05 * rec.omega_hz) {
        xi = fit.xi;
        f_hz = fm;
        fallback = false;
      }
    }
  } catch (const std::exception&) {
    // degenerate shape data: stay on the commanded wave parameters
  }
  rep.xi_used = xi;
  rep.freq_hz = f_hz;
  rep.commanded_fallback = fallback;
  rep.wavelength_mm = rec.body_length_mm / xi;
  rep.v_wave_mm_s = f_hz * rep.wavelength_mm;
  rep.eta = rep.v_wave_mm_s > 0 ? rep.v_com_mm_s / rep.v_wave_mm_s : 0;
  rep.eta_head = rep.v_wave_mm_s > 0 ? rep.v_head_mm_s / rep.v_wave_mm_s : 0;
  return rep;
}

TransportReport cost_of_transport(const RunRecord& rec, double gravity) {
  TransportReport rep;
  rep.work_nmm = rec.cable_work_pos_nmm;
  rep.distance_mm = rec.com_path_mm;
  const double mass = (rec.n_joints + 1) * rec.link_mass_kg;
  rep.defined = rep.distance_mm >= 0.01 * rec.body_length_mm && mass > 0 && gravity > 0;
  if (rep.defined) rep.c_mt = rep.work_nmm / (mass * gravity * rep.distance_mm);
  return rep;
}

std::vector<HeadEventClass> classify_head_events(const RunRecord& rec, double pause_s) {
  std::vector<HeadEventClass> out(rec.episodes.size(), HeadEventClass::gliding);
  if (rec.episodes.empty()) return out;
  if (!(rec.omega_hz > 0)) throw std::invalid_argument("record missing wave frequency");

  const CurvatureProfile prof = curvature_from_record(rec);
  double xi = rec.xi;
  try {
    xi = fit_spatial_frequency(prof).xi;
  } catch (const std::exception&) {
  }
  const PhaseSeries ps = phase_series(prof, xi);
  const double nominal = 2.0 * kPi * rec.omega_hz;
  const double pad = 0.25 / rec.omega_hz;

  for (size_t e = 0; e < rec.episodes.size(); ++e) {
    const double w0 = rec.episodes[e].t_start - pad;
    const double w1 = rec.episodes[e].t_end + pad;
    double stall = 0, longest = 0;
    double prev_t = 0, prev_phi = 0;
    bool have_prev = false;
    for (long t = 0; t < ps.time_s.size(); ++t) {
      if (ps.time_s[t] < w0 || ps.time_s[t] > w1 || !ps.valid[size_t(t)]) continue;
      if (have_prev) {
        const double dt = ps.time_s[t] - prev_t;
        const double rate = dt > 0 ? (ps.phi_rad[t] - prev_phi) / dt : 0;
        if (std::abs(rate) < 0.1 * nominal) stall += dt;
        else stall = 0;
        longest = std::max(longest, stall);
      }
      prev_t = ps.time_s[t];
      prev_phi = ps.phi_rad[t];
      have_prev = true;
    }
    if (longest >= pause_s) out[e] = HeadEventClass::buckling;
  }
  return out;
}

EventCounts count_head_events(const std::vector<RunRecord>& recs, double pause_s) {
  EventCounts c;
  for (const RunRecord& r : recs) {
    const std::vector<HeadEventClass> cls = classify_head_events(r, pause_s);
    for (HeadEventClass hc : cls)
      if (hc == HeadEventClass::buckling) ++c.buckling;
      else ++c.gliding;
  }
  return c;
}

CollisionAngleStats collision_angle_stats(const std::vector<RunRecord>& recs) {
  CollisionAngleStats st;
  int total = 0;
  for (const RunRecord& r : recs) total += int(r.episodes.size());
  if (total < 30)
    throw std::invalid_argument("collision statistics need at least 30 episodes, have " +
                                std::to_string(total));
  for (const RunRecord& r : recs)
    for (const CollisionEpisode& ep : r.episodes) {
      const int bin = std::clamp(int(ep.angle_at_peak_deg / 10.0), 0, 17);
      if (ep.triggered_reversal) {
        st.reverse[size_t(bin)] += 1;
        ++st.reverse_n;
      } else {
        st.forward[size_t(bin)] += 1;
        ++st.forward_n;
      }
    }
  for (double& v : st.forward)
    if (st.forward_n > 0) v /= st.forward_n;
  for (double& v : st.reverse)
    if (st.reverse_n > 0) v /= st.reverse_n;
  return st;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("spearman needs two equal series of length >= 2");
  auto ranks = [](const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n, 0);
    size_t i = 0;
    while (i < n) {
      size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * double(i + j) + 1.0;  // average rank, 1-based
      for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(x), ry = ranks(y);
  double mx = 0, my = 0;
  for (size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= double(rx.size());
  my /= double(ry.size());
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return 0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace undu
