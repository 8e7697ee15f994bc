#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <undusim/analysis.hpp>

using namespace undu;

namespace {

// record of a clean traveling wave with the center of mass gliding at v_com
RunRecord make_wave_record(double duration_s, double dt, double v_com,
                           double amplitude = 46.0, double xi = 0.81, double omega = 0.25) {
  RunRecord rec;
  rec.n_joints = 7;
  rec.link_length_mm = 107.5;
  rec.body_length_mm = 8 * 107.5;
  rec.link_mass_kg = 0.55;
  rec.amplitude_deg = amplitude;
  rec.xi = xi;
  rec.omega_hz = omega;
  rec.G = 0.75;
  rec.l0 = 1.15;
  for (double t = 0; t <= duration_s + 1e-9; t += dt) {
    RunSample s;
    s.time_s = t;
    s.zeta_deg.resize(7);
    for (int j = 0; j < 7; ++j)
      s.zeta_deg[j] =
          amplitude * std::sin(2.0 * kPi * xi * (j + 1) / 7.0 - 2.0 * kPi * omega * t);
    s.alpha_deg = s.zeta_deg;
    s.com = {v_com * t, 0.0};
    s.link_x = Eigen::VectorXd::Constant(8, v_com * t + 430.0);
    s.link_y = Eigen::VectorXd::Zero(8);
    s.link_theta = Eigen::VectorXd::Zero(8);
    rec.samples.push_back(std::move(s));
  }
  rec.duration_s = duration_s;
  rec.cycles_completed = duration_s * omega;
  return rec;
}

}  // namespace

TEST_CASE("joint angles become curvature at the joint stations") {
  RunRecord rec;
  rec.n_joints = 2;
  rec.link_length_mm = 107.5;
  rec.body_length_mm = 3 * 107.5;
  rec.omega_hz = 0.25;
  RunSample s;
  s.time_s = 1.5;
  s.zeta_deg.resize(2);
  s.zeta_deg << 10.0, -30.0;
  rec.samples.push_back(s);

  const CurvatureProfile prof = curvature_from_record(rec);
  REQUIRE(prof.s.size() == 2);
  REQUIRE(prof.kappa.rows() == 1);
  CHECK(prof.s[0] == doctest::Approx(0.5));
  CHECK(prof.s[1] == doctest::Approx(1.0));
  CHECK(prof.time_s[0] == doctest::Approx(1.5));
  CHECK(prof.kappa(0, 0) == doctest::Approx(deg2rad(10.0) / 107.5).epsilon(1e-12));
  CHECK(prof.kappa(0, 1) == doctest::Approx(deg2rad(-30.0) / 107.5).epsilon(1e-12));
}

TEST_CASE("shape projection recovers in-plane coordinates exactly") {
  const int S = 9;
  Eigen::VectorXd s(S), row(S);
  for (int k = 0; k < S; ++k) s[k] = double(k + 1) / S;
  const double xi = 0.81, w1 = 0.013, w2 = -0.007;
  for (int k = 0; k < S; ++k)
    row[k] = w1 * std::sin(2.0 * kPi * xi * s[k]) + w2 * std::cos(2.0 * kPi * xi * s[k]);

  const ShapePoint p = project_shape(s, row, xi);
  CHECK(p.w1 == doctest::Approx(w1).epsilon(1e-12));
  CHECK(p.w2 == doctest::Approx(w2).epsilon(1e-12));
  CHECK(p.radius == doctest::Approx(std::hypot(w1, w2)).epsilon(1e-12));
  CHECK(p.phase_rad == doctest::Approx(std::atan2(w2, w1)).epsilon(1e-12));
  CHECK(p.residual < 1e-14);

  CHECK_THROWS_AS(project_shape(s, row, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(shape_projection_matrix(s, -1.0), std::invalid_argument);
}

TEST_CASE("spatial frequency comes back from a synthetic traveling wave") {
  const RunRecord rec = make_wave_record(16.0, 0.125, 0.0);
  const CurvatureProfile prof = curvature_from_record(rec);
  const ShapeFit fit = fit_spatial_frequency(prof);
  CHECK(fit.xi == doctest::Approx(0.81).epsilon(1e-6));
  CHECK(fit.variance_captured > 0.999);
  CHECK(!fit.low_variance_warning);

  // orbit of a clean wave is a circle: radius nearly constant
  const PhaseSeries ps = phase_series(prof, fit.xi);
  double rmin = 1e300, rmax = 0;
  for (long t = 0; t < ps.radius.size(); ++t) {
    REQUIRE(bool(ps.valid[size_t(t)]));
    rmin = std::min(rmin, ps.radius[t]);
    rmax = std::max(rmax, ps.radius[t]);
  }
  CHECK((rmax - rmin) / rmax < 0.05);

  // retrograde wave: phase falls at the commanded angular rate
  const long T = ps.time_s.size();
  const double slope =
      (ps.phi_rad[T - 1] - ps.phi_rad[0]) / (ps.time_s[T - 1] - ps.time_s[0]);
  CHECK(slope == doctest::Approx(-2.0 * kPi * 0.25).epsilon(1e-6));

  CurvatureProfile tiny;
  tiny.s = prof.s;
  tiny.time_s = Eigen::VectorXd::Zero(2);
  tiny.kappa = Eigen::MatrixXd::Zero(2, prof.s.size());
  CHECK_THROWS_AS(fit_spatial_frequency(tiny), std::invalid_argument);
}

TEST_CASE("wave efficiency measures transport against the measured wave") {
  const double v = 10.0;
  const RunRecord rec = make_wave_record(16.0, 0.125, v);
  const EfficiencyReport rep = wave_efficiency(rec);
  CHECK(!rep.commanded_fallback);
  CHECK(rep.freq_hz == doctest::Approx(0.25).epsilon(1e-3));
  CHECK(rep.xi_used == doctest::Approx(0.81).epsilon(1e-3));
  CHECK(rep.wavelength_mm == doctest::Approx(860.0 / rep.xi_used).epsilon(1e-9));
  CHECK(rep.v_com_mm_s == doctest::Approx(v).epsilon(1e-9));
  const double expected = v / (rep.freq_hz * rep.wavelength_mm);
  CHECK(rep.eta == doctest::Approx(expected).epsilon(1e-12));
  CHECK(rep.eta == doctest::Approx(v / (0.25 * 860.0 / 0.81)).epsilon(1e-2));
  // the averaging window covers the last three full cycles
  CHECK(rep.window_end_s == doctest::Approx(16.0));
  CHECK(rep.window_start_s == doctest::Approx(4.0));
  // head estimator sees the same uniform drift
  CHECK(rep.eta_head == doctest::Approx(rep.eta).epsilon(1e-9));

  // doubling the speed doubles the efficiency
  const EfficiencyReport fast = wave_efficiency(make_wave_record(16.0, 0.125, 2 * v));
  CHECK(fast.eta == doctest::Approx(2.0 * rep.eta).epsilon(1e-6));
}

TEST_CASE("wave efficiency refuses short records and survives flat ones") {
  CHECK_THROWS_AS(wave_efficiency(make_wave_record(8.0, 0.125, 5.0)), std::invalid_argument);

  // a limp body has no orbit to measure: falls back to the commanded wave
  RunRecord rec = make_wave_record(16.0, 0.125, 5.0);
  for (RunSample& s : rec.samples) s.zeta_deg.setZero();
  const EfficiencyReport rep = wave_efficiency(rec);
  CHECK(rep.commanded_fallback);
  CHECK(rep.freq_hz == doctest::Approx(0.25));
  CHECK(rep.xi_used == doctest::Approx(0.81));
  CHECK(rep.eta == doctest::Approx(5.0 / (0.25 * 860.0 / 0.81)).epsilon(1e-9));
}

TEST_CASE("cost of transport normalizes cable work by weight and path") {
  RunRecord rec = make_wave_record(16.0, 0.125, 10.0);
  rec.cable_work_pos_nmm = 1000.0;
  rec.com_path_mm = 100.0;
  const TransportReport rep = cost_of_transport(rec);
  REQUIRE(rep.defined);
  const double mass = 8 * 0.55;
  CHECK(rep.c_mt == doctest::Approx(1000.0 / (mass * 9.81 * 100.0)).epsilon(1e-12));

  rec.com_path_mm = 0.5;  // under 1% of body length: undefined
  CHECK(!cost_of_transport(rec).defined);
}

TEST_CASE("head events split into gliding and buckling by phase stalls") {
  const double omega = 0.25, dt = 0.125;
  RunRecord rec;
  rec.n_joints = 7;
  rec.link_length_mm = 107.5;
  rec.body_length_mm = 860.0;
  rec.link_mass_kg = 0.55;
  rec.amplitude_deg = 46.0;
  rec.xi = 0.81;
  rec.omega_hz = omega;
  for (double t = 0; t <= 20.0 + 1e-9; t += dt) {
    // wave advances except while frozen between 8 s and 10 s
    const double tw = t < 8.0 ? t : (t < 10.0 ? 8.0 : t - 2.0);
    RunSample s;
    s.time_s = t;
    s.zeta_deg.resize(7);
    for (int j = 0; j < 7; ++j)
      s.zeta_deg[j] = 46.0 * std::sin(2.0 * kPi * 0.81 * (j + 1) / 7.0 - 2.0 * kPi * omega * tw);
    s.com = {0.0, 0.0};
    s.link_x = Eigen::VectorXd::Zero(8);
    s.link_y = Eigen::VectorXd::Zero(8);
    rec.samples.push_back(std::move(s));
  }
  CollisionEpisode glide;
  glide.t_start = 2.0;
  glide.t_end = 3.0;
  rec.episodes.push_back(glide);
  CollisionEpisode buckle;
  buckle.t_start = 8.5;
  buckle.t_end = 9.5;
  rec.episodes.push_back(buckle);

  const auto classes = classify_head_events(rec);
  REQUIRE(classes.size() == 2);
  CHECK(classes[0] == HeadEventClass::gliding);
  CHECK(classes[1] == HeadEventClass::buckling);

  const EventCounts counts = count_head_events({rec});
  CHECK(counts.buckling == 1);
  CHECK(counts.gliding == 1);
  CHECK(counts.fraction() == doctest::Approx(0.5));
}

TEST_CASE("collision angle statistics bin by outcome and normalize per class") {
  RunRecord rec = make_wave_record(16.0, 0.5, 0.0);
  for (int i = 0; i < 20; ++i) {
    CollisionEpisode e;
    e.angle_at_peak_deg = 72.0;
    e.triggered_reversal = false;
    rec.episodes.push_back(e);
  }
  for (int i = 0; i < 10; ++i) {
    CollisionEpisode e;
    e.angle_at_peak_deg = 91.0;
    e.triggered_reversal = true;
    rec.episodes.push_back(e);
  }
  const CollisionAngleStats st = collision_angle_stats({rec});
  CHECK(st.forward_n == 20);
  CHECK(st.reverse_n == 10);
  CHECK(st.forward[7] == doctest::Approx(1.0));
  CHECK(st.reverse[9] == doctest::Approx(1.0));
  double fsum = 0, rsum = 0;
  for (int b = 0; b < 18; ++b) {
    fsum += st.forward[b];
    rsum += st.reverse[b];
  }
  CHECK(fsum == doctest::Approx(1.0));
  CHECK(rsum == doctest::Approx(1.0));

  rec.episodes.pop_back();  // 29 episodes: below the evidence floor
  CHECK_THROWS_AS(collision_angle_stats({rec}), std::invalid_argument);
}

TEST_CASE("rank correlation handles monotone data and ties") {
  CHECK(spearman({1, 2, 3, 4, 5}, {2, 4, 6, 8, 10}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4, 5}, {10, 8, 6, 4, 2}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 2, 3, 4}, {1, 4, 2, 8}) == doctest::Approx(0.8));
  // tied pair takes the average rank
  CHECK(spearman({1, 2, 2, 3}, {1, 2, 3, 4}) == doctest::Approx(3.0 / std::sqrt(10.0)));
  CHECK(spearman({1, 1, 1}, {1, 2, 3}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(spearman({1.0}, {1.0}), std::invalid_argument);
}

TEST_CASE("tracked centerlines of a circular arc give its curvature") {
  std::ostringstream csv;
  csv << "frame,point,x,y\n";
  const double R = 200.0;
  for (int f = 0; f < 2; ++f)
    for (int i = 0; i < 40; ++i) {
      const double th = 0.5 * kPi * i / 39.0;
      csv << f << "," << i << "," << R * std::cos(th) << "," << R * std::sin(th) << "\n";
    }
  const CurvatureProfile prof = curvature_from_centerlines(csv.str());
  REQUIRE(prof.kappa.rows() == 2);
  REQUIRE(prof.kappa.cols() == 100);
  CHECK(prof.time_s[0] == doctest::Approx(0.0));
  CHECK(prof.time_s[1] == doctest::Approx(1.0));
  for (int k = 15; k < 85; ++k)
    CHECK(prof.kappa(0, k) == doctest::Approx(1.0 / R).epsilon(0.02));
}

TEST_CASE("degenerate centerline inputs are rejected") {
  // straight line: near-zero curvature everywhere
  std::ostringstream line;
  for (int i = 0; i < 10; ++i) line << "0," << i << "," << 10.0 * i << ",0\n";
  const CurvatureProfile flat = curvature_from_centerlines(line.str());
  CHECK(flat.kappa.cwiseAbs().maxCoeff() < 1e-9);

  CHECK_THROWS_AS(curvature_from_centerlines("0,0,0,0\n0,1,1,0\n0,2,2,0\n0,3,3,0\n"),
                  std::invalid_argument);  // four points only

  // a path that crosses itself is not a body centerline
  const std::string crossing =
      "0,0,0,0\n0,1,10,0\n0,2,10,5\n0,3,5,5\n0,4,5,-5\n";
  CHECK_THROWS_AS(curvature_from_centerlines(crossing), std::invalid_argument);

  const std::string dup = "0,0,0,0\n0,1,1,0\n0,2,1,0\n0,3,2,0\n0,4,3,0\n";
  CHECK_THROWS_AS(curvature_from_centerlines(dup), std::invalid_argument);

  // a malformed row past the header names its line
  try {
    curvature_from_centerlines("frame,point,x,y\n0,0,0,0\nnot,a,row,here\n");
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(curvature_from_centerlines(""), std::runtime_error);
}
