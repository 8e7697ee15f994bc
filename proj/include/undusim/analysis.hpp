#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "undusim/record.hpp"

// Shape-space reduction of body curvature, phase tracking, head-event
// classification, and the run-level performance metrics.

namespace undu {

// Signed curvature kappa(s, t) on a fixed station grid s in (0, 1].
struct CurvatureProfile {
  Eigen::VectorXd s;        // stations, size S
  Eigen::VectorXd time_s;   // sample times, size T
  Eigen::MatrixXd kappa;    // T x S, 1/mm
};

// Joint angles over link length give the discrete curvature at stations
// j/N, j = 1..N.
CurvatureProfile curvature_from_record(const RunRecord& rec);

// Tracked centerline import: CSV rows `frame,point,x,y` (header optional).
// Each frame is splined, resampled to `stations` arc-length points, and
// differentiated for curvature. Frames become the time axis.
CurvatureProfile curvature_from_centerlines(const std::string& csv_text, int stations = 100);

// Least-squares projector onto sin/cos(2 pi xi s): w = P * kappa_row.
Eigen::Matrix<double, 2, Eigen::Dynamic> shape_projection_matrix(const Eigen::VectorXd& s,
                                                                 double xi);

struct ShapePoint {
  double w1 = 0, w2 = 0;
  double radius = 0;     // sqrt(w1^2 + w2^2)
  double phase_rad = 0;  // atan2(w2, w1)
  double residual = 0;   // reconstruction error norm
};

ShapePoint project_shape(const Eigen::VectorXd& s, const Eigen::VectorXd& kappa_row, double xi);

struct ShapeFit {
  double xi = 0;
  double variance_captured = 0;  // first two principal components
  bool low_variance_warning = false;
  Eigen::VectorXd mode1, mode2;  // principal shapes over s
};

// PCA over time of the curvature rows, then xi from fitting the two basis
// functions to the dominant plane (grid scan + golden refinement).
ShapeFit fit_spatial_frequency(const CurvatureProfile& prof);

struct PhaseSeries {
  Eigen::VectorXd time_s;
  Eigen::VectorXd phi_rad;  // unwrapped
  Eigen::VectorXd radius;
  std::vector<std::uint8_t> valid;  // radius above the noise floor
};

PhaseSeries phase_series(const CurvatureProfile& prof, double xi);

struct EfficiencyReport {
  double eta = 0;
  double v_com_mm_s = 0;
  double v_head_mm_s = 0;  // head-based alternative estimator
  double eta_head = 0;
  double v_wave_mm_s = 0;
  double freq_hz = 0;
  double wavelength_mm = 0;
  double xi_used = 0;
  bool commanded_fallback = false;  // degenerate orbit: commanded f, xi used
  double window_start_s = 0, window_end_s = 0;
};

// v_com over an integer number of gait cycles against the measured wave
// speed f * (L / xi). Throws if the record spans fewer than 3 cycles.
EfficiencyReport wave_efficiency(const RunRecord& rec);

struct TransportReport {
  double c_mt = 0;
  bool defined = false;  // com path >= 1% body length
  double work_nmm = 0;
  double distance_mm = 0;
};

TransportReport cost_of_transport(const RunRecord& rec, double gravity_mps2 = 9.81);

enum class HeadEventClass { gliding, buckling };

// Buckling iff the wave phase stalls (|dphi/dt| under 10% of nominal)
// longer than pause_s within the episode window.
std::vector<HeadEventClass> classify_head_events(const RunRecord& rec, double pause_s = 0.5);

struct EventCounts {
  int buckling = 0;
  int gliding = 0;
  double fraction() const {
    const int n = buckling + gliding;
    return n > 0 ? double(buckling) / n : 0.0;
  }
};

EventCounts count_head_events(const std::vector<RunRecord>& recs, double pause_s = 0.5);

// 10-degree bins over [0, 180], split by post-collision outcome (episodes
// that triggered a reversal vs ones that did not). Normalized per class.
struct CollisionAngleStats {
  std::array<double, 18> forward{};
  std::array<double, 18> reverse{};
  int forward_n = 0;
  int reverse_n = 0;
};

// Throws if the pooled records hold fewer than 30 episodes.
CollisionAngleStats collision_angle_stats(const std::vector<RunRecord>& recs);

// Rank correlation with average ranks on ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace undu
