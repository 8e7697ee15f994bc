#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "undusim/analysis.hpp"
#include "undusim/characterization.hpp"
#include "undusim/config.hpp"
#include "undusim/csv.hpp"
#include "undusim/record.hpp"
#include "undusim/sim.hpp"
#include "undusim/svg.hpp"

namespace {

using namespace undu;

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string hash_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Output directory: --out flag beats UNDUSIM_OUT beats ./out.
std::string resolve_out(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("UNDUSIM_OUT"); env && *env) return env;
  return "out";
}

Json load_or_default(const std::string& path) {
  if (path.empty()) return default_config();
  return deep_merge(default_config(), load_config(path));
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
  return s.empty() ? "unnamed" : s;
}

Json metrics_json(const RunRecord& rec) {
  Json m;
  m["end_state"] = to_string(rec.end_state);
  m["diagnostic"] = rec.diagnostic;
  m["environment"] = rec.env_label;
  m["G"] = rec.G;
  m["seed"] = rec.seed;
  m["trial"] = rec.trial;
  m["cycles_completed"] = rec.cycles_completed;
  m["duration_s"] = rec.duration_s;
  m["com_path_mm"] = rec.com_path_mm;
  m["cable_work_pos_nmm"] = rec.cable_work_pos_nmm;
  m["cable_work_net_nmm"] = rec.cable_work_net_nmm;
  m["friction_dissipation_nmm"] = rec.friction_dissipation_nmm;
  m["reversal_count"] = rec.reversals.size();
  m["episode_count"] = rec.episodes.size();
  m["penetration_warning"] = rec.penetration_warning;
  try {
    const EfficiencyReport er = wave_efficiency(rec);
    m["eta"] = er.eta;
    m["eta_head"] = er.eta_head;
    m["v_com_mm_s"] = er.v_com_mm_s;
    m["wave_freq_hz"] = er.freq_hz;
    m["xi_used"] = er.xi_used;
    m["commanded_fallback"] = er.commanded_fallback;
  } catch (const std::exception& e) {
    m["eta"] = nullptr;
    m["eta_error"] = e.what();
  }
  const TransportReport tr = cost_of_transport(rec);
  m["c_mt"] = tr.defined ? Json(tr.c_mt) : Json(nullptr);
  m["c_mt_defined"] = tr.defined;
  if (!rec.episodes.empty()) {
    try {
      const EventCounts ec = count_head_events({rec});
      m["buckling_events"] = ec.buckling;
      m["gliding_events"] = ec.gliding;
    } catch (const std::exception&) {
    }
  }
  return m;
}

void write_orbit_and_phase(const CurvatureProfile& prof, const std::string& out_dir,
                           const std::string& stem, std::uint64_t hash) {
  ShapeFit fit;
  try {
    fit = fit_spatial_frequency(prof);
  } catch (const std::exception&) {
    return;  // too degenerate to plot
  }
  const auto P = shape_projection_matrix(prof.s, fit.xi);
  LineSeries orbit;
  orbit.markers = false;
  orbit.label = "xi = " + fmt(fit.xi);
  for (long t = 0; t < prof.kappa.rows(); ++t) {
    const Eigen::Vector2d w = P * prof.kappa.row(t).transpose();
    orbit.x.push_back(w[0]);
    orbit.y.push_back(w[1]);
  }
  PlotOptions po;
  po.title = "Shape-space orbit";
  po.xlabel = "w1 (1/mm)";
  po.ylabel = "w2 (1/mm)";
  po.provenance_hash = hash;
  atomic_write_file(out_dir + "/" + stem + ".orbit.svg", render_line_plot({orbit}, po));

  const PhaseSeries ps = phase_series(prof, fit.xi);
  LineSeries phase;
  phase.markers = false;
  for (long t = 0; t < ps.time_s.size(); ++t) {
    if (!ps.valid[size_t(t)]) continue;
    phase.x.push_back(ps.time_s[t]);
    phase.y.push_back(ps.phi_rad[t]);
  }
  PlotOptions pp;
  pp.title = "Wave phase";
  pp.xlabel = "time (s)";
  pp.ylabel = "phase (rad)";
  pp.provenance_hash = hash;
  if (!phase.x.empty())
    atomic_write_file(out_dir + "/" + stem + ".phase.svg", render_line_plot({phase}, pp));
}

std::string environment_svg(const Environment& env, std::uint64_t hash) {
  const Region& r = env.region;
  const double scale = 900.0 / std::max(1.0, r.length());
  const double w = r.length() * scale + 40, h = r.width() * scale + 40;
  auto X = [&](double x) { return 20 + (x - r.xmin) * scale; };
  auto Y = [&](double y) { return h - 20 - (y - r.ymin) * scale; };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(w) << "\" height=\"" << fmt(h)
     << "\" viewBox=\"0 0 " << fmt(w) << ' ' << fmt(h) << "\">\n";
  os << "<metadata id=\"provenance\">config-hash:" << hash_hex(hash) << "</metadata>\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<rect x=\"" << fmt(X(r.xmin)) << "\" y=\"" << fmt(Y(r.ymax)) << "\" width=\""
     << fmt(r.length() * scale) << "\" height=\"" << fmt(r.width() * scale)
     << "\" fill=\"#f8f8f8\" stroke=\"#444\"/>\n";
  for (const Post& p : env.posts)
    os << "<circle cx=\"" << fmt(X(p.center_mm.x())) << "\" cy=\"" << fmt(Y(p.center_mm.y()))
       << "\" r=\"" << fmt(p.radius_mm * scale) << "\" fill=\"#9ecae1\" stroke=\"#3182bd\"/>\n";
  for (const Wall& wl : env.walls) {
    const Eigen::Vector2d t(-wl.normal.y(), wl.normal.x());
    const Eigen::Vector2d a = wl.point_mm - 4000 * t, b = wl.point_mm + 4000 * t;
    os << "<line x1=\"" << fmt(X(a.x())) << "\" y1=\"" << fmt(Y(a.y())) << "\" x2=\""
       << fmt(X(b.x())) << "\" y2=\"" << fmt(Y(b.y()))
       << "\" stroke=\"#d62728\" stroke-width=\"3\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

int exit_code_for(EndState e) {
  switch (e) {
    case EndState::exited: return 0;
    case EndState::stuck: return 3;
    case EndState::aborted: return 4;
  }
  return 4;
}

// ---------------------------------------------------------------- run

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<int> trial, const std::string& out_flag) {
  Json cfg = load_or_default(config_path);
  if (seed) cfg["seed"] = *seed;
  if (trial) cfg["trial"] = *trial;
  const std::uint64_t hash = config_hash(cfg);

  const TrialSetup setup = trial_setup_from_config(cfg);
  const Environment env = environment_from_config(cfg, setup);
  const std::string out = resolve_out(out_flag);

  const RunRecord rec = run_trial(setup, env);

  const std::string base = sanitize(env.label) + "_G" + fmt(setup.G) + "_s" +
                           std::to_string(setup.seed) + "_t" + std::to_string(setup.trial);
  atomic_write_file(out + "/" + base + ".csv", run_record_to_csv(rec));
  Json m = metrics_json(rec);
  m["config_hash"] = hash_hex(hash);
  atomic_write_file(out + "/" + base + ".json", m.dump(2) + "\n");
  write_orbit_and_phase(curvature_from_record(rec), out, base, hash);

  std::cout << base << ": " << to_string(rec.end_state) << " (" << rec.diagnostic << "), cycles "
            << fmt(rec.cycles_completed) << ", eta "
            << (m["eta"].is_null() ? std::string("n/a") : fmt(m["eta"].get<double>())) << "\n";
  return exit_code_for(rec.end_state);
}

// ---------------------------------------------------------------- sweep

struct SweepCell {
  int env_index = 0, g_index = 0, trial = 0;
  Json cfg;
  std::string env_label;
  double G = 0;
};

int cmd_sweep(const std::string& config_path, std::optional<std::uint64_t> seed, int jobs,
              const std::string& out_flag, bool keep_records) {
  Json cfg = load_or_default(config_path);
  if (seed) cfg["seed"] = *seed;
  const std::uint64_t hash = config_hash(cfg);
  const std::string out = resolve_out(out_flag);

  const Json* grid = config_find(cfg, "sweep.G_grid");
  if (!grid || !grid->is_array() || grid->empty())
    throw std::runtime_error("config: field 'sweep.G_grid' must be a nonempty array");
  const long trials = config_integer(cfg, "sweep.trials", 3);
  if (trials < 1) throw std::runtime_error("config: field 'sweep.trials' must be >= 1");

  std::vector<Json> env_overrides;
  if (const Json* envs = config_find(cfg, "sweep.environments")) {
    if (!envs->is_array() || envs->empty())
      throw std::runtime_error("config: field 'sweep.environments' must be a nonempty array");
    for (const Json& e : *envs) env_overrides.push_back(e);
  } else {
    env_overrides.push_back(Json::object());
  }

  // Enumerate every cell up front; validation errors surface before any run.
  std::vector<SweepCell> cells;
  for (size_t ei = 0; ei < env_overrides.size(); ++ei) {
    Json env_cfg = deep_merge(cfg, env_overrides[ei]);
    const TrialSetup probe = trial_setup_from_config(env_cfg);
    const Environment env = environment_from_config(env_cfg, probe);
    for (long gi = 0; gi < long(grid->size()); ++gi) {
      if (!(*grid)[size_t(gi)].is_number())
        throw std::runtime_error("config: field 'sweep.G_grid' must hold numbers");
      const double g = (*grid)[size_t(gi)].get<double>();
      for (long t = 0; t < trials; ++t) {
        SweepCell c;
        c.env_index = int(ei);
        c.g_index = int(gi);
        c.trial = int(t);
        c.cfg = env_cfg;
        c.cfg["compliance"]["G"] = g;
        c.cfg["trial"] = t;
        c.env_label = env.label;
        c.G = g;
        cells.push_back(std::move(c));
      }
    }
  }
  std::cout << "sweep: " << cells.size() << " runs (" << env_overrides.size() << " environments x "
            << grid->size() << " G values x " << trials << " trials)\n";

  std::vector<RunRecord> records(cells.size());
  std::vector<std::string> failures(cells.size());
  std::atomic<size_t> next{0};
  std::atomic<size_t> done{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        const TrialSetup setup = trial_setup_from_config(cells[i].cfg);
        const Environment env = environment_from_config(cells[i].cfg, setup);
        records[i] = run_trial(setup, env);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
      done.fetch_add(1);
    }
  };
  const int nthreads = std::max(1, std::min<int>(jobs, int(cells.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < nthreads; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& th : pool) th.join();

  // per-run table
  std::ostringstream runs;
  runs << "env,G,trial,seed,end_state,eta,c_mt,cycles_completed,com_path_mm,"
          "cable_work_pos_nmm,reversals,episodes,penetration_warning,diagnostic\n";
  struct CellStat {
    std::vector<double> etas, cmts;
    int exited = 0, stuck = 0, aborted = 0, errors = 0;
  };
  std::map<std::pair<int, int>, CellStat> stats;
  for (size_t i = 0; i < cells.size(); ++i) {
    const SweepCell& c = cells[i];
    CellStat& st = stats[{c.env_index, c.g_index}];
    if (!failures[i].empty()) {
      std::string d = failures[i];
      for (char& ch : d)
        if (ch == ',' || ch == '\n') ch = ';';
      runs << c.env_label << ',' << fmt(c.G) << ',' << c.trial << ",,error,,,,,,,,," << d << '\n';
      ++st.errors;
      continue;
    }
    const RunRecord& rec = records[i];
    if (keep_records)
      atomic_write_file(out + "/records/" + sanitize(c.env_label) + "_G" + fmt(c.G) + "_t" +
                            std::to_string(c.trial) + ".csv",
                        run_record_to_csv(rec));
    std::string eta_s;
    try {
      const double eta = wave_efficiency(rec).eta;
      eta_s = fmt(eta);
      st.etas.push_back(eta);
    } catch (const std::exception&) {
    }
    const TransportReport tr = cost_of_transport(rec);
    if (tr.defined) st.cmts.push_back(tr.c_mt);
    if (rec.end_state == EndState::exited) ++st.exited;
    else if (rec.end_state == EndState::stuck) ++st.stuck;
    else ++st.aborted;
    std::string d = rec.diagnostic;
    for (char& ch : d)
      if (ch == ',' || ch == '\n') ch = ';';
    runs << c.env_label << ',' << fmt(c.G) << ',' << c.trial << ',' << rec.seed << ','
         << to_string(rec.end_state) << ',' << eta_s << ','
         << (tr.defined ? fmt(tr.c_mt) : std::string()) << ',' << fmt(rec.cycles_completed) << ','
         << fmt(rec.com_path_mm) << ',' << fmt(rec.cable_work_pos_nmm) << ','
         << rec.reversals.size() << ',' << rec.episodes.size() << ','
         << (rec.penetration_warning ? 1 : 0) << ',' << d << '\n';
  }
  atomic_write_file(out + "/runs.csv", runs.str());

  auto mean_sd = [](const std::vector<double>& v) {
    if (v.empty()) return std::pair<double, double>{0, 0};
    double m = 0;
    for (double x : v) m += x;
    m /= double(v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::pair<double, double>{m, v.size() > 1 ? std::sqrt(s / double(v.size() - 1)) : 0.0};
  };

  std::ostringstream cellcsv;
  cellcsv << "env,G,mean_eta,sd_eta,n_eta,mean_cmt,sd_cmt,n_cmt,exited,stuck,aborted,errors\n";
  for (size_t ei = 0; ei < env_overrides.size(); ++ei) {
    LineSeries eta_mean, cmt_mean;
    eta_mean.label = "mean eta";
    cmt_mean.label = "mean c_mt";
    LineSeries eta_pts, cmt_pts;
    eta_pts.label = "trials";
    eta_pts.color = "#aaaaaa";
    cmt_pts.label = "trials";
    cmt_pts.color = "#aaaaaa";
    std::string label;
    for (long gi = 0; gi < long(grid->size()); ++gi) {
      const auto it = stats.find({int(ei), int(gi)});
      if (it == stats.end()) continue;
      const double g = (*grid)[size_t(gi)].get<double>();
      for (const SweepCell& c : cells)
        if (c.env_index == int(ei)) {
          label = c.env_label;
          break;
        }
      const auto [em, es] = mean_sd(it->second.etas);
      const auto [cm, cs] = mean_sd(it->second.cmts);
      cellcsv << label << ',' << fmt(g) << ',' << (it->second.etas.empty() ? "" : fmt(em)) << ','
              << (it->second.etas.empty() ? "" : fmt(es)) << ',' << it->second.etas.size() << ','
              << (it->second.cmts.empty() ? "" : fmt(cm)) << ','
              << (it->second.cmts.empty() ? "" : fmt(cs)) << ',' << it->second.cmts.size() << ','
              << it->second.exited << ',' << it->second.stuck << ',' << it->second.aborted << ','
              << it->second.errors << '\n';
      if (!it->second.etas.empty()) {
        eta_mean.x.push_back(g);
        eta_mean.y.push_back(em);
        for (double v : it->second.etas) {
          eta_pts.x.push_back(g);
          eta_pts.y.push_back(v);
        }
      }
      if (!it->second.cmts.empty()) {
        cmt_mean.x.push_back(g);
        cmt_mean.y.push_back(cm);
        for (double v : it->second.cmts) {
          cmt_pts.x.push_back(g);
          cmt_pts.y.push_back(v);
        }
      }
    }
    eta_pts.line = false;
    cmt_pts.line = false;
    if (!eta_mean.x.empty()) {
      PlotOptions po;
      po.title = "Wave efficiency, " + label;
      po.xlabel = "G";
      po.ylabel = "eta";
      po.provenance_hash = hash;
      std::vector<LineSeries> ss{eta_mean};
      if (!eta_pts.x.empty()) ss.push_back(eta_pts);
      atomic_write_file(out + "/" + sanitize(label) + "_eta.svg", render_line_plot(ss, po));
    }
    if (!cmt_mean.x.empty()) {
      PlotOptions po;
      po.title = "Cost of transport, " + label;
      po.xlabel = "G";
      po.ylabel = "c_mt";
      po.provenance_hash = hash;
      std::vector<LineSeries> ss{cmt_mean};
      if (!cmt_pts.x.empty()) ss.push_back(cmt_pts);
      atomic_write_file(out + "/" + sanitize(label) + "_cmt.svg", render_line_plot(ss, po));
    }
  }
  atomic_write_file(out + "/cells.csv", cellcsv.str());

  Json summary;
  summary["config_hash"] = hash_hex(hash);
  summary["runs"] = cells.size();
  summary["runs_csv"] = "runs.csv";
  summary["cells_csv"] = "cells.csv";
  atomic_write_file(out + "/sweep_summary.json", summary.dump(2) + "\n");
  std::cout << "sweep complete: " << out << "/runs.csv, " << out << "/cells.csv\n";
  return 0;
}

// ---------------------------------------------------------------- characterize

int cmd_characterize(const std::string& config_path, const std::string& out_flag) {
  Json cfg = load_or_default(config_path);
  const std::uint64_t hash = config_hash(cfg);
  const std::string out = resolve_out(out_flag);
  const RigParams rig = rig_from_config(cfg);
  const TrialSetup setup = trial_setup_from_config(cfg);

  const Json* glist = config_find(cfg, "characterize.G_list");
  if (!glist || !glist->is_array() || glist->empty())
    throw std::runtime_error("config: field 'characterize.G_list' must be a nonempty array");
  const double alpha_step = config_number(cfg, "characterize.alpha_step_deg", 15.0);
  const double force_step = config_number(cfg, "characterize.force_step_n", 0.25);

  for (const Json& gj : *glist) {
    if (!gj.is_number())
      throw std::runtime_error("config: field 'characterize.G_list' must hold numbers");
    const double G = gj.get<double>();
    const ForceDeformationMap map = force_deformation_map(G, rig, alpha_step, force_step);
    atomic_write_file(out + "/map_G" + fmt(G) + ".csv", map_to_csv(map));
    PlotOptions po;
    po.title = "Force-deformation map, G = " + fmt(G);
    po.xlabel = "suggested angle (deg)";
    po.ylabel = "external force (N)";
    po.provenance_hash = hash;
    atomic_write_file(out + "/map_G" + fmt(G) + ".svg",
                      render_heatmap(map.deflection_deg, map.alpha_deg, map.force_n, po));

    const Eigen::VectorXd posture = suggested_angles(setup.gait, 0.0);
    const std::vector<JointAxes> axes = easy_hard_axes(
        posture, setup.gait.amplitude_deg, G, 3.0, Eigen::Vector2d(1, 0), rig, setup.material);
    std::ostringstream axcsv;
    axcsv << "joint,suggested_deg,easy_sign,easy_deflection_deg,hard_deflection_deg\n";
    std::vector<double> centers;
    BarSeries easy, hard;
    easy.label = "easy";
    hard.label = "hard";
    for (const JointAxes& ax : axes) {
      axcsv << ax.joint << ',' << fmt(posture[ax.joint]) << ',' << fmt(ax.easy_sign) << ','
            << fmt(ax.easy_deflection_deg) << ',' << fmt(ax.hard_deflection_deg) << '\n';
      centers.push_back(double(ax.joint + 1));
      easy.heights.push_back(ax.easy_deflection_deg);
      hard.heights.push_back(ax.hard_deflection_deg);
    }
    atomic_write_file(out + "/axes_G" + fmt(G) + ".csv", axcsv.str());
    PlotOptions pa;
    pa.title = "Easy/hard deflection at 3 N, G = " + fmt(G);
    pa.xlabel = "joint";
    pa.ylabel = "deflection (deg)";
    pa.provenance_hash = hash;
    atomic_write_file(out + "/axes_G" + fmt(G) + ".svg",
                      render_bar_chart(centers, {easy, hard}, pa));
    std::cout << "characterize G=" << fmt(G) << ": map + axes written\n";
  }
  return 0;
}

// ---------------------------------------------------------------- analyze

int cmd_analyze(const std::vector<std::string>& inputs, const std::string& out_flag) {
  const std::string out = resolve_out(out_flag);
  std::vector<RunRecord> records;
  Json summary = Json::array();
  for (const std::string& path : inputs) {
    const std::string text = read_file(path);
    const std::string stem = sanitize(std::filesystem::path(path).stem().string());
    Json entry;
    entry["input"] = path;
    if (text.rfind("# undusim run record v1", 0) == 0) {
      const RunRecord rec = run_record_from_csv(text);
      entry["metrics"] = metrics_json(rec);
      const CurvatureProfile prof = curvature_from_record(rec);
      const std::uint64_t hash = fnv1a64(text);
      write_orbit_and_phase(prof, out, stem, hash);
      try {
        const ShapeFit fit = fit_spatial_frequency(prof);
        entry["xi_fit"] = fit.xi;
        entry["variance_captured"] = fit.variance_captured;
        entry["low_variance_warning"] = fit.low_variance_warning;
      } catch (const std::exception& e) {
        entry["fit_error"] = e.what();
      }
      records.push_back(rec);
    } else {
      const CurvatureProfile prof = curvature_from_centerlines(text);
      const std::uint64_t hash = fnv1a64(text);
      write_orbit_and_phase(prof, out, stem, hash);
      const ShapeFit fit = fit_spatial_frequency(prof);
      entry["xi_fit"] = fit.xi;
      entry["variance_captured"] = fit.variance_captured;
      entry["low_variance_warning"] = fit.low_variance_warning;
    }
    atomic_write_file(out + "/" + stem + ".metrics.json", entry.dump(2) + "\n");
    summary.push_back(entry);
  }
  if (!records.empty()) {
    try {
      const CollisionAngleStats st = collision_angle_stats(records);
      std::vector<double> centers;
      BarSeries fwd, rev;
      fwd.label = "forward";
      rev.label = "reversal";
      for (int b = 0; b < 18; ++b) {
        centers.push_back(10.0 * b + 5.0);
        fwd.heights.push_back(st.forward[size_t(b)]);
        rev.heights.push_back(st.reverse[size_t(b)]);
      }
      PlotOptions po;
      po.title = "Collision angles by outcome";
      po.xlabel = "collision angle (deg)";
      po.ylabel = "fraction";
      atomic_write_file(out + "/collision_angles.svg", render_bar_chart(centers, {fwd, rev}, po));
    } catch (const std::exception&) {
      // fewer than 30 episodes pooled: no histogram
    }
  }
  atomic_write_file(out + "/analysis_summary.json", summary.dump(2) + "\n");
  std::cout << "analyzed " << inputs.size() << " input(s) -> " << out << "\n";
  return 0;
}

// ---------------------------------------------------------------- env build

int cmd_env_build(const std::string& config_path, std::optional<std::uint64_t> seed,
                  const std::string& out_flag) {
  Json cfg = load_or_default(config_path);
  if (seed) cfg["seed"] = *seed;
  const std::uint64_t hash = config_hash(cfg);
  const TrialSetup setup = trial_setup_from_config(cfg);
  const Environment env = environment_from_config(cfg, setup);
  const std::string out = resolve_out(out_flag);
  const std::string base = sanitize(env.label);
  atomic_write_file(out + "/" + base + ".env.txt", serialize_environment(env));
  atomic_write_file(out + "/" + base + ".env.svg", environment_svg(env, hash));
  std::cout << env.label << ": " << env.posts.size() << " posts, " << env.walls.size()
            << " walls, region " << fmt(env.region.length()) << " x " << fmt(env.region.width())
            << " mm -> " << out << "/" << base << ".env.txt\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"undusim: cable-driven undulator simulator and analysis toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "undusim 1.0.0");

  std::string config_path, out_flag;
  std::optional<std::uint64_t> seed;
  std::optional<int> trial;
  int jobs = 1;
  bool no_records = false;
  std::vector<std::string> inputs;

  CLI::App* run = app.add_subcommand("run", "execute one trial");
  run->add_option("--config", config_path, "config file (JSON, include-aware)");
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--trial", trial, "override the trial index");
  run->add_option("--out", out_flag, "output directory (or UNDUSIM_OUT)");

  CLI::App* sweep = app.add_subcommand("sweep", "G grid x environments x trials");
  sweep->add_option("--config", config_path, "config file");
  sweep->add_option("--seed", seed, "override the config seed");
  sweep->add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);
  sweep->add_option("--out", out_flag, "output directory (or UNDUSIM_OUT)");
  sweep->add_flag("--no-records", no_records, "skip per-run record files");

  CLI::App* charac = app.add_subcommand("characterize", "force-deformation maps and axes");
  charac->add_option("--config", config_path, "config file");
  charac->add_option("--out", out_flag, "output directory (or UNDUSIM_OUT)");

  CLI::App* analyze = app.add_subcommand("analyze", "metrics and plots from records/centerlines");
  analyze->add_option("inputs", inputs, "record CSVs or centerline CSVs")->required();
  analyze->add_option("--out", out_flag, "output directory (or UNDUSIM_OUT)");

  CLI::App* envapp = app.add_subcommand("env", "environment tools");
  CLI::App* envbuild = envapp->add_subcommand("build", "build and save an environment");
  envbuild->add_option("--config", config_path, "config file");
  envbuild->add_option("--seed", seed, "override the config seed");
  envbuild->add_option("--out", out_flag, "output directory (or UNDUSIM_OUT)");
  envapp->require_subcommand(1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, seed, trial, out_flag);
    if (sweep->parsed()) return cmd_sweep(config_path, seed, jobs, out_flag, !no_records);
    if (charac->parsed()) return cmd_characterize(config_path, out_flag);
    if (analyze->parsed()) return cmd_analyze(inputs, out_flag);
    if (envapp->parsed() && envbuild->parsed()) return cmd_env_build(config_path, seed, out_flag);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
