#include "undusim/record.hpp"

#include <cstdio>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace undu {

const char* to_string(EndState e) {
  switch (e) {
    case EndState::exited: return "exited";
    case EndState::stuck: return "stuck";
    default: return "aborted";
  }
}

namespace {
std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.12g", v);
  return b;
}
EndState end_state_from(const std::string& s) {
  if (s == "exited") return EndState::exited;
  if (s == "stuck") return EndState::stuck;
  if (s == "aborted") return EndState::aborted;
  throw std::runtime_error("unknown end state '" + s + "'");
}
}  // namespace

std::string run_record_to_csv(const RunRecord& r) {
  std::ostringstream os;
  os << "# undusim run record v1\n";
  os << "# n_joints " << r.n_joints << "\n";
  os << "# body_length_mm " << fmt(r.body_length_mm) << "\n";
  os << "# link_length_mm " << fmt(r.link_length_mm) << "\n";
  os << "# link_mass_kg " << fmt(r.link_mass_kg) << "\n";
  os << "# amplitude_deg " << fmt(r.amplitude_deg) << "\n";
  os << "# xi " << fmt(r.xi) << "\n";
  os << "# omega_hz " << fmt(r.omega_hz) << "\n";
  os << "# G " << fmt(r.G) << "\n";
  os << "# l0 " << fmt(r.l0) << "\n";
  os << "# direction " << (r.direction_direct ? "direct" : "retrograde") << "\n";
  os << "# env " << (r.env_label.empty() ? "open" : r.env_label) << "\n";
  os << "# control " << (r.control_mode.empty() ? "open_loop" : r.control_mode) << "\n";
  os << "# seed " << r.seed << "\n";
  os << "# trial " << r.trial << "\n";
  os << "# end_state " << to_string(r.end_state) << "\n";
  if (!r.diagnostic.empty()) os << "# diagnostic " << r.diagnostic << "\n";
  os << "# duration_s " << fmt(r.duration_s) << "\n";
  os << "# cycles " << fmt(r.cycles_completed) << "\n";
  os << "# com_path_mm " << fmt(r.com_path_mm) << "\n";
  os << "# cable_work_pos_nmm " << fmt(r.cable_work_pos_nmm) << "\n";
  os << "# cable_work_net_nmm " << fmt(r.cable_work_net_nmm) << "\n";
  os << "# friction_dissipation_nmm " << fmt(r.friction_dissipation_nmm) << "\n";
  os << "# skin_energy_start_nmm " << fmt(r.skin_energy_start_nmm) << "\n";
  os << "# skin_energy_end_nmm " << fmt(r.skin_energy_end_nmm) << "\n";
  os << "# thrust_contacts " << r.thrust_contacts << "\n";
  os << "# inhibitory_contacts " << r.inhibitory_contacts << "\n";
  os << "# penetration_warning " << (r.penetration_warning ? 1 : 0) << "\n";
  for (const ReversalEvent& e : r.reversals)
    os << "# reversal " << fmt(e.time_s) << " " << fmt(e.angle_deg) << " " << fmt(e.force_n) << " "
       << e.bin << " " << e.obstacle << " " << e.wall << "\n";
  for (const CollisionEpisode& e : r.episodes)
    os << "# episode " << fmt(e.t_start) << " " << fmt(e.t_end) << " " << fmt(e.peak_force_n)
       << " " << fmt(e.angle_at_peak_deg) << " " << e.obstacle << " " << e.wall << " "
       << (e.triggered_reversal ? 1 : 0) << "\n";

  const int n = r.n_joints;
  os << "time_s,phase_cycles,reversing,com_x,com_y";
  for (int k = 0; k <= n; ++k) os << ",link" << k << "_x,link" << k << "_y,link" << k << "_theta";
  for (int j = 1; j <= n; ++j)
    os << ",joint" << j << "_zeta_deg,joint" << j << "_alpha_deg,joint" << j << "_cable_left_mm"
       << ",joint" << j << "_cable_right_mm,joint" << j << "_tension_left_n,joint" << j
       << "_tension_right_n";
  for (int k = 0; k <= n; ++k) os << ",link" << k << "_contact";
  os << "\n";
  for (const RunSample& s : r.samples) {
    os << fmt(s.time_s) << "," << fmt(s.phase_cycles) << "," << s.reversing << ","
       << fmt(s.com.x()) << "," << fmt(s.com.y());
    for (int k = 0; k <= n; ++k)
      os << "," << fmt(s.link_x[k]) << "," << fmt(s.link_y[k]) << "," << fmt(s.link_theta[k]);
    for (int j = 0; j < n; ++j)
      os << "," << fmt(s.zeta_deg[j]) << "," << fmt(s.alpha_deg[j]) << "," << fmt(s.cable_left[j])
         << "," << fmt(s.cable_right[j]) << "," << fmt(s.tension_left[j]) << ","
         << fmt(s.tension_right[j]);
    for (int k = 0; k <= n; ++k) os << "," << s.contact[k];
    os << "\n";
  }
  return os.str();
}

RunRecord run_record_from_csv(const std::string& text) {
  RunRecord r;
  std::istringstream is(text);
  std::string line;
  bool header_seen = false;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line.substr(1));
      std::string key;
      ls >> key;
      if (key == "n_joints") ls >> r.n_joints;
      else if (key == "body_length_mm") ls >> r.body_length_mm;
      else if (key == "link_length_mm") ls >> r.link_length_mm;
      else if (key == "link_mass_kg") ls >> r.link_mass_kg;
      else if (key == "amplitude_deg") ls >> r.amplitude_deg;
      else if (key == "xi") ls >> r.xi;
      else if (key == "omega_hz") ls >> r.omega_hz;
      else if (key == "G") ls >> r.G;
      else if (key == "l0") ls >> r.l0;
      else if (key == "direction") { std::string d; ls >> d; r.direction_direct = d == "direct"; }
      else if (key == "env") ls >> r.env_label;
      else if (key == "control") ls >> r.control_mode;
      else if (key == "seed") ls >> r.seed;
      else if (key == "trial") ls >> r.trial;
      else if (key == "end_state") { std::string s; ls >> s; r.end_state = end_state_from(s); }
      else if (key == "diagnostic") { std::getline(ls, r.diagnostic); if (!r.diagnostic.empty() && r.diagnostic[0] == ' ') r.diagnostic.erase(0, 1); }
      else if (key == "duration_s") ls >> r.duration_s;
      else if (key == "cycles") ls >> r.cycles_completed;
      else if (key == "com_path_mm") ls >> r.com_path_mm;
      else if (key == "cable_work_pos_nmm") ls >> r.cable_work_pos_nmm;
      else if (key == "cable_work_net_nmm") ls >> r.cable_work_net_nmm;
      else if (key == "friction_dissipation_nmm") ls >> r.friction_dissipation_nmm;
      else if (key == "skin_energy_start_nmm") ls >> r.skin_energy_start_nmm;
      else if (key == "skin_energy_end_nmm") ls >> r.skin_energy_end_nmm;
      else if (key == "thrust_contacts") ls >> r.thrust_contacts;
      else if (key == "inhibitory_contacts") ls >> r.inhibitory_contacts;
      else if (key == "penetration_warning") { int v = 0; ls >> v; r.penetration_warning = v != 0; }
      else if (key == "reversal") {
        ReversalEvent e;
        ls >> e.time_s >> e.angle_deg >> e.force_n >> e.bin >> e.obstacle >> e.wall;
        r.reversals.push_back(e);
      } else if (key == "episode") {
        CollisionEpisode e;
        int trig = 0;
        ls >> e.t_start >> e.t_end >> e.peak_force_n >> e.angle_at_peak_deg >> e.obstacle >>
            e.wall >> trig;
        e.triggered_reversal = trig != 0;
        r.episodes.push_back(e);
      }
      continue;
    }
    if (!header_seen) { header_seen = true; continue; }  // column header row
    const int n = r.n_joints;
    RunSample s;
    s.link_x.resize(n + 1); s.link_y.resize(n + 1); s.link_theta.resize(n + 1);
    s.zeta_deg.resize(n); s.alpha_deg.resize(n);
    s.cable_left.resize(n); s.cable_right.resize(n);
    s.tension_left.resize(n); s.tension_right.resize(n);
    s.contact.resize(n + 1);
    std::istringstream ls(line);
    std::string tok;
    auto next = [&]() -> double {
      if (!std::getline(ls, tok, ','))
        throw std::runtime_error("record CSV line " + std::to_string(lineno) + ": too few columns");
      return std::strtod(tok.c_str(), nullptr);
    };
    s.time_s = next();
    s.phase_cycles = next();
    s.reversing = int(next());
    s.com.x() = next();
    s.com.y() = next();
    for (int k = 0; k <= n; ++k) { s.link_x[k] = next(); s.link_y[k] = next(); s.link_theta[k] = next(); }
    for (int j = 0; j < n; ++j) {
      s.zeta_deg[j] = next(); s.alpha_deg[j] = next();
      s.cable_left[j] = next(); s.cable_right[j] = next();
      s.tension_left[j] = next(); s.tension_right[j] = next();
    }
    for (int k = 0; k <= n; ++k) s.contact[k] = int(next());
    r.samples.push_back(std::move(s));
  }
  if (!header_seen) throw std::runtime_error("record CSV: missing column header");
  return r;
}

}  // namespace undu
