#include "undusim/config.hpp"

#include <filesystem>
#include <set>
#include <sstream>
#include <stdexcept>

#include "undusim/csv.hpp"
#include "undusim/svg.hpp"

namespace undu {

namespace {

[[noreturn]] void field_error(const std::string& path, const std::string& want, const Json& got) {
  throw std::runtime_error("config: field '" + path + "' must be " + want + " (got " +
                           std::string(got.type_name()) + ")");
}

Json load_config_rec(const std::string& path, std::set<std::string>& active) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const std::string canon = fs::weakly_canonical(fs::path(path), ec).string();
  const std::string key = ec ? path : canon;
  if (!active.insert(key).second)
    throw std::runtime_error("config include cycle through " + path);

  Json merged = Json::object();
  Json self = parse_config_text(read_file(path), path);
  if (!self.is_object()) throw std::runtime_error("config " + path + ": top level must be an object");

  if (self.contains("include")) {
    const Json inc = self["include"];
    self.erase("include");
    std::vector<std::string> files;
    if (inc.is_string()) files.push_back(inc.get<std::string>());
    else if (inc.is_array()) {
      for (const Json& e : inc) {
        if (!e.is_string())
          throw std::runtime_error("config " + path + ": include entries must be file paths");
        files.push_back(e.get<std::string>());
      }
    } else {
      throw std::runtime_error("config " + path + ": include must be a path or list of paths");
    }
    const fs::path base = fs::path(path).parent_path();
    for (const std::string& file : files) {
      fs::path p(file);
      if (p.is_relative()) p = base / p;
      merged = deep_merge(std::move(merged), load_config_rec(p.string(), active));
    }
  }
  merged = deep_merge(std::move(merged), self);
  active.erase(key);
  return merged;
}

}  // namespace

Json parse_config_text(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error("config " + origin + ": " + e.what());
  }
}

Json load_config(const std::string& path) {
  std::set<std::string> active;
  return load_config_rec(path, active);
}

Json deep_merge(Json base, const Json& overlay) {
  if (!base.is_object() || !overlay.is_object()) return overlay;
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    if (base.contains(it.key())) base[it.key()] = deep_merge(base[it.key()], it.value());
    else base[it.key()] = it.value();
  }
  return base;
}

const Json* config_find(const Json& j, const std::string& path) {
  const Json* cur = &j;
  std::istringstream is(path);
  std::string part;
  while (std::getline(is, part, '.')) {
    if (!cur->is_object() || !cur->contains(part)) return nullptr;
    cur = &(*cur)[part];
  }
  return cur;
}

bool config_has(const Json& j, const std::string& path) { return config_find(j, path) != nullptr; }

double config_number(const Json& j, const std::string& path, double fallback) {
  const Json* v = config_find(j, path);
  if (!v) return fallback;
  if (!v->is_number()) field_error(path, "a number", *v);
  return v->get<double>();
}

double require_config_number(const Json& j, const std::string& path) {
  const Json* v = config_find(j, path);
  if (!v) throw std::runtime_error("config: required field '" + path + "' is missing");
  if (!v->is_number()) field_error(path, "a number", *v);
  return v->get<double>();
}

long config_integer(const Json& j, const std::string& path, long fallback) {
  const Json* v = config_find(j, path);
  if (!v) return fallback;
  if (!v->is_number_integer()) field_error(path, "an integer", *v);
  return v->get<long>();
}

bool config_flag(const Json& j, const std::string& path, bool fallback) {
  const Json* v = config_find(j, path);
  if (!v) return fallback;
  if (!v->is_boolean()) field_error(path, "a boolean", *v);
  return v->get<bool>();
}

std::string config_string(const Json& j, const std::string& path, const std::string& fallback) {
  const Json* v = config_find(j, path);
  if (!v) return fallback;
  if (!v->is_string()) field_error(path, "a string", *v);
  return v->get<std::string>();
}

std::uint64_t config_hash(const Json& j) { return fnv1a64(j.dump()); }

Json default_config() {
  Json j;
  j["config_version"] = 1;
  j["seed"] = 1;
  j["trial"] = 0;
  j["gait"] = {{"amplitude_deg", 46.0}, {"xi", 0.81},        {"omega_hz", 0.25},
               {"n_joints", 7},         {"direction", "retrograde"}};
  j["compliance"] = {{"G", 0.0}, {"l0_mm_per_deg", 1.15}};
  j["joint"] = {{"l1_mm", 28.0}, {"l2_mm", 28.0}};
  j["motor"] = {{"gamma_per_mm", -86.8}, {"pulley_diameter_mm", 15.0}, {"zero_counts", 0.0}};
  j["material"] = {{"link_length_mm", 107.5},
                   {"link_width_mm", 68.0},
                   {"link_mass_kg", 0.55},
                   {"gravity_mps2", 9.81},
                   {"mu_parallel", 0.25},
                   {"drag_ratio", 1.6},
                   {"skin_stiffness_nmm_per_deg", 1.0},
                   {"skin_damping_nmms_per_deg", 0.5},
                   {"obstacle_stiffness_n_per_mm", 5.0},
                   {"obstacle_friction", 0.1},
                   {"slip_velocity_mm_s", 0.5},
                   {"translational_damping", 1e-4}};
  j["solver"] = {{"force_tol_n", 1e-6}, {"max_iterations", 80}, {"max_substep_splits", 3}};
  j["sim"] = {{"max_cycles", 40.0},
              {"steps_per_cycle", 500},
              {"samples_per_cycle", 32},
              {"stuck_window_cycles", 10.0},
              {"stuck_fraction", 0.02},
              {"overload_force_n", 200.0},
              {"overload_window_cycles", 12.0},
              {"spawn_y_mm", 0.0},
              {"spawn_heading_jitter_deg", 2.0},
              {"spawn_y_jitter_mm", -1.0}};
  j["control"] = {{"mode", "open_loop"},
                  {"inner_threshold_n", 3.0},
                  {"shoulder_threshold_n", 5.0},
                  {"reversal_duration_cycles", 0.125}};
  j["environment"] = {{"kind", "open"},
                      {"region_length_bodylengths", 4.5},
                      {"region_width_bodylengths", 3.0},
                      {"post_diameter_mm", 127.0},
                      {"snap_grid_mm", 25.4}};
  j["rig"] = {{"amplitude_deg", 75.0},
              {"lever_arm_mm", 60.0},
              {"force_cap_n", 6.0},
              {"sweep_step_deg", 0.1}};
  j["sweep"] = {{"G_grid", {0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5}}, {"trials", 3}};
  j["characterize"] = {{"G_list", {0.0, 0.75, 1.5}}, {"alpha_step_deg", 15.0},
                       {"force_step_n", 0.25}};
  return j;
}

TrialSetup trial_setup_from_config(const Json& j) {
  TrialSetup s;
  s.gait.amplitude_deg = config_number(j, "gait.amplitude_deg", s.gait.amplitude_deg);
  s.gait.spatial_frequency = config_number(j, "gait.xi", s.gait.spatial_frequency);
  s.gait.temporal_frequency_hz = config_number(j, "gait.omega_hz", s.gait.temporal_frequency_hz);
  s.gait.n_joints = int(config_integer(j, "gait.n_joints", s.gait.n_joints));
  const std::string dir = config_string(j, "gait.direction", "retrograde");
  if (dir == "retrograde") s.gait.direction = WaveDirection::retrograde;
  else if (dir == "direct") s.gait.direction = WaveDirection::direct;
  else throw std::runtime_error("config: field 'gait.direction' must be retrograde or direct");

  if (s.gait.n_joints < 2) throw std::runtime_error("config: field 'gait.n_joints' must be >= 2");
  if (!(s.gait.amplitude_deg > 0 && s.gait.amplitude_deg <= 90))
    throw std::runtime_error("config: field 'gait.amplitude_deg' must be in (0, 90]");
  if (!(s.gait.spatial_frequency > 0))
    throw std::runtime_error("config: field 'gait.xi' must be > 0");
  if (!(s.gait.temporal_frequency_hz > 0))
    throw std::runtime_error("config: field 'gait.omega_hz' must be > 0");

  s.G = config_number(j, "compliance.G", s.G);
  if (!(s.G >= 0)) throw std::runtime_error("config: field 'compliance.G' must be >= 0");
  s.l0_mm_per_deg = config_number(j, "compliance.l0_mm_per_deg", s.l0_mm_per_deg);
  if (!(s.l0_mm_per_deg > 0))
    throw std::runtime_error("config: field 'compliance.l0_mm_per_deg' must be > 0");

  s.geometry.l1_mm = config_number(j, "joint.l1_mm", s.geometry.l1_mm);
  s.geometry.l2_mm = config_number(j, "joint.l2_mm", s.geometry.l2_mm);
  if (!(s.geometry.l1_mm > 0) || !(s.geometry.l2_mm > 0))
    throw std::runtime_error("config: joint guide offsets must be > 0");

  MaterialParams& m = s.material;
  m.link_length_mm = config_number(j, "material.link_length_mm", m.link_length_mm);
  m.link_width_mm = config_number(j, "material.link_width_mm", m.link_width_mm);
  m.link_mass_kg = config_number(j, "material.link_mass_kg", m.link_mass_kg);
  m.gravity_mps2 = config_number(j, "material.gravity_mps2", m.gravity_mps2);
  m.mu_parallel = config_number(j, "material.mu_parallel", m.mu_parallel);
  m.drag_ratio = config_number(j, "material.drag_ratio", m.drag_ratio);
  m.skin_stiffness_nmm_per_deg =
      config_number(j, "material.skin_stiffness_nmm_per_deg", m.skin_stiffness_nmm_per_deg);
  m.skin_damping_nmms_per_deg =
      config_number(j, "material.skin_damping_nmms_per_deg", m.skin_damping_nmms_per_deg);
  m.obstacle_stiffness_n_per_mm =
      config_number(j, "material.obstacle_stiffness_n_per_mm", m.obstacle_stiffness_n_per_mm);
  m.obstacle_friction = config_number(j, "material.obstacle_friction", m.obstacle_friction);
  m.slip_velocity_mm_s = config_number(j, "material.slip_velocity_mm_s", m.slip_velocity_mm_s);
  m.translational_damping =
      config_number(j, "material.translational_damping", m.translational_damping);
  if (!(m.link_length_mm > 0) || !(m.link_width_mm > 0) || !(m.link_mass_kg > 0))
    throw std::runtime_error("config: material link dimensions and mass must be > 0");
  if (!(m.mu_parallel > 0) || !(m.drag_ratio > 0))
    throw std::runtime_error("config: material friction coefficients must be > 0");

  s.solver.force_tol_n = config_number(j, "solver.force_tol_n", s.solver.force_tol_n);
  s.solver.max_iterations = int(config_integer(j, "solver.max_iterations", s.solver.max_iterations));
  s.solver.max_substep_splits =
      int(config_integer(j, "solver.max_substep_splits", s.solver.max_substep_splits));

  const std::string mode = config_string(j, "control.mode", "open_loop");
  if (mode == "open_loop") s.control = ControlMode::open_loop;
  else if (mode == "closed_loop") s.control = ControlMode::closed_loop;
  else throw std::runtime_error("config: field 'control.mode' must be open_loop or closed_loop");
  const double inner = config_number(j, "control.inner_threshold_n", 3.0);
  const double shoulder = config_number(j, "control.shoulder_threshold_n", 5.0);
  s.policy.thresholds_n = {std::numeric_limits<double>::infinity(), shoulder, inner, shoulder,
                           std::numeric_limits<double>::infinity()};
  s.policy.reversal_duration_cycles =
      config_number(j, "control.reversal_duration_cycles", s.policy.reversal_duration_cycles);

  s.seed = std::uint64_t(config_integer(j, "seed", 1));
  s.trial = int(config_integer(j, "trial", 0));

  s.max_cycles = config_number(j, "sim.max_cycles", s.max_cycles);
  s.steps_per_cycle = int(config_integer(j, "sim.steps_per_cycle", s.steps_per_cycle));
  s.samples_per_cycle = int(config_integer(j, "sim.samples_per_cycle", s.samples_per_cycle));
  s.stuck_window_cycles = config_number(j, "sim.stuck_window_cycles", s.stuck_window_cycles);
  s.stuck_fraction = config_number(j, "sim.stuck_fraction", s.stuck_fraction);
  s.overload_force_n = config_number(j, "sim.overload_force_n", s.overload_force_n);
  s.overload_window_cycles =
      config_number(j, "sim.overload_window_cycles", s.overload_window_cycles);
  s.spawn_y_mm = config_number(j, "sim.spawn_y_mm", s.spawn_y_mm);
  s.spawn_heading_jitter_deg =
      config_number(j, "sim.spawn_heading_jitter_deg", s.spawn_heading_jitter_deg);
  s.spawn_y_jitter_mm = config_number(j, "sim.spawn_y_jitter_mm", s.spawn_y_jitter_mm);
  return s;
}

Environment environment_from_config(const Json& j, const TrialSetup& setup) {
  const double L = total_length_mm(setup.material, setup.gait.n_joints);
  const std::string kind = config_string(j, "environment.kind", "open");

  LatticeOptions opt;
  opt.region_length_bodylengths =
      config_number(j, "environment.region_length_bodylengths", opt.region_length_bodylengths);
  opt.region_width_bodylengths =
      config_number(j, "environment.region_width_bodylengths", opt.region_width_bodylengths);
  const bool is_lattice = kind == "lattice" || kind == "wavelength_lattice";
  opt.snap_grid_mm = config_number(j, "environment.snap_grid_mm", is_lattice ? 25.4 : 0.0);
  const double radius = 0.5 * config_number(j, "environment.post_diameter_mm", 127.0);
  const std::string geo_name = config_string(j, "environment.geometry", "square");
  LatticeGeometry geometry;
  if (geo_name == "square") geometry = LatticeGeometry::square;
  else if (geo_name == "hex") geometry = LatticeGeometry::hex;
  else throw std::runtime_error("config: field 'environment.geometry' must be square or hex");

  Environment env;
  if (kind == "open") {
    env = build_open(L, opt);
  } else if (kind == "lattice") {
    env = build_lattice(L, require_config_number(j, "environment.density_L_over_d"), geometry,
                        radius, opt);
  } else if (kind == "wavelength_lattice") {
    env = build_lattice_by_wavelength_ratio(
        L, L / setup.gait.spatial_frequency,
        require_config_number(j, "environment.wavelength_spacing_ratio"), geometry, radius, opt);
  } else if (kind == "random") {
    const int count = int(config_integer(j, "environment.count", -1));
    if (count < 0) throw std::runtime_error("config: required field 'environment.count' is missing");
    Region region{0, -0.5 * opt.region_width_bodylengths * L, opt.region_length_bodylengths * L,
                  0.5 * opt.region_width_bodylengths * L};
    env = build_random_field(std::uint64_t(config_integer(j, "environment.seed",
                                                          long(setup.seed))),
                             count, config_number(j, "environment.min_gap_mm", radius), radius,
                             region);
  } else if (kind == "channel") {
    env = build_channel(config_number(j, "environment.width_mm", 180.0),
                        opt.region_length_bodylengths * L);
  } else if (kind == "file") {
    const std::string path = config_string(j, "environment.path", "");
    if (path.empty())
      throw std::runtime_error("config: required field 'environment.path' is missing");
    env = parse_environment(read_file(path));
  } else {
    throw std::runtime_error(
        "config: field 'environment.kind' must be one of "
        "open|lattice|wavelength_lattice|random|channel|file");
  }
  const std::string label = config_string(j, "environment.label", "");
  if (!label.empty()) env.label = label;
  return env;
}

RigParams rig_from_config(const Json& j) {
  RigParams rig;
  rig.amplitude_deg = config_number(j, "rig.amplitude_deg", rig.amplitude_deg);
  rig.l0_mm_per_deg = config_number(j, "compliance.l0_mm_per_deg", rig.l0_mm_per_deg);
  rig.geometry.l1_mm = config_number(j, "joint.l1_mm", rig.geometry.l1_mm);
  rig.geometry.l2_mm = config_number(j, "joint.l2_mm", rig.geometry.l2_mm);
  rig.skin_stiffness_nmm_per_deg =
      config_number(j, "material.skin_stiffness_nmm_per_deg", rig.skin_stiffness_nmm_per_deg);
  rig.lever_arm_mm = config_number(j, "rig.lever_arm_mm", rig.lever_arm_mm);
  rig.force_cap_n = config_number(j, "rig.force_cap_n", rig.force_cap_n);
  rig.sweep_step_deg = config_number(j, "rig.sweep_step_deg", rig.sweep_step_deg);
  return rig;
}

}  // namespace undu
