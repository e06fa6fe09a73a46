#include "bimodal/params.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace bimodal {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// "0:0.05, 30:2e3, ..." -> (angle, k) pairs; unit_scale converts the angle.
std::vector<std::pair<double, double>> parse_map(const std::string& text,
                                                 double unit_scale,
                                                 const std::string& key) {
  std::vector<std::pair<double, double>> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw ConfigError("key `" + key + "`: expected `angle:k` pairs, got: " + item);
    try {
      double a = std::stod(item.substr(0, colon));
      double k = std::stod(item.substr(colon + 1));
      out.emplace_back(a * unit_scale, k);
    } catch (const std::exception&) {
      throw ConfigError("key `" + key + "`: bad number in pair: " + item);
    }
  }
  if (out.empty()) throw ConfigError("key `" + key + "`: empty map");
  return out;
}

std::string format_map(const std::vector<std::pair<double, double>>& map) {
  std::string s;
  for (size_t i = 0; i < map.size(); ++i) {
    if (i) s += ", ";
    s += fmt(map[i].first) + ":" + fmt(map[i].second);
  }
  return s;
}

void read_line(const KeyValueFile& kv, const std::string& prefix,
               MotorScrewLine& l) {
  l.torque_constant = kv.get_double(prefix + ".torque_constant_NmpA", l.torque_constant);
  l.max_current = kv.get_double(prefix + ".max_current_A", l.max_current);
  l.rotor_screw_inertia = kv.get_double(prefix + ".rotor_screw_inertia_kgm2", l.rotor_screw_inertia);
  l.reduction_ratio = kv.get_double(prefix + ".reduction_ratio", l.reduction_ratio);
  l.screw_lead = kv.get_double(prefix + ".screw_lead_m", l.screw_lead);
  l.max_speed = kv.get_double(prefix + ".max_speed_radps", l.max_speed);
  l.viscous_loss_coeff = kv.get_double(prefix + ".viscous_loss_Nspm", l.viscous_loss_coeff);
  l.piston_mass = kv.get_double(prefix + ".piston_mass_kg", l.piston_mass);
}

void check_line(const std::string& prefix, const MotorScrewLine& l,
                std::vector<std::string>& errs) {
  auto positive = [&](double v, const std::string& name, const std::string& note = "") {
    if (!(v > 0.0) || !std::isfinite(v))
      errs.push_back(prefix + "." + name + note + " must be finite and > 0, got " + fmt(v));
  };
  positive(l.torque_constant, "torque_constant_NmpA");
  positive(l.max_current, "max_current_A");
  positive(l.rotor_screw_inertia, "rotor_screw_inertia_kgm2");
  positive(l.reduction_ratio, "reduction_ratio");
  positive(l.screw_lead, "screw_lead_m", " (ball screw lead phi)");
  positive(l.max_speed, "max_speed_radps");
  positive(l.piston_mass, "piston_mass_kg");
  if (!(l.viscous_loss_coeff >= 0.0) || !std::isfinite(l.viscous_loss_coeff))
    errs.push_back(prefix + ".viscous_loss_Nspm must be finite and >= 0");
  if (l.screw_lead > 0.0) {
    double t = l.transformation_ratio();
    if (!std::isfinite(t) || !(t > 0.0))
      errs.push_back(prefix + ": transformation ratio 2*pi*R/lead is not finite and positive");
  }
}

}  // namespace

double MotorScrewLine::transformation_ratio() const {
  return 2.0 * kPi * reduction_ratio / screw_lead;
}

double MotorScrewLine::reflected_inertia() const {
  double t = transformation_ratio();
  return piston_mass + rotor_screw_inertia * t * t;
}

double MotorScrewLine::max_force() const {
  return torque_constant * transformation_ratio() * max_current;
}

double MotorScrewLine::max_piston_speed() const {
  return max_speed / transformation_ratio();
}

double ValveSpec::bore_area() const {
  return kPi * bore_diameter * bore_diameter / 4.0;
}

const MaterialSpec* ActuatorParams::find_material(const std::string& name) const {
  for (const auto& m : valve_design.materials)
    if (m.name == name) return &m;
  return nullptr;
}

ActuatorParams default_params() {
  ActuatorParams p;

  // Prototype line 1: 20 mm lead screw, direct drive. Motor constants are
  // back-solved from the published 350 N / 0.8 m/s / 10 kg envelope:
  //   k1 = 350 / (T1 * 12 A), J1 = (10 - m1) / T1^2, w1max = 0.8 * T1.
  p.line1.torque_constant = 0.092840383470272281;
  p.line1.max_current = 12.0;
  p.line1.rotor_screw_inertia = 1.0081457772412608e-4;
  p.line1.reduction_ratio = 1.0;
  p.line1.screw_lead = 0.020;
  p.line1.max_speed = 251.32741228718348;
  p.line1.viscous_loss_coeff = 0.0;
  p.line1.piston_mass = 0.05;

  // Prototype line 2: 5 mm lead screw behind a 28:1 gearhead. Back-solved
  // from 2880 N / 0.025 m/s / 8900 kg the same way with I2max = 3 A.
  p.line2.torque_constant = 0.027283704530039206;
  p.line2.max_current = 3.0;
  p.line2.rotor_screw_inertia = 7.1887234403509585e-6;
  p.line2.reduction_ratio = 28.0;
  p.line2.screw_lead = 0.005;
  p.line2.max_speed = 879.645943005142;
  p.line2.viscous_loss_coeff = 0.0;
  p.line2.piston_mass = 0.05;

  // k(45 deg) calibrated so the 0.25 m / 17 kg drop with valves halfway
  // closed peaks a hair above 1500 N at the output (see README).
  p.valve.loss_map = {{0.0, 0.05},
                      {30.0 * kDeg, 2.0e3},
                      {45.0 * kDeg, 2.0e5},
                      {60.0 * kDeg, 5.0e6},
                      {89.5 * kDeg, 1.0e9}};
  p.valve.k_open = 0.05;

  p.valve_design.materials = {p.valve_design.brass_ref,
                              MaterialSpec{"al7075", 2810.0, 503e6}};

  p.control.em2_velocity = PidGains{0.0264, 0.53, 0.0, -3.0, 3.0};

  p.scenarios = {LoadScenario{17.0, 0.0, 0.0, "swing"},
                 LoadScenario{460.0, 1155.0, 0.0, "stance"}};
  return p;
}

ActuatorParams params_from_kv(const KeyValueFile& kv,
                              std::vector<std::string>* warnings) {
  ActuatorParams p = default_params();

  std::string ver = kv.get_string("schema_version", "");
  if (ver.empty())
    throw ConfigError(kv.origin() + ": missing required key `schema_version`");
  if (ver.rfind("1.", 0) != 0)
    throw ConfigError(kv.origin() + ": unsupported schema_version " + ver +
                      " (expected 1.x)");
  p.schema_version = ver;

  read_line(kv, "line1", p.line1);
  read_line(kv, "line2", p.line2);

  p.fluid.density = kv.get_double("fluid.density_kgpm3", p.fluid.density);
  p.fluid.cylinder_piston_area =
      kv.get_double("fluid.cylinder_piston_area_m2", p.fluid.cylinder_piston_area);

  p.cylinder_pressure_rating =
      kv.get_double("cylinder.pressure_rating_pa", p.cylinder_pressure_rating);
  p.stroke = kv.get_double("cylinder.stroke_m", p.stroke);
  p.stop_stiffness = kv.get_double("stop.stiffness_Npm", p.stop_stiffness);
  p.stop_damping = kv.get_double("stop.damping_Nspm", p.stop_damping);
  p.gravity = kv.get_double("gravity_mps2", p.gravity);

  p.valve.bore_diameter = kv.get_double("valve.bore_diameter_m", p.valve.bore_diameter);
  p.valve.max_angular_speed =
      kv.get_double("valve.max_angular_speed_radps", p.valve.max_angular_speed);
  if (kv.has("valve.loss_map_deg"))
    p.valve.loss_map = parse_map(kv.get_string("valve.loss_map_deg", ""), kDeg,
                                 "valve.loss_map_deg");
  else if (kv.has("valve.loss_map_rad"))
    p.valve.loss_map = parse_map(kv.get_string("valve.loss_map_rad", ""), 1.0,
                                 "valve.loss_map_rad");
  p.valve.k_open = p.valve.loss_map.empty() ? p.valve.k_open : p.valve.loss_map.front().second;
  if (kv.has("valve.closed_tolerance_rad"))
    p.valve.closed_tolerance = kv.require_double("valve.closed_tolerance_rad");
  else
    p.valve.closed_tolerance =
        kv.get_double("valve.closed_tolerance_deg", p.valve.closed_tolerance / kDeg) * kDeg;

  p.valve_design.motor_specific_power =
      kv.get_double("valve_design.motor_specific_power_WpKg",
                    p.valve_design.motor_specific_power);
  p.valve_design.gearbox_specific_torque =
      kv.get_double("valve_design.gearbox_specific_torque_NmpKg",
                    p.valve_design.gearbox_specific_torque);

  // material.<name>.* blocks extend or override the built-in table.
  for (const auto& [key, value] : kv.entries()) {
    (void)value;
    if (key.rfind("material.", 0) != 0) continue;
    size_t dot = key.find('.', 9);
    if (dot == std::string::npos) continue;
    std::string name = key.substr(9, dot - 9);
    MaterialSpec* slot = nullptr;
    for (auto& m : p.valve_design.materials)
      if (m.name == name) slot = &m;
    if (!slot) {
      p.valve_design.materials.push_back(MaterialSpec{name, 0.0, 0.0});
      slot = &p.valve_design.materials.back();
    }
    slot->density = kv.get_double("material." + name + ".density_kgpm3", slot->density);
    slot->yield_strength =
        kv.get_double("material." + name + ".yield_strength_pa", slot->yield_strength);
  }
  if (const MaterialSpec* br = p.find_material("brass")) p.valve_design.brass_ref = *br;

  p.control.rate_hz = kv.get_double("control.rate_hz", p.control.rate_hz);
  p.control.contact.pressure_threshold =
      kv.get_double("control.contact.pressure_threshold_pa",
                    p.control.contact.pressure_threshold);
  p.control.contact.consecutive_frames =
      kv.get_int("control.contact.consecutive_frames",
                 p.control.contact.consecutive_frames);
  p.control.contact.velocity_drop =
      kv.get_double("control.contact.velocity_drop_mps", p.control.contact.velocity_drop);
  p.control.contact.window_frames =
      kv.get_int("control.contact.window_frames", p.control.contact.window_frames);
  p.control.em2_velocity.kp =
      kv.get_double("control.em2_velocity_pid.kp_ApRadps", p.control.em2_velocity.kp);
  p.control.em2_velocity.ki =
      kv.get_double("control.em2_velocity_pid.ki", p.control.em2_velocity.ki);
  p.control.em2_velocity.kd =
      kv.get_double("control.em2_velocity_pid.kd", p.control.em2_velocity.kd);
  p.control.em2_velocity.out_max = p.line2.max_current;
  p.control.em2_velocity.out_min = -p.line2.max_current;
  p.control.hs_tracking_gain =
      kv.get_double("control.hs_tracking_gain_1ps", p.control.hs_tracking_gain);
  p.control.hf_track_kp = kv.get_double("control.hf_track_kp_Npm", p.control.hf_track_kp);
  p.control.hf_track_kd = kv.get_double("control.hf_track_kd_Nspm", p.control.hf_track_kd);
  if (kv.has("control.braking_angle_rad"))
    p.control.braking_angle = kv.require_double("control.braking_angle_rad");
  else
    p.control.braking_angle =
        kv.get_double("control.braking_angle_deg", p.control.braking_angle / kDeg) * kDeg;

  p.analysis.force_per_kg =
      kv.get_double("analysis.force_per_kg_Npkg", p.analysis.force_per_kg);
  if (kv.has("analysis.quadrant.max_throttle_angle_rad"))
    p.analysis.quadrant_max_throttle_angle =
        kv.require_double("analysis.quadrant.max_throttle_angle_rad");
  else
    p.analysis.quadrant_max_throttle_angle =
        kv.get_double("analysis.quadrant.max_throttle_angle_deg",
                      p.analysis.quadrant_max_throttle_angle / kDeg) * kDeg;
  p.analysis.quadrant_force_cap =
      kv.get_double("analysis.quadrant.force_cap_N", p.analysis.quadrant_force_cap);
  p.analysis.quadrant_speed_cap =
      kv.get_double("analysis.quadrant.speed_cap_mps", p.analysis.quadrant_speed_cap);

  // load.<label>.* blocks replace the default capability scenarios.
  std::vector<LoadScenario> loads;
  for (const auto& [key, value] : kv.entries()) {
    (void)value;
    if (key.rfind("load.", 0) != 0) continue;
    size_t dot = key.find('.', 5);
    if (dot == std::string::npos) continue;
    std::string label = key.substr(5, dot - 5);
    bool seen = false;
    for (const auto& l : loads) seen |= (l.label == label);
    if (seen) continue;
    LoadScenario l;
    l.label = label;
    l.output_mass = kv.get_double("load." + label + ".mass_kg", 17.0);
    l.external_force = kv.get_double("load." + label + ".force_N", 0.0);
    l.output_loss_coeff = kv.get_double("load." + label + ".loss_Nspm", 0.0);
    loads.push_back(l);
  }
  if (!loads.empty()) p.scenarios = loads;

  auto unread = kv.unread_keys();
  if (!unread.empty()) {
    std::string msg = kv.origin() + ": unknown keys:";
    for (const auto& k : unread)
      msg += "\n  line " + std::to_string(kv.line_of(k)) + ": " + k;
    throw ConfigError(msg);
  }

  auto errs = validate(p);
  if (!errs.empty()) {
    std::string msg = kv.origin() + ": invalid configuration:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  if (warnings) {
    auto w = validation_warnings(p);
    warnings->insert(warnings->end(), w.begin(), w.end());
  }
  return p;
}

ActuatorParams load_config(const std::string& path,
                           std::vector<std::string>* warnings) {
  return params_from_kv(KeyValueFile::parse_file(path), warnings);
}

DerivedConstants derived_constants(const ActuatorParams& p) {
  DerivedConstants d;
  d.T1 = p.line1.transformation_ratio();
  d.T2 = p.line2.transformation_ratio();
  d.mA_hs = p.line1.reflected_inertia();
  d.mA_hf = p.line2.reflected_inertia();
  d.Fmax_hs = p.line1.max_force();
  d.Fmax_hf = p.line2.max_force();
  d.vmax_hs = p.line1.max_piston_speed();
  d.vmax_hf = p.line2.max_piston_speed();
  return d;
}

std::vector<std::string> validate(const ActuatorParams& p) {
  std::vector<std::string> errs;
  check_line("line1", p.line1, errs);
  check_line("line2", p.line2, errs);

  if (!(p.fluid.density > 0.0)) errs.push_back("fluid.density_kgpm3 must be > 0");
  if (!(p.fluid.cylinder_piston_area > 0.0))
    errs.push_back("fluid.cylinder_piston_area_m2 must be > 0");

  if (!(p.valve.bore_diameter > 0.0)) errs.push_back("valve.bore_diameter_m must be > 0");
  if (!(p.valve.max_angular_speed > 0.0))
    errs.push_back("valve.max_angular_speed_radps must be > 0");
  if (p.valve.loss_map.empty()) {
    errs.push_back("valve loss map must not be empty");
  } else {
    if (p.valve.loss_map.front().first != 0.0)
      errs.push_back("valve loss map must start at angle 0");
    if (!(p.valve.loss_map.front().second > 0.0))
      errs.push_back("valve loss map k at fully open must be > 0");
    for (size_t i = 1; i < p.valve.loss_map.size(); ++i) {
      if (!(p.valve.loss_map[i].first > p.valve.loss_map[i - 1].first))
        errs.push_back("valve loss map angles must be strictly increasing");
      if (!(p.valve.loss_map[i].second > p.valve.loss_map[i - 1].second))
        errs.push_back("valve loss map k values must be strictly increasing");
    }
    if (p.valve.loss_map.back().first >= kPi / 2.0)
      errs.push_back("valve loss map must stay below 90 deg (closure is handled separately)");
  }
  if (!(p.valve.closed_tolerance > 0.0) || p.valve.closed_tolerance > 5.0 * kDeg)
    errs.push_back("valve.closed_tolerance_deg must be in (0, 5]");

  for (const auto& m : p.valve_design.materials) {
    if (!(m.density > 0.0))
      errs.push_back("material." + m.name + ".density_kgpm3 must be > 0");
    if (!(m.yield_strength > 0.0))
      errs.push_back("material." + m.name + ".yield_strength_pa must be > 0");
  }
  if (!(p.valve_design.motor_specific_power > 0.0))
    errs.push_back("valve_design.motor_specific_power_WpKg must be > 0");
  if (!(p.valve_design.gearbox_specific_torque > 0.0))
    errs.push_back("valve_design.gearbox_specific_torque_NmpKg must be > 0");

  for (const auto& s : p.scenarios) {
    if (!(s.output_mass > 0.0))
      errs.push_back("load." + s.label + ".mass_kg must be > 0");
    if (!std::isfinite(s.external_force))
      errs.push_back("load." + s.label + ".force_N must be finite");
    if (!(s.output_loss_coeff >= 0.0))
      errs.push_back("load." + s.label + ".loss_Nspm must be >= 0");
  }

  if (!(p.stroke > 0.0)) errs.push_back("cylinder.stroke_m must be > 0");
  if (!(p.cylinder_pressure_rating > 0.0))
    errs.push_back("cylinder.pressure_rating_pa must be > 0");
  if (!(p.stop_stiffness >= 0.0)) errs.push_back("stop.stiffness_Npm must be >= 0");
  if (!(p.stop_damping >= 0.0)) errs.push_back("stop.damping_Nspm must be >= 0");

  if (!(p.control.rate_hz > 0.0)) errs.push_back("control.rate_hz must be > 0");
  if (p.control.contact.consecutive_frames < 1)
    errs.push_back("control.contact.consecutive_frames must be >= 1");
  if (p.control.contact.window_frames < 2)
    errs.push_back("control.contact.window_frames must be >= 2");
  if (!(p.control.contact.pressure_threshold > 0.0))
    errs.push_back("control.contact.pressure_threshold_pa must be > 0");
  return errs;
}

std::vector<std::string> validation_warnings(const ActuatorParams& p) {
  std::vector<std::string> w;
  double t1 = p.line1.transformation_ratio();
  double t2 = p.line2.transformation_ratio();
  if (t1 > 0.0 && t2 / t1 < 10.0)
    w.push_back("T2/T1 = " + fmt(t2 / t1) +
                " < 10: the reduced high-speed model assumes line 2's mechanical"
                " advantage dominates; expect degraded accuracy");
  if (p.valve.bore_diameter < 4e-3 || p.valve.bore_diameter > 20e-3)
    w.push_back("valve bore " + fmt(p.valve.bore_diameter) +
                " m is outside the 4-20 mm torque regression range");
  return w;
}

std::string serialize(const ActuatorParams& p) {
  std::ostringstream o;
  o << "schema_version = " << p.schema_version << "\n";
  auto line = [&](const std::string& prefix, const MotorScrewLine& l) {
    o << prefix << ".torque_constant_NmpA = " << fmt(l.torque_constant) << "\n"
      << prefix << ".max_current_A = " << fmt(l.max_current) << "\n"
      << prefix << ".rotor_screw_inertia_kgm2 = " << fmt(l.rotor_screw_inertia) << "\n"
      << prefix << ".reduction_ratio = " << fmt(l.reduction_ratio) << "\n"
      << prefix << ".screw_lead_m = " << fmt(l.screw_lead) << "\n"
      << prefix << ".max_speed_radps = " << fmt(l.max_speed) << "\n"
      << prefix << ".viscous_loss_Nspm = " << fmt(l.viscous_loss_coeff) << "\n"
      << prefix << ".piston_mass_kg = " << fmt(l.piston_mass) << "\n";
  };
  line("line1", p.line1);
  line("line2", p.line2);
  o << "fluid.density_kgpm3 = " << fmt(p.fluid.density) << "\n"
    << "fluid.cylinder_piston_area_m2 = " << fmt(p.fluid.cylinder_piston_area) << "\n"
    << "cylinder.pressure_rating_pa = " << fmt(p.cylinder_pressure_rating) << "\n"
    << "cylinder.stroke_m = " << fmt(p.stroke) << "\n"
    << "stop.stiffness_Npm = " << fmt(p.stop_stiffness) << "\n"
    << "stop.damping_Nspm = " << fmt(p.stop_damping) << "\n"
    << "gravity_mps2 = " << fmt(p.gravity) << "\n"
    << "valve.bore_diameter_m = " << fmt(p.valve.bore_diameter) << "\n"
    << "valve.max_angular_speed_radps = " << fmt(p.valve.max_angular_speed) << "\n"
    << "valve.loss_map_rad = " << format_map(p.valve.loss_map) << "\n"
    << "valve.closed_tolerance_rad = " << fmt(p.valve.closed_tolerance) << "\n"
    << "valve_design.motor_specific_power_WpKg = "
    << fmt(p.valve_design.motor_specific_power) << "\n"
    << "valve_design.gearbox_specific_torque_NmpKg = "
    << fmt(p.valve_design.gearbox_specific_torque) << "\n";
  for (const auto& m : p.valve_design.materials) {
    o << "material." << m.name << ".density_kgpm3 = " << fmt(m.density) << "\n"
      << "material." << m.name << ".yield_strength_pa = " << fmt(m.yield_strength) << "\n";
  }
  o << "control.rate_hz = " << fmt(p.control.rate_hz) << "\n"
    << "control.contact.pressure_threshold_pa = "
    << fmt(p.control.contact.pressure_threshold) << "\n"
    << "control.contact.consecutive_frames = " << p.control.contact.consecutive_frames << "\n"
    << "control.contact.velocity_drop_mps = " << fmt(p.control.contact.velocity_drop) << "\n"
    << "control.contact.window_frames = " << p.control.contact.window_frames << "\n"
    << "control.em2_velocity_pid.kp_ApRadps = " << fmt(p.control.em2_velocity.kp) << "\n"
    << "control.em2_velocity_pid.ki = " << fmt(p.control.em2_velocity.ki) << "\n"
    << "control.em2_velocity_pid.kd = " << fmt(p.control.em2_velocity.kd) << "\n"
    << "control.hs_tracking_gain_1ps = " << fmt(p.control.hs_tracking_gain) << "\n"
    << "control.hf_track_kp_Npm = " << fmt(p.control.hf_track_kp) << "\n"
    << "control.hf_track_kd_Nspm = " << fmt(p.control.hf_track_kd) << "\n"
    << "control.braking_angle_rad = " << fmt(p.control.braking_angle) << "\n"
    << "analysis.force_per_kg_Npkg = " << fmt(p.analysis.force_per_kg) << "\n"
    << "analysis.quadrant.max_throttle_angle_rad = "
    << fmt(p.analysis.quadrant_max_throttle_angle) << "\n"
    << "analysis.quadrant.force_cap_N = " << fmt(p.analysis.quadrant_force_cap) << "\n"
    << "analysis.quadrant.speed_cap_mps = " << fmt(p.analysis.quadrant_speed_cap) << "\n";
  for (const auto& s : p.scenarios) {
    o << "load." << s.label << ".mass_kg = " << fmt(s.output_mass) << "\n"
      << "load." << s.label << ".force_N = " << fmt(s.external_force) << "\n"
      << "load." << s.label << ".loss_Nspm = " << fmt(s.output_loss_coeff) << "\n";
  }
  return o.str();
}

bool operator==(const MotorScrewLine& a, const MotorScrewLine& b) {
  return a.torque_constant == b.torque_constant && a.max_current == b.max_current &&
         a.rotor_screw_inertia == b.rotor_screw_inertia &&
         a.reduction_ratio == b.reduction_ratio && a.screw_lead == b.screw_lead &&
         a.max_speed == b.max_speed && a.viscous_loss_coeff == b.viscous_loss_coeff &&
         a.piston_mass == b.piston_mass;
}

bool operator==(const ActuatorParams& a, const ActuatorParams& b) {
  return serialize(a) == serialize(b);
}

}  // namespace bimodal
