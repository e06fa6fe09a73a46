#include "bimodal/valve.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace bimodal {

namespace {
constexpr double kPi = std::numbers::pi;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

double step_valve(double commanded, double current, double dt,
                  const ValveSpec& spec) {
  commanded = std::clamp(commanded, 0.0, kPi / 2.0);
  current = std::clamp(current, 0.0, kPi / 2.0);
  double max_step = spec.max_angular_speed * dt;
  double delta = commanded - current;
  if (std::abs(delta) <= max_step) return commanded;
  return current + (delta > 0.0 ? max_step : -max_step);
}

double loss_coefficient(double phi, const ValveSpec& spec) {
  const auto& map = spec.loss_map;
  if (phi <= map.front().first) return map.front().second;
  if (phi >= map.back().first) return map.back().second;
  size_t hi = 1;
  while (map[hi].first < phi) ++hi;
  const auto& [a0, k0] = map[hi - 1];
  const auto& [a1, k1] = map[hi];
  double t = (phi - a0) / (a1 - a0);
  return std::exp(std::log(k0) + t * (std::log(k1) - std::log(k0)));
}

double breakaway_torque(double d, std::vector<std::string>* warnings) {
  double tau = 132.0 * d - 0.2;
  if (tau <= 0.0)
    throw std::domain_error("breakaway torque fit is nonpositive at bore " +
                            fmt(d) + " m (fit floor ~1.52 mm)");
  if (warnings && (d < 4e-3 || d > 20e-3))
    warnings->push_back("bore " + fmt(d) +
                        " m outside the 4-20 mm breakaway torque fit range");
  return tau;
}

double body_mass_brass(double d, std::vector<std::string>* warnings) {
  double mb = 41.0 * d - 0.07;
  if (mb <= 0.0)
    throw std::domain_error("brass body mass fit is nonpositive at bore " +
                            fmt(d) + " m (fit floor ~1.71 mm)");
  if (warnings && (d < 6.35e-3 || d > 19.05e-3))
    warnings->push_back("bore " + fmt(d) +
                        " m outside the 6.35-19.05 mm body mass catalogue range");
  return mb;
}

ValveDesignPoint valve_unit_mass(double d, double cycle_time,
                                 const MaterialSpec& material,
                                 const ValveDesignConfig& cfg,
                                 std::vector<std::string>* warnings) {
  if (!(cycle_time > 0.0))
    throw std::domain_error("valve cycle time must be > 0, got " + fmt(cycle_time));
  ValveDesignPoint pt;
  pt.bore_diameter = d;
  pt.cycle_time = cycle_time;
  pt.material = material.name;
  pt.breakaway_torque = breakaway_torque(d, warnings);

  // Motor must hold the breakaway torque over the whole 90 degree stroke.
  pt.mass_motor = kPi * pt.breakaway_torque /
                  (2.0 * cfg.motor_specific_power * cycle_time);
  pt.mass_gearbox = pt.breakaway_torque / cfg.gearbox_specific_torque;

  double brass_mass = body_mass_brass(d, warnings);
  const MaterialSpec& ref = cfg.brass_ref;
  double strength_ratio = (material.density / material.yield_strength) *
                          (ref.yield_strength / ref.density);
  pt.mass_body = strength_ratio * brass_mass;
  pt.mass_total = pt.mass_motor + pt.mass_gearbox + pt.mass_body;
  return pt;
}

MassMap mass_map(double d_min, double d_max, size_t d_count,
                 double dt_min, double dt_max, size_t dt_count,
                 const MaterialSpec& material, const ValveDesignConfig& cfg) {
  if (d_count < 1 || dt_count < 1)
    throw std::domain_error("mass map grid must have at least one cell per axis");
  if (!(d_min > 0.0) || d_max < d_min || !(dt_min > 0.0) || dt_max < dt_min)
    throw std::domain_error("mass map ranges must be positive and ordered");
  MassMap map;
  map.diameters.resize(d_count);
  map.cycle_times.resize(dt_count);
  for (size_t i = 0; i < d_count; ++i)
    map.diameters[i] =
        d_count == 1 ? d_min : d_min + (d_max - d_min) * double(i) / double(d_count - 1);
  for (size_t j = 0; j < dt_count; ++j)
    map.cycle_times[j] =
        dt_count == 1 ? dt_min
                      : dt_min + (dt_max - dt_min) * double(j) / double(dt_count - 1);
  map.cells.reserve(d_count * dt_count);
  for (size_t j = 0; j < dt_count; ++j)
    for (size_t i = 0; i < d_count; ++i)
      map.cells.push_back(
          valve_unit_mass(map.diameters[i], map.cycle_times[j], material, cfg));
  return map;
}

std::string mass_map_csv(const MassMap& map) {
  std::ostringstream o;
  o << "d_m,dt_s,mass_motor_kg,mass_gearbox_kg,mass_body_kg,mass_total_kg\n";
  for (const auto& c : map.cells) {
    o << fmt(c.bore_diameter) << ',' << fmt(c.cycle_time) << ','
      << fmt(c.mass_motor) << ',' << fmt(c.mass_gearbox) << ','
      << fmt(c.mass_body) << ',' << fmt(c.mass_total) << '\n';
  }
  return o.str();
}

}  // namespace bimodal
