// Servo ball valve: rate-limited angle tracking, the angle -> loss-coefficient
// map used by the throttling force, and the semi-empiric mass model that
// trades bore diameter against 90-degree cycle time.
#pragma once

#include <string>
#include <vector>

#include "bimodal/params.hpp"

namespace bimodal {

struct ValveDesignPoint {
  double bore_diameter = 0.0;   // m
  double cycle_time = 0.0;      // s, for the 90 degree stroke
  std::string material;
  double mass_motor = 0.0;      // kg
  double mass_gearbox = 0.0;    // kg
  double mass_body = 0.0;       // kg
  double mass_total = 0.0;      // kg
  double breakaway_torque = 0.0;  // N·m
};

// Advance the valve toward `commanded` by at most max_angular_speed * dt,
// clamped to [0, pi/2]. Never overshoots.
double step_valve(double commanded, double current, double dt,
                  const ValveSpec& spec);

// Loss coefficient at angle phi, log-linear interpolation on the spec's map.
// Clamps to the table ends; full closure is handled by the constraint swap,
// not by this map.
double loss_coefficient(double phi, const ValveSpec& spec);

// Breakaway torque fit, tau = 132 d - 0.2 (d in meters). Valid 4-20 mm;
// appends an extrapolation warning outside. Throws std::domain_error when
// the fit goes nonpositive (d below ~1.52 mm).
double breakaway_torque(double bore_diameter,
                        std::vector<std::string>* warnings = nullptr);

// Brass three-way body mass fit, m_b = 41 d - 0.07. Catalogue range
// 6.35-19.05 mm, warning outside, error when nonpositive.
double body_mass_brass(double bore_diameter,
                       std::vector<std::string>* warnings = nullptr);

// Full unit mass estimate: servo motor sized by the 90 degree cycle time,
// gearbox by specific torque, body by the brass regression scaled with the
// material's specific strength against the brass reference.
ValveDesignPoint valve_unit_mass(double bore_diameter, double cycle_time,
                                 const MaterialSpec& material,
                                 const ValveDesignConfig& cfg,
                                 std::vector<std::string>* warnings = nullptr);

// Dense design grid, row-major with d varying fastest.
struct MassMap {
  std::vector<double> diameters;    // m
  std::vector<double> cycle_times;  // s
  std::vector<ValveDesignPoint> cells;  // size = diameters * cycle_times

  const ValveDesignPoint& at(size_t i_d, size_t i_dt) const {
    return cells[i_dt * diameters.size() + i_d];
  }
};

MassMap mass_map(double d_min, double d_max, size_t d_count,
                 double dt_min, double dt_max, size_t dt_count,
                 const MaterialSpec& material, const ValveDesignConfig& cfg);

// CSV with columns d_m, dt_s, mass_motor_kg, mass_gearbox_kg, mass_body_kg,
// mass_total_kg.
std::string mass_map_csv(const MassMap& map);

}  // namespace bimodal
