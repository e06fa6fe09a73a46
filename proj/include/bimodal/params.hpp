// Domain types and configuration for the two-speed hydrostatic actuator:
// the two motor/ballscrew/cylinder lines, fluid, valve, load cases, and the
// constants derived from them (transformation ratios, reflected inertias,
// force/speed envelopes). All quantities SI, one canonical unit each.
#pragma once

#include <string>
#include <vector>

#include "bimodal/config.hpp"

namespace bimodal {

// One motor + ballscrew + master cylinder line.
struct MotorScrewLine {
  double torque_constant = 0.0;      // N·m/A
  double max_current = 0.0;          // A
  double rotor_screw_inertia = 0.0;  // kg·m², motor rotor + screw
  double reduction_ratio = 0.0;      // motor shaft : screw
  double screw_lead = 0.0;           // m per screw revolution
  double max_speed = 0.0;            // rad/s at the motor shaft
  double viscous_loss_coeff = 0.0;   // N·s/m, acting at the piston
  double piston_mass = 0.0;          // kg, piston + fluid contribution

  // Mechanical advantage from motor angle to piston translation, 2*pi*R/lead.
  double transformation_ratio() const;
  // Inertia reflected to the piston: m + J*T^2.
  double reflected_inertia() const;
  // Peak piston force k*T*I_max and peak piston speed w_max/T.
  double max_force() const;
  double max_piston_speed() const;
};

// Load seen by the output piston for one operating condition.
struct LoadScenario {
  double output_mass = 17.0;        // kg, reflected at the output piston
  double external_force = 0.0;      // N at the piston, gravity-positive
  double output_loss_coeff = 0.0;   // N·s/m
  std::string label = "swing";
};

struct FluidSpec {
  double density = 1036.0;              // kg/m³ (propylene glycol)
  double cylinder_piston_area = 5.70e-4;  // m², for pressure reporting
};

// Servo ball valve: kinematic limit plus the angle -> loss-coefficient map.
struct ValveSpec {
  double bore_diameter = 9.52e-3;   // m
  double max_angular_speed = 12.2;  // rad/s
  // Monotone (angle rad, k) pairs, log-linear interpolated between points.
  std::vector<std::pair<double, double>> loss_map;
  double k_open = 0.05;             // k at fully open, == loss_map front
  double closed_tolerance = 0.0087266462599716477;  // rad (0.5 deg)

  double bore_area() const;  // pi d^2 / 4
};

struct MaterialSpec {
  std::string name;
  double density = 0.0;         // kg/m³
  double yield_strength = 0.0;  // Pa
};

// Constants of the valve mass model: motor specific power, gearbox specific
// torque, and the reference brass properties the body regression was fit on.
struct ValveDesignConfig {
  double motor_specific_power = 600.0;  // W/kg
  double gearbox_specific_torque = 10.0;  // N·m/kg
  MaterialSpec brass_ref{"brass", 8500.0, 200e6};
  std::vector<MaterialSpec> materials;  // brass_ref + alternatives
};

struct ContactDetectorConfig {
  double pressure_threshold = 0.15e6;  // Pa
  int consecutive_frames = 5;
  double velocity_drop = 0.05;  // m/s decrease over the window
  int window_frames = 8;
};

struct PidGains {
  double kp = 0.0, ki = 0.0, kd = 0.0;
  double out_min = 0.0, out_max = 0.0;  // saturation, also anti-windup clamp
};

struct ControlConfig {
  double rate_hz = 1000.0;
  ContactDetectorConfig contact;
  PidGains em2_velocity;           // rad/s error -> A
  double hs_tracking_gain = 1.0;   // 1/s, EM2 follows M1 stroke in HS
  double hf_track_kp = 4000.0;     // N/m, EM1 follows M2 stroke in HF
  double hf_track_kd = 360.0;      // N·s/m
  double braking_angle = 0.78539816339744828;  // rad, throttle angle (45 deg)
};

struct AnalysisConfig {
  double force_per_kg = 46.2;      // N at piston per kg of payload
  double quadrant_max_throttle_angle = 1.0471975511965976;  // rad (60 deg)
  double quadrant_force_cap = 5000.0;  // N, plot window clip
  double quadrant_speed_cap = 1.0;     // m/s
};

// Everything load_config() produces. Immutable after load.
struct ActuatorParams {
  std::string schema_version = "1.0.0";
  MotorScrewLine line1;  // lightly geared, high-pitch screw (HS line)
  MotorScrewLine line2;  // highly geared, low-pitch screw (HF line)
  FluidSpec fluid;
  ValveSpec valve;
  ValveDesignConfig valve_design;
  ControlConfig control;
  AnalysisConfig analysis;
  std::vector<LoadScenario> scenarios;  // [0] swing, [1] stance by default

  double cylinder_pressure_rating = 3.45e6;  // Pa
  double stroke = 0.10;          // m, every cylinder travels [0, stroke]
  double stop_stiffness = 1e6;   // N/m, unilateral end stop
  double stop_damping = 1e4;     // N·s/m
  double gravity = 9.81;         // m/s²

  const MaterialSpec* find_material(const std::string& name) const;
};

// Constants derived from the params; see derived_constants().
struct DerivedConstants {
  double T1 = 0.0, T2 = 0.0;          // 1/m
  double mA_hs = 0.0, mA_hf = 0.0;    // kg, reflected actuation inertia
  double Fmax_hs = 0.0, Fmax_hf = 0.0;  // N
  double vmax_hs = 0.0, vmax_hf = 0.0;  // m/s
};

ActuatorParams default_params();  // the prototype actuator of the paper
ActuatorParams params_from_kv(const KeyValueFile& kv,
                              std::vector<std::string>* warnings = nullptr);
ActuatorParams load_config(const std::string& path,
                           std::vector<std::string>* warnings = nullptr);

// Pure: same params give bit-identical output.
DerivedConstants derived_constants(const ActuatorParams& p);

// All invariant violations, empty when valid. load_config throws a
// ConfigError listing every violation; this is the underlying check.
std::vector<std::string> validate(const ActuatorParams& p);
std::vector<std::string> validation_warnings(const ActuatorParams& p);

// Canonical config text; parses back to an equal value.
std::string serialize(const ActuatorParams& p);

bool operator==(const MotorScrewLine& a, const MotorScrewLine& b);
bool operator==(const ActuatorParams& a, const ActuatorParams& b);

}  // namespace bimodal
