// Mode-switching controller: per-mode motor commands, the contact-triggered
// downshift, stroke cross-tracking between the master cylinders, and the
// hard-coded high-level motion scripts used by the scenarios.
//
// EM1 is current-commanded (its force maps almost directly to line
// pressure), EM2 is velocity-commanded behind a low-level PID, and the valve
// is position-commanded. The state machine sequences
// HS -> DOWNSHIFTING -> HF -> UPSHIFTING -> HS plus an HS <-> BRAKING pair.
#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "bimodal/params.hpp"

namespace bimodal {

enum class ControlMode { HS, Downshifting, HF, Upshifting, Braking };

const char* to_string(ControlMode m);

struct ControlCommand {
  double I1_cmd = 0.0;   // A, saturated to line 1 limits
  double w2_cmd = 0.0;   // rad/s at the EM2 shaft, saturated
  double phi_cmd = 0.0;  // rad in [0, pi/2]
};

struct SensorFrame {
  double knee_position = 0.0;   // m, slave piston
  double knee_velocity = 0.0;   // m/s
  double slave_pressure = 0.0;  // Pa, signed, extension positive
  double x1 = 0.0;              // m
  double x2 = 0.0;              // m
  double valve_angle = 0.0;     // rad
  double timestamp = 0.0;       // s
};

// Debounced ground-contact detection: sustained slave pressure plus a drop
// in knee speed over a short window. Latches once fired.
class ContactDetector {
 public:
  explicit ContactDetector(const ContactDetectorConfig& cfg) : cfg_(cfg) {}
  bool update(const SensorFrame& frame);
  bool latched() const { return latched_; }
  void reset();

 private:
  ContactDetectorConfig cfg_;
  std::deque<double> speeds_;
  int pressure_streak_ = 0;
  bool latched_ = false;
};

struct PidState {
  double integral = 0.0;
  double prev_error = 0.0;
  bool has_prev = false;
};

// One PI(D) update. The integrator is held whenever the raw output is beyond
// the saturation bound and the error would push it further out.
double pid_step(double setpoint, double measurement, PidState& state,
                const PidGains& gains, double dt);

enum class Request { Downshift, Upshift, Brake, Release };

struct HighLevelRefs {
  std::optional<Request> request;
  double current_ref = 0.0;   // A, EM1 reference while in HS
  double velocity_ref = 0.0;  // m/s at the piston, EM2 reference
};

struct ModeEvents {
  bool contact = false;
  bool valve_closed = false;
  bool valve_open = false;
};

class StateMachine {
 public:
  StateMachine(const ActuatorParams& params, ControlMode initial = ControlMode::HS)
      : params_(&params), mode_(initial) {}

  ControlCommand step(const ModeEvents& events, const HighLevelRefs& refs,
                      const SensorFrame& sensors);

  ControlMode mode() const { return mode_; }
  // Rejected transition requests, with the mode they were rejected in.
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  const ActuatorParams* params_;
  ControlMode mode_;
  bool contact_consumed_ = false;
  double hold_current_ = 0.0;  // force-holding EM1 current during downshift
  double prev_x1_ = 0.0;       // for the HF stroke-tracking damping term
  double prev_x1_time_ = 0.0;
  bool have_prev_x1_ = false;
  std::vector<std::string> diagnostics_;

  void transition(ControlMode next);
};

// ---- hard-coded high-level scripts -----------------------------------------

struct GaitScriptConfig {
  double swing_current_frac = 1.0;  // of I1max, driving the leg into contact
  double swing_current_until_s = 0.5;
  double lift_start_s = 0.5;
  double lift_speed_mps = 0.02;
  double lift_up_s = 1.0;
  double lift_down_s = 1.0;
  double set_down_speed_mps = 0.004;  // gentle descent until the support takes over
  double upshift_at_s = 3.0;
  double retract_start_s = 3.2;
  double retract_current_frac = 0.06;
  double retract_push_s = 0.08;
  double retract_brake_s = 0.08;
};

struct LiftScriptConfig {
  double downshift_at_s = 0.1;
  double lift_start_s = 0.6;
  double lift_speed_mps = 0.02;
  double lift_up_s = 1.0;
  double lift_down_s = 1.0;
  double upshift_at_s = 2.9;
};

struct SwingScriptConfig {
  double current_frac = 0.35;
  double push_s = 0.12;
  double pause_s = 0.10;
};

// Refs for the control tick covering (t_prev, t]; requests are emitted in
// the tick whose window contains their scheduled time.
HighLevelRefs gait_script(double t_prev, double t, const GaitScriptConfig& cfg,
                          double I1max);
HighLevelRefs lift_script(double t_prev, double t, const LiftScriptConfig& cfg);
HighLevelRefs swing_script(double t_prev, double t, const SwingScriptConfig& cfg,
                           double I1max);
HighLevelRefs drop_script(double t_prev, double t);

}  // namespace bimodal
