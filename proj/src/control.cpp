#include "bimodal/control.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bimodal {

namespace {
constexpr double kPi = std::numbers::pi;

double clamp_sym(double v, double limit) {
  return std::clamp(v, -limit, limit);
}

// window semantics for scheduled one-shot requests
bool fires(double t_prev, double t, double at) {
  return t_prev < at && at <= t;
}
}  // namespace

const char* to_string(ControlMode m) {
  switch (m) {
    case ControlMode::HS: return "HS";
    case ControlMode::Downshifting: return "DOWNSHIFTING";
    case ControlMode::HF: return "HF";
    case ControlMode::Upshifting: return "UPSHIFTING";
    case ControlMode::Braking: return "BRAKING";
  }
  return "?";
}

bool ContactDetector::update(const SensorFrame& frame) {
  if (latched_) return true;
  if (frame.slave_pressure > cfg_.pressure_threshold)
    ++pressure_streak_;
  else
    pressure_streak_ = 0;

  speeds_.push_back(std::abs(frame.knee_velocity));
  size_t need = static_cast<size_t>(cfg_.window_frames) + 1;
  if (speeds_.size() > need) speeds_.pop_front();

  bool dropped = speeds_.size() == need &&
                 (speeds_.front() - speeds_.back()) >= cfg_.velocity_drop;
  if (pressure_streak_ >= cfg_.consecutive_frames && dropped) latched_ = true;
  return latched_;
}

void ContactDetector::reset() {
  latched_ = false;
  pressure_streak_ = 0;
  speeds_.clear();
}

double pid_step(double setpoint, double measurement, PidState& state,
                const PidGains& gains, double dt) {
  double error = setpoint - measurement;
  double derivative =
      state.has_prev ? gains.kd * (error - state.prev_error) / dt : 0.0;
  double integral_next = state.integral + gains.ki * error * dt;
  double raw = gains.kp * error + integral_next + derivative;
  double out = std::clamp(raw, gains.out_min, gains.out_max);
  bool saturated_further = (raw > gains.out_max && error > 0.0) ||
                           (raw < gains.out_min && error < 0.0);
  if (!saturated_further) state.integral = integral_next;
  state.prev_error = error;
  state.has_prev = true;
  return out;
}

void StateMachine::transition(ControlMode next) { mode_ = next; }

ControlCommand StateMachine::step(const ModeEvents& events,
                                  const HighLevelRefs& refs,
                                  const SensorFrame& sensors) {
  const ActuatorParams& p = *params_;

  auto reject = [&](Request r) {
    const char* what = r == Request::Downshift   ? "downshift"
                       : r == Request::Upshift   ? "upshift"
                       : r == Request::Brake     ? "brake"
                                                 : "release";
    diagnostics_.push_back(std::string("rejected ") + what + " request in mode " +
                           to_string(mode_));
  };

  switch (mode_) {
    case ControlMode::HS:
      if (events.contact && !contact_consumed_) {
        contact_consumed_ = true;  // latched detector feeds one downshift
        hold_current_ = clamp_sym(refs.current_ref, p.line1.max_current);
        transition(ControlMode::Downshifting);
      } else if (refs.request == Request::Downshift) {
        hold_current_ = clamp_sym(refs.current_ref, p.line1.max_current);
        transition(ControlMode::Downshifting);
      } else if (refs.request == Request::Brake) {
        transition(ControlMode::Braking);
      } else if (refs.request) {
        reject(*refs.request);
      }
      break;
    case ControlMode::Downshifting:
      if (events.valve_closed) transition(ControlMode::HF);
      if (refs.request) reject(*refs.request);
      break;
    case ControlMode::HF:
      if (refs.request == Request::Upshift)
        transition(ControlMode::Upshifting);
      else if (refs.request)
        reject(*refs.request);
      break;
    case ControlMode::Upshifting:
      if (events.valve_open) transition(ControlMode::HS);
      if (refs.request) reject(*refs.request);
      break;
    case ControlMode::Braking:
      if (refs.request == Request::Release)
        transition(ControlMode::HS);
      else if (refs.request)
        reject(*refs.request);
      break;
  }

  ControlCommand cmd;
  double t2 = p.line2.transformation_ratio();
  double t1 = p.line1.transformation_ratio();
  auto track_w2 = [&]() {
    // EM2 follows M1's stroke so both masters stay near the slave stroke.
    double v2_des = p.control.hs_tracking_gain * (sensors.x1 - sensors.x2);
    return clamp_sym(v2_des * t2, p.line2.max_speed);
  };
  auto track_i1 = [&]() {
    // EM1 follows M2's position along the free reservoir path; damping uses
    // a backward difference of the measured M1 stroke.
    double dt = have_prev_x1_ ? sensors.timestamp - prev_x1_time_ : 0.0;
    double v1_est = dt > 0.0 ? (sensors.x1 - prev_x1_) / dt : 0.0;
    double f = p.control.hf_track_kp * (sensors.x2 - sensors.x1) -
               p.control.hf_track_kd * v1_est;
    return clamp_sym(f / (p.line1.torque_constant * t1), p.line1.max_current);
  };

  switch (mode_) {
    case ControlMode::HS:
      cmd.I1_cmd = clamp_sym(refs.current_ref, p.line1.max_current);
      cmd.w2_cmd = track_w2();
      cmd.phi_cmd = 0.0;
      break;
    case ControlMode::Downshifting:
      cmd.I1_cmd = hold_current_;
      cmd.w2_cmd = clamp_sym(refs.velocity_ref * t2, p.line2.max_speed);
      cmd.phi_cmd = kPi / 2.0;
      break;
    case ControlMode::HF:
      cmd.I1_cmd = track_i1();
      cmd.w2_cmd = clamp_sym(refs.velocity_ref * t2, p.line2.max_speed);
      cmd.phi_cmd = kPi / 2.0;
      break;
    case ControlMode::Upshifting:
      cmd.I1_cmd = track_i1();
      cmd.w2_cmd = clamp_sym(refs.velocity_ref * t2, p.line2.max_speed);
      cmd.phi_cmd = 0.0;
      break;
    case ControlMode::Braking:
      cmd.I1_cmd = 0.0;
      cmd.w2_cmd = clamp_sym(refs.velocity_ref * t2, p.line2.max_speed);
      cmd.phi_cmd = p.control.braking_angle;
      break;
  }
  prev_x1_ = sensors.x1;
  prev_x1_time_ = sensors.timestamp;
  have_prev_x1_ = true;
  return cmd;
}

HighLevelRefs gait_script(double t_prev, double t, const GaitScriptConfig& cfg,
                          double I1max) {
  HighLevelRefs refs;
  if (fires(t_prev, t, cfg.upshift_at_s)) refs.request = Request::Upshift;

  if (t < cfg.swing_current_until_s) {
    refs.current_ref = cfg.swing_current_frac * I1max;
  } else if (t < cfg.retract_start_s) {
    refs.current_ref = 0.0;
  } else if (t < cfg.retract_start_s + cfg.retract_push_s) {
    refs.current_ref = -cfg.retract_current_frac * I1max;
  } else if (t < cfg.retract_start_s + cfg.retract_push_s + cfg.retract_brake_s) {
    refs.current_ref = cfg.retract_current_frac * I1max;
  } else {
    refs.current_ref = 0.0;
  }

  double down_end = cfg.lift_start_s + cfg.lift_up_s + cfg.lift_down_s;
  if (t >= cfg.lift_start_s && t < cfg.lift_start_s + cfg.lift_up_s)
    refs.velocity_ref = cfg.lift_speed_mps;
  else if (t >= cfg.lift_start_s + cfg.lift_up_s && t < down_end)
    refs.velocity_ref = -cfg.lift_speed_mps;
  else if (t >= down_end && t < cfg.retract_start_s)
    refs.velocity_ref = -cfg.set_down_speed_mps;
  else
    refs.velocity_ref = 0.0;
  return refs;
}

HighLevelRefs lift_script(double t_prev, double t, const LiftScriptConfig& cfg) {
  HighLevelRefs refs;
  if (fires(t_prev, t, cfg.downshift_at_s)) refs.request = Request::Downshift;
  if (fires(t_prev, t, cfg.upshift_at_s)) refs.request = Request::Upshift;

  refs.current_ref = 0.0;
  if (t >= cfg.lift_start_s && t < cfg.lift_start_s + cfg.lift_up_s)
    refs.velocity_ref = cfg.lift_speed_mps;
  else if (t >= cfg.lift_start_s + cfg.lift_up_s &&
           t < cfg.lift_start_s + cfg.lift_up_s + cfg.lift_down_s)
    refs.velocity_ref = -cfg.lift_speed_mps;
  else
    refs.velocity_ref = 0.0;
  return refs;
}

HighLevelRefs swing_script(double t_prev, double t, const SwingScriptConfig& cfg,
                           double I1max) {
  (void)t_prev;
  HighLevelRefs refs;
  double f = cfg.current_frac * I1max;
  double p1 = cfg.push_s, p2 = 2 * cfg.push_s, rest = 2 * cfg.push_s + cfg.pause_s;
  if (t < p1)
    refs.current_ref = f;  // accelerate out
  else if (t < p2)
    refs.current_ref = -f;  // brake
  else if (t < rest)
    refs.current_ref = 0.0;
  else if (t < rest + p1)
    refs.current_ref = -f;  // accelerate home
  else if (t < rest + p2)
    refs.current_ref = f;  // brake
  else
    refs.current_ref = 0.0;
  return refs;
}

HighLevelRefs drop_script(double t_prev, double t) {
  HighLevelRefs refs;
  if (fires(t_prev, t, 0.0)) refs.request = Request::Brake;
  return refs;
}

}  // namespace bimodal
