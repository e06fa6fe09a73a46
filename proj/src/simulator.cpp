#include "bimodal/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "bimodal/csv.hpp"
#include "bimodal/valve.hpp"

namespace bimodal {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kUnpinForceBand = 1.0;  // N hysteresis on pin release

std::string fd(double v) { return csv::format_double(v); }
}  // namespace

// ---- scenario parsing -------------------------------------------------------

Scenario scenario_from_kv(const KeyValueFile& kv) {
  Scenario sc;
  std::string ver = kv.get_string("schema_version", "");
  if (ver.empty())
    throw ConfigError(kv.origin() + ": missing required key `schema_version`");
  if (ver.rfind("1.", 0) != 0)
    throw ConfigError(kv.origin() + ": unsupported schema_version " + ver);

  sc.name = kv.get_string("scenario.name", sc.name);
  std::string script = kv.get_string("scenario.script", "swing-only");
  if (script == "gait") sc.script = ScriptKind::Gait;
  else if (script == "drop") sc.script = ScriptKind::Drop;
  else if (script == "swing-only" || script == "swing_only") sc.script = ScriptKind::SwingOnly;
  else if (script == "lift-only" || script == "lift_only") sc.script = ScriptKind::LiftOnly;
  else throw ConfigError(kv.origin() + ": unknown scenario.script `" + script + "`");

  sc.duration = kv.get_double("scenario.duration_s", sc.duration);
  sc.dt = kv.get_double("scenario.dt_s", sc.dt);

  sc.initial.x_o = kv.get_double("scenario.initial.x_o_m", 0.0);
  sc.initial.v_o = kv.get_double("scenario.initial.v_o_mps", 0.0);
  sc.initial.x1 = kv.get_double("scenario.initial.x1_m", sc.initial.x_o);
  sc.initial.v1 = kv.get_double("scenario.initial.v1_mps", 0.0);
  sc.initial.x2 = kv.get_double("scenario.initial.x2_m", sc.initial.x_o - sc.initial.x1);
  sc.initial.valve_angle =
      kv.get_double("scenario.initial.valve_angle_deg", 0.0) * kPi / 180.0;
  sc.start_pinned = kv.get_bool("scenario.start_pinned", false);

  auto load = [&](const std::string& which, LoadScenario& l) {
    l.output_mass = kv.get_double("scenario.load." + which + ".mass_kg", l.output_mass);
    l.external_force = kv.get_double("scenario.load." + which + ".force_N", l.external_force);
    l.output_loss_coeff =
        kv.get_double("scenario.load." + which + ".loss_Nspm", l.output_loss_coeff);
    l.label = which;
  };
  load("swing", sc.swing_load);
  load("stance", sc.stance_load);

  if (kv.has("scenario.ground.contact_position_m")) {
    sc.ground.enabled = true;
    sc.ground.contact_position = kv.require_double("scenario.ground.contact_position_m");
  }
  if (kv.has("scenario.drop.height_m") || kv.has("scenario.drop.load_mass_kg")) {
    sc.drop.enabled = true;
    sc.drop.height = kv.get_double("scenario.drop.height_m", sc.drop.height);
    sc.drop.load_mass = kv.get_double("scenario.drop.load_mass_kg", sc.drop.load_mass);
  }
  sc.force_ratio = kv.get_double("scenario.force_ratio", sc.force_ratio);

  sc.gait.swing_current_frac =
      kv.get_double("scenario.gait.swing_current_frac", sc.gait.swing_current_frac);
  sc.gait.swing_current_until_s = kv.get_double("scenario.gait.swing_current_until_s",
                                                sc.gait.swing_current_until_s);
  sc.gait.set_down_speed_mps =
      kv.get_double("scenario.gait.set_down_speed_mps", sc.gait.set_down_speed_mps);
  sc.gait.lift_start_s = kv.get_double("scenario.gait.lift_start_s", sc.gait.lift_start_s);
  sc.gait.lift_speed_mps = kv.get_double("scenario.gait.lift_speed_mps", sc.gait.lift_speed_mps);
  sc.gait.lift_up_s = kv.get_double("scenario.gait.lift_up_s", sc.gait.lift_up_s);
  sc.gait.lift_down_s = kv.get_double("scenario.gait.lift_down_s", sc.gait.lift_down_s);
  sc.gait.upshift_at_s = kv.get_double("scenario.gait.upshift_at_s", sc.gait.upshift_at_s);
  sc.gait.retract_start_s =
      kv.get_double("scenario.gait.retract_start_s", sc.gait.retract_start_s);
  sc.gait.retract_current_frac =
      kv.get_double("scenario.gait.retract_current_frac", sc.gait.retract_current_frac);
  sc.gait.retract_push_s = kv.get_double("scenario.gait.retract_push_s", sc.gait.retract_push_s);
  sc.gait.retract_brake_s =
      kv.get_double("scenario.gait.retract_brake_s", sc.gait.retract_brake_s);

  sc.lift.downshift_at_s = kv.get_double("scenario.lift.downshift_at_s", sc.lift.downshift_at_s);
  sc.lift.lift_start_s = kv.get_double("scenario.lift.lift_start_s", sc.lift.lift_start_s);
  sc.lift.lift_speed_mps = kv.get_double("scenario.lift.lift_speed_mps", sc.lift.lift_speed_mps);
  sc.lift.lift_up_s = kv.get_double("scenario.lift.lift_up_s", sc.lift.lift_up_s);
  sc.lift.lift_down_s = kv.get_double("scenario.lift.lift_down_s", sc.lift.lift_down_s);
  sc.lift.upshift_at_s = kv.get_double("scenario.lift.upshift_at_s", sc.lift.upshift_at_s);

  sc.swing.current_frac = kv.get_double("scenario.swing.current_frac", sc.swing.current_frac);
  sc.swing.push_s = kv.get_double("scenario.swing.push_s", sc.swing.push_s);
  sc.swing.pause_s = kv.get_double("scenario.swing.pause_s", sc.swing.pause_s);

  for (const auto& [key, value] : kv.entries()) {
    (void)value;
    if (key.rfind("check.", 0) != 0) continue;
    bool is_min = key.size() > 4 && key.compare(key.size() - 4, 4, ".min") == 0;
    bool is_max = key.size() > 4 && key.compare(key.size() - 4, 4, ".max") == 0;
    if (!is_min && !is_max)
      throw ConfigError(kv.origin() + ": check key must end in .min or .max: " + key);
    std::string metric = key.substr(6, key.size() - 6 - 4);
    auto& bounds = sc.checks.try_emplace(metric,
        std::make_pair(-std::numeric_limits<double>::infinity(),
                       std::numeric_limits<double>::infinity())).first->second;
    double v = kv.require_double(key);
    (is_min ? bounds.first : bounds.second) = v;
  }

  auto unread = kv.unread_keys();
  if (!unread.empty()) {
    std::string msg = kv.origin() + ": unknown scenario keys:";
    for (const auto& k : unread) msg += "\n  " + k;
    throw ConfigError(msg);
  }

  if (!(sc.dt > 0.0)) throw ConfigError(kv.origin() + ": scenario.dt_s must be > 0");
  if (sc.duration < sc.dt)
    throw ConfigError(kv.origin() + ": scenario.duration_s must be >= dt");
  return sc;
}

Scenario load_scenario(const std::string& path) {
  return scenario_from_kv(KeyValueFile::parse_file(path));
}

// ---- energy ledger ----------------------------------------------------------

double EnergyLedger::residual(double ke_now) const {
  return motor_in + impact_supplied - (ke_now - ke0) - ext_work - throttle -
         viscous - stop_absorbed - event_loss;
}

double EnergyLedger::gross(double ke_now) const {
  return std::abs(motor_in) + std::abs(impact_supplied) + std::abs(ext_work) +
         std::abs(ke_now - ke0) + std::abs(throttle) + std::abs(viscous) +
         std::abs(stop_absorbed) + std::abs(event_loss);
}

double EnergyLedger::residual_fraction(double ke_now) const {
  double g = gross(ke_now);
  if (g < 1e-12) return 0.0;
  return std::abs(residual(ke_now)) / g;
}

// ---- trace ------------------------------------------------------------------

std::optional<double> SimTrace::event_time(const std::string& kind) const {
  for (const auto& e : events)
    if (e.kind == kind) return e.t;
  return std::nullopt;
}

std::string SimTrace::to_csv() const {
  std::ostringstream o;
  o << "t_s,mode,x_o_m,v_o_mps,x1_m,v1_mps,x2_m,v2_mps,phi_rad,I1_A,"
       "w2_cmd_radps,F_out_N,P_Pa,P_throttle_W,E_residual_J\n";
  for (const auto& r : rows) {
    o << fd(r.t) << ',' << to_string(r.mode) << ',' << fd(r.x_o) << ','
      << fd(r.v_o) << ',' << fd(r.x1) << ',' << fd(r.v1) << ',' << fd(r.x2)
      << ',' << fd(r.v2) << ',' << fd(r.phi) << ',' << fd(r.I1) << ','
      << fd(r.w2_cmd) << ',' << fd(r.F_out) << ',' << fd(r.P) << ','
      << fd(r.P_throttle) << ',' << fd(r.E_residual) << '\n';
  }
  return o.str();
}

// ---- simulator --------------------------------------------------------------

Simulator::Simulator(const ActuatorParams& params, const Scenario& scenario)
    : params_(params),
      scenario_(scenario),
      state_(scenario.initial),
      load_(scenario.swing_load),
      sm_(params_, ControlMode::HS),
      detector_(params.control.contact) {
  double ticks = 1.0 / (params_.control.rate_hz * scenario_.dt);
  steps_per_tick_ = std::lround(ticks);
  if (steps_per_tick_ < 1 || std::abs(ticks - double(steps_per_tick_)) > 1e-6)
    throw SimulationError("integrator dt must divide the control period");

  pinned_ = scenario_.start_pinned;
  stance_ = scenario_.start_pinned;
  if (pinned_) {
    load_ = scenario_.stance_load;
    state_.v_o = 0.0;
  }
  drop_armed_ = scenario_.drop.enabled;
  if (state_.valve_angle >= kPi / 2.0 - params_.valve.closed_tolerance)
    regime_ = ValveRegime::Closed;
  was_fully_open_ = state_.valve_angle <= params_.valve.closed_tolerance;
  ledger_.ke0 = kinetic_energy();
  em2_pid_ = PidState{};
}

double Simulator::v2_of(const ContinuousState& s) const {
  if (regime_ == ValveRegime::Open) return pinned_ ? -s.v1 : s.v_o - s.v1;
  return pinned_ ? 0.0 : s.v_o;
}

double Simulator::kinetic_energy() const {
  double mu1 = params_.line1.reflected_inertia();
  double mu2 = params_.line2.reflected_inertia();
  const ContinuousState& s = state_;
  if (regime_ == ValveRegime::Open) {
    if (pinned_) return 0.5 * (mu1 + mu2) * s.v1 * s.v1;
    double v2 = s.v_o - s.v1;
    return 0.5 * load_.output_mass * s.v_o * s.v_o + 0.5 * mu1 * s.v1 * s.v1 +
           0.5 * mu2 * v2 * v2;
  }
  if (pinned_) return 0.5 * mu1 * s.v1 * s.v1;
  return 0.5 * (load_.output_mass + mu2) * s.v_o * s.v_o +
         0.5 * mu1 * s.v1 * s.v1;
}

ExtraForces Simulator::stop_forces(const ContinuousState& s) const {
  auto stop = [&](double x, double v) {
    double k = params_.stop_stiffness, d = params_.stop_damping;
    double f = 0.0;
    if (x < 0.0) f = std::max(0.0, k * (-x) + d * (-v));
    else if (x > params_.stroke)
      f = -std::max(0.0, k * (x - params_.stroke) + d * v);
    return f;
  };
  ExtraForces e;
  e.on_output = stop(s.x_o, s.v_o);
  e.on_m1 = stop(s.x1, s.v1);
  e.on_m2 = stop(s.x2, v2_of(s));
  return e;
}

Simulator::Deriv Simulator::rhs(const ContinuousState& s,
                                const ActuationInput& u) const {
  Deriv d{};
  ExtraForces stops = stop_forces(s);
  double v2 = v2_of(s);

  if (pinned_) {
    double line = 0.0;
    double vdot1 = (regime_ == ValveRegime::Open)
                       ? pinned_accel_open(s, u, params_, stops, &line)
                       : pinned_accel_closed(s, u, params_, stops, &line);
    d.dx_o = 0.0;
    d.dv_o = 0.0;
    d.dx1 = s.v1;
    d.dv1 = vdot1;
    d.dx2 = v2;
  } else if (regime_ == ValveRegime::Open) {
    Accel a = full_accel(s, u, params_, load_, stops);
    d.dx_o = s.v_o;
    d.dv_o = a.vdot_o;
    d.dx1 = s.v1;
    d.dv1 = a.vdot_1;
    d.dx2 = v2;
  } else {
    Accel a = hf_accel(s, u, params_, load_, stops);
    d.dx_o = s.v_o;
    d.dv_o = a.vdot_o;
    d.dx1 = s.v1;
    d.dv1 = a.vdot_1;
    d.dx2 = v2;
  }

  double f1 = line_drive_force(params_.line1, u.I1, s.v1);
  double f2 = line_drive_force(params_.line2, u.I2, v2);
  d.de_motor = f1 * s.v1 + f2 * v2;
  d.de_ext = load_.external_force * (pinned_ ? 0.0 : s.v_o);
  d.de_throttle = (regime_ == ValveRegime::Open)
                      ? throttle_force(u.valve_angle, s.v1, params_.fluid,
                                       params_.valve) * s.v1
                      : 0.0;
  d.de_viscous = params_.line1.viscous_loss_coeff * s.v1 * s.v1 +
                 params_.line2.viscous_loss_coeff * v2 * v2 +
                 load_.output_loss_coeff * s.v_o * s.v_o * (pinned_ ? 0.0 : 1.0);
  d.de_stop = -(stops.on_output * (pinned_ ? 0.0 : s.v_o) + stops.on_m1 * s.v1 +
                stops.on_m2 * v2);
  return d;
}

ActuationInput Simulator::input_now() const {
  return ActuationInput{cmd_.I1_cmd, I2_, state_.valve_angle};
}

double Simulator::current_vdot_o(const ActuationInput& u,
                                 double* line_force) const {
  ExtraForces stops = stop_forces(state_);
  if (pinned_) {
    double line = 0.0;
    if (regime_ == ValveRegime::Open)
      pinned_accel_open(state_, u, params_, stops, &line);
    else
      pinned_accel_closed(state_, u, params_, stops, &line);
    if (line_force) *line_force = line;
    return 0.0;
  }
  double vdot = (regime_ == ValveRegime::Open)
                    ? full_accel(state_, u, params_, load_, stops).vdot_o
                    : hf_accel(state_, u, params_, load_, stops).vdot_o;
  if (line_force) {
    OutputForce f = output_force_and_pressure(vdot, state_, params_, load_,
                                              stops.on_output);
    *line_force = f.force;
  }
  return vdot;
}

void Simulator::log_event(const std::string& kind) {
  events_.push_back(SimEvent{t_, kind});
}

void Simulator::control_tick() {
  double tick_dt = 1.0 / params_.control.rate_hz;
  double t_prev = ticked_once_ ? last_tick_time_ : t_ - tick_dt;

  double line_force = 0.0;
  current_vdot_o(input_now(), &line_force);
  SensorFrame frame;
  frame.knee_position = state_.x_o;
  frame.knee_velocity = state_.v_o;
  frame.slave_pressure = line_force / params_.fluid.cylinder_piston_area;
  frame.x1 = state_.x1;
  frame.x2 = state_.x2;
  frame.valve_angle = state_.valve_angle;
  frame.timestamp = t_;

  bool was_latched = detector_.latched();
  ModeEvents ev;
  ev.contact = detector_.update(frame);
  if (!was_latched && ev.contact) log_event("contact_detected");
  ev.valve_closed = state_.valve_angle >= kPi / 2.0 - params_.valve.closed_tolerance;
  ev.valve_open = state_.valve_angle <= params_.valve.closed_tolerance;

  HighLevelRefs refs;
  switch (scenario_.script) {
    case ScriptKind::Gait:
      refs = gait_script(t_prev, t_, scenario_.gait, params_.line1.max_current);
      break;
    case ScriptKind::Drop:
      refs = drop_script(t_prev, t_);
      break;
    case ScriptKind::SwingOnly:
      refs = swing_script(t_prev, t_, scenario_.swing, params_.line1.max_current);
      break;
    case ScriptKind::LiftOnly:
      refs = lift_script(t_prev, t_, scenario_.lift);
      break;
  }

  ControlMode before = sm_.mode();
  cmd_ = sm_.step(ev, refs, frame);
  ControlMode after = sm_.mode();
  if (after != before) {
    switch (after) {
      case ControlMode::Downshifting: log_event("downshift_entry"); break;
      case ControlMode::HF: log_event("hf_entry"); break;
      case ControlMode::Upshifting: log_event("upshift_entry"); break;
      case ControlMode::HS: log_event("hs_entry"); break;
      case ControlMode::Braking: log_event("brake_entry"); break;
    }
  }

  double w2_meas = v2_of(state_) * params_.line2.transformation_ratio();
  I2_ = pid_step(cmd_.w2_cmd, w2_meas, em2_pid_, params_.control.em2_velocity,
                 tick_dt);

  last_tick_time_ = t_;
  last_tick_step_ = step_index_;
  ticked_once_ = true;
}

void Simulator::project_velocity(double target_v_o) {
  // Impulse along the output coordinate; the rest of the circuit follows per
  // the active inertia metric.
  double mu1 = params_.line1.reflected_inertia();
  double mu2 = params_.line2.reflected_inertia();
  double dv = target_v_o - state_.v_o;
  if (regime_ == ValveRegime::Open) {
    state_.v1 += dv * mu2 / (mu1 + mu2);
  }
  state_.v_o = target_v_o;
}

double impact_coupling(double load_velocity, double force_ratio,
                       ContinuousState& state, const ActuatorParams& params,
                       const LoadScenario& new_load) {
  (void)new_load;
  double mu1 = params.line1.reflected_inertia();
  double mu2 = params.line2.reflected_inertia();
  double target = load_velocity / force_ratio;
  double dv = target - state.v_o;
  state.v1 += dv * mu2 / (mu1 + mu2);
  state.v_o = target;
  return target;
}

void Simulator::handle_events() {
  double mu1 = params_.line1.reflected_inertia();
  double mu2 = params_.line2.reflected_inertia();

  // Drop load reaching the ground.
  if (drop_armed_) {
    double g = params_.gravity;
    double y = scenario_.drop.height - 0.5 * g * t_ * t_;
    if (y <= 0.0) {
      double v_load = g * t_;  // downward
      double ke_before = kinetic_energy();
      double supplied = 0.5 * scenario_.drop.load_mass * v_load * v_load;
      impact_coupling(-v_load, scenario_.force_ratio, state_, params_,
                      scenario_.stance_load);
      load_ = scenario_.stance_load;
      stance_ = true;
      double ke_after = kinetic_energy();
      ledger_.impact_supplied += supplied;
      ledger_.event_loss += ke_before + supplied - ke_after;
      drop_armed_ = false;
      log_event("impact");
    }
  }

  // Valve crossing the closure tolerance swaps the constraint set.
  double closed_at = kPi / 2.0 - params_.valve.closed_tolerance;
  if (regime_ == ValveRegime::Open && state_.valve_angle >= closed_at) {
    double ke_before = kinetic_energy();
    if (!pinned_) {
      double v2 = state_.v_o - state_.v1;
      double common = (load_.output_mass * state_.v_o + mu2 * v2) /
                      (load_.output_mass + mu2);
      state_.v_o = common;  // M2 column and output merge; M1 is freed
    }
    regime_ = ValveRegime::Closed;
    double ke_after = kinetic_energy();
    ledger_.event_loss += ke_before - ke_after;
    log_event("valve_closed");
  } else if (regime_ == ValveRegime::Closed && state_.valve_angle < closed_at) {
    double ke_before = kinetic_energy();
    if (!pinned_) {
      // Re-impose v_o = v1 + v2 over the three inertias.
      double v2 = state_.v_o;
      double defect = state_.v_o - state_.v1 - v2;
      double s = 1.0 / load_.output_mass + 1.0 / mu1 + 1.0 / mu2;
      double lambda = defect / s;
      state_.v_o -= lambda / load_.output_mass;
      state_.v1 += lambda / mu1;
    } else {
      double lambda = -state_.v1 / (1.0 / mu1 + 1.0 / mu2);
      state_.v1 += lambda / mu1;
    }
    regime_ = ValveRegime::Open;
    double ke_after = kinetic_energy();
    ledger_.event_loss += ke_before - ke_after;
    log_event("regime_open");
  }

  // Fully-open crossing, for transition timing.
  bool fully_open = state_.valve_angle <= params_.valve.closed_tolerance;
  if (fully_open && !was_fully_open_) log_event("valve_open");
  was_fully_open_ = fully_open;

  // Ground contact bookkeeping (gait-style scenarios).
  if (scenario_.ground.enabled) {
    double xc = scenario_.ground.contact_position;
    if (!pinned_ && !stance_ && state_.x_o >= xc && state_.v_o > 0.0) {
      // Foot plants and the knee starts carrying the resting cart.
      double ke_before = kinetic_energy();
      LoadScenario old = load_;
      load_ = scenario_.stance_load;
      stance_ = true;
      if (regime_ == ValveRegime::Open) {
        Mat2 h_old = mass_matrix(params_, old.output_mass);
        Mat2 h_new = mass_matrix(params_, load_.output_mass);
        double b0 = h_old.a00 * state_.v_o + h_old.a01 * state_.v1;
        double b1 = h_old.a10 * state_.v_o + h_old.a11 * state_.v1;
        h_new.solve(b0, b1, state_.v_o, state_.v1);
      } else {
        state_.v_o = (old.output_mass + mu2) * state_.v_o /
                     (load_.output_mass + mu2);
      }
      double ke_after = kinetic_energy();
      ledger_.event_loss += ke_before - ke_after;
      log_event("pickup");
    } else if (!pinned_ && stance_ && state_.x_o <= xc && state_.v_o < 0.0) {
      // Cart back on its support: output coordinate pinned.
      double ke_before = kinetic_energy();
      project_velocity(0.0);
      pinned_ = true;
      double ke_after = kinetic_energy();
      ledger_.event_loss += ke_before - ke_after;
      log_event("pinned");
    } else if (pinned_) {
      double line_force = 0.0;
      current_vdot_o(input_now(), &line_force);
      if (line_force > load_.external_force + kUnpinForceBand) {
        double ke_before = kinetic_energy();
        pinned_ = false;  // cart lifts off the support
        double ke_after = kinetic_energy();
        ledger_.event_loss += ke_before - ke_after;
        log_event("unpin_lift");
      } else if (line_force < -kUnpinForceBand) {
        double ke_before = kinetic_energy();
        pinned_ = false;  // foot lifts off the ground
        stance_ = false;
        load_ = scenario_.swing_load;
        double ke_after = kinetic_energy();
        ledger_.event_loss += ke_before - ke_after;
        log_event("foot_off");
      }
    }
  }
}

void Simulator::check_finite() const {
  const ContinuousState& s = state_;
  bool ok = std::isfinite(s.x_o) && std::isfinite(s.v_o) && std::isfinite(s.x1) &&
            std::isfinite(s.v1) && std::isfinite(s.x2) &&
            std::abs(s.v_o) < 1e3 && std::abs(s.v1) < 1e3 &&
            std::abs(s.x_o) < 1e3 && std::abs(s.x1) < 1e3 && std::abs(s.x2) < 1e3;
  if (!ok) {
    std::ostringstream o;
    o << "simulation diverged at t=" << t_ << " s: x_o=" << s.x_o
      << " v_o=" << s.v_o << " x1=" << s.x1 << " v1=" << s.v1 << " x2=" << s.x2;
    throw SimulationError(o.str());
  }
}

void Simulator::step() {
  if (step_index_ % steps_per_tick_ == 0 && last_tick_step_ != step_index_ &&
      !smooth_input_)
    control_tick();

  double dt = scenario_.dt;
  ActuationInput u_held = input_now();

  auto eval = [&](const ContinuousState& s, double stage_t) {
    if (smooth_input_) {
      ActuationInput u = smooth_input_(stage_t);
      u.valve_angle = state_.valve_angle;
      return rhs(s, u);
    }
    return rhs(s, u_held);
  };
  auto advanced = [&](const Deriv& d, double h) {
    ContinuousState s = state_;
    s.x_o += d.dx_o * h;
    s.v_o += d.dv_o * h;
    s.x1 += d.dx1 * h;
    s.v1 += d.dv1 * h;
    s.x2 += d.dx2 * h;
    return s;
  };

  Deriv k1 = eval(state_, t_);
  Deriv k2 = eval(advanced(k1, dt / 2), t_ + dt / 2);
  Deriv k3 = eval(advanced(k2, dt / 2), t_ + dt / 2);
  Deriv k4 = eval(advanced(k3, dt), t_ + dt);

  auto mix = [&](double a, double b, double c, double d) {
    return dt * (a + 2 * b + 2 * c + d) / 6.0;
  };
  state_.x_o += mix(k1.dx_o, k2.dx_o, k3.dx_o, k4.dx_o);
  state_.v_o += mix(k1.dv_o, k2.dv_o, k3.dv_o, k4.dv_o);
  state_.x1 += mix(k1.dx1, k2.dx1, k3.dx1, k4.dx1);
  state_.v1 += mix(k1.dv1, k2.dv1, k3.dv1, k4.dv1);
  state_.x2 += mix(k1.dx2, k2.dx2, k3.dx2, k4.dx2);
  ledger_.motor_in += mix(k1.de_motor, k2.de_motor, k3.de_motor, k4.de_motor);
  ledger_.ext_work += mix(k1.de_ext, k2.de_ext, k3.de_ext, k4.de_ext);
  ledger_.throttle += mix(k1.de_throttle, k2.de_throttle, k3.de_throttle, k4.de_throttle);
  ledger_.viscous += mix(k1.de_viscous, k2.de_viscous, k3.de_viscous, k4.de_viscous);
  ledger_.stop_absorbed += mix(k1.de_stop, k2.de_stop, k3.de_stop, k4.de_stop);

  if (!smooth_input_)
    state_.valve_angle = step_valve(cmd_.phi_cmd, state_.valve_angle, dt,
                                    params_.valve);

  t_ = double(step_index_ + 1) * dt;
  ++step_index_;

  handle_events();
  check_finite();
}

SimTrace Simulator::run() {
  SimTrace trace;
  trace.sample_dt = 1.0 / params_.control.rate_hz;
  long n_steps = std::lround(scenario_.duration / scenario_.dt);

  auto make_row = [&]() {
    TraceRow r;
    r.t = t_;
    r.mode = sm_.mode();
    r.x_o = state_.x_o;
    r.v_o = state_.v_o;
    r.x1 = state_.x1;
    r.v1 = state_.v1;
    r.x2 = state_.x2;
    r.v2 = v2_of(state_);
    r.phi = state_.valve_angle;
    r.I1 = cmd_.I1_cmd;
    r.I2 = I2_;
    r.w2_cmd = cmd_.w2_cmd;
    double line_force = 0.0;
    current_vdot_o(input_now(), &line_force);
    r.F_out = line_force;
    r.P = line_force / params_.fluid.cylinder_piston_area;
    r.P_throttle = (regime_ == ValveRegime::Open)
                       ? throttle_force(state_.valve_angle, state_.v1,
                                        params_.fluid, params_.valve) * state_.v1
                       : 0.0;
    ExtraForces stops = stop_forces(state_);
    r.stops_engaged =
        stops.on_output != 0.0 || stops.on_m1 != 0.0 || stops.on_m2 != 0.0;
    r.kinetic = kinetic_energy();
    r.ledger = ledger_;
    r.E_residual = ledger_.residual(r.kinetic);
    return r;
  };

  for (long i = 0; i < n_steps; ++i) {
    if (step_index_ % steps_per_tick_ == 0) {
      if (!smooth_input_) control_tick();
      trace.rows.push_back(make_row());
    }
    step();
  }
  if (step_index_ % steps_per_tick_ == 0) {
    if (!smooth_input_) control_tick();
    trace.rows.push_back(make_row());
  }
  trace.events = events_;
  trace.diagnostics = sm_.diagnostics();
  return trace;
}

SimTrace run_scenario(const Scenario& scenario, const ActuatorParams& params) {
  Simulator sim(params, scenario);
  return sim.run();
}

// ---- audit and summaries ----------------------------------------------------

AuditReport energy_audit(const SimTrace& trace) {
  AuditReport rep;
  if (trace.rows.empty()) return rep;
  const TraceRow& last = trace.rows.back();
  rep.ledger = last.ledger;
  rep.ke_final = last.kinetic;
  rep.residual = last.ledger.residual(last.kinetic);
  rep.residual_fraction = last.ledger.residual_fraction(last.kinetic);
  for (const auto& r : trace.rows)
    rep.peak_throttle_power = std::max(rep.peak_throttle_power, r.P_throttle);
  return rep;
}

std::map<std::string, double> summarize(const SimTrace& trace) {
  std::map<std::string, double> m;
  if (trace.rows.empty()) return m;

  auto contact_t = trace.event_time("pickup");
  if (!contact_t) contact_t = trace.event_time("impact");
  auto detect_t = trace.event_time("contact_detected");
  auto ds_entry = trace.event_time("downshift_entry");
  auto closed_t = trace.event_time("valve_closed");
  auto hf_t = trace.event_time("hf_entry");
  auto us_entry = trace.event_time("upshift_entry");
  auto open_t = trace.event_time("valve_open");

  if (ds_entry && closed_t && *closed_t > *ds_entry)
    m["downshift_duration_s"] = *closed_t - *ds_entry;
  if (us_entry && open_t && *open_t > *us_entry)
    m["upshift_duration_s"] = *open_t - *us_entry;
  if (contact_t && detect_t && *detect_t >= *contact_t)
    m["detect_latency_s"] = *detect_t - *contact_t;
  m["missed_contact"] = (contact_t && !detect_t) ? 1.0 : 0.0;

  double min_force_window = std::numeric_limits<double>::infinity();
  double t0 = contact_t.value_or(-1.0), t1 = hf_t.value_or(-1.0);
  double peak_brake = 0.0, peak_throttle = 0.0, max_abs_p = 0.0;
  double min_f = std::numeric_limits<double>::infinity();
  double max_f = -std::numeric_limits<double>::infinity();
  for (const auto& r : trace.rows) {
    if (t0 >= 0.0 && t1 > t0 && r.t >= t0 && r.t <= t1)
      min_force_window = std::min(min_force_window, r.F_out);
    // Braking force: output force opposing motion, excluding samples where a
    // mechanical end stop is carrying the load.
    if (r.F_out * r.v_o < 0.0 && !r.stops_engaged)
      peak_brake = std::max(peak_brake, std::abs(r.F_out));
    peak_throttle = std::max(peak_throttle, r.P_throttle);
    max_abs_p = std::max(max_abs_p, std::abs(r.P));
    min_f = std::min(min_f, r.F_out);
    max_f = std::max(max_f, r.F_out);
  }
  if (std::isfinite(min_force_window))
    m["min_force_downshift_N"] = min_force_window;
  m["peak_braking_force_N"] = peak_brake;
  m["peak_throttle_power_W"] = peak_throttle;
  m["max_abs_pressure_pa"] = max_abs_p;
  m["min_F_out_N"] = min_f;
  m["max_F_out_N"] = max_f;

  const TraceRow& last = trace.rows.back();
  m["energy_residual_frac"] = last.ledger.residual_fraction(last.kinetic);
  m["energy_residual_J"] = last.ledger.residual(last.kinetic);
  m["final_x_o_m"] = last.x_o;
  m["final_v_o_mps"] = last.v_o;
  return m;
}

std::vector<std::string> check_violations(const SimTrace& trace,
                                          const Scenario& scenario) {
  std::vector<std::string> out;
  auto metrics = summarize(trace);
  for (const auto& [metric, bounds] : scenario.checks) {
    auto it = metrics.find(metric);
    if (it == metrics.end()) {
      out.push_back("check `" + metric + "`: metric not produced by this run");
      continue;
    }
    if (it->second < bounds.first)
      out.push_back("check `" + metric + "`: " + fd(it->second) + " < min " +
                    fd(bounds.first));
    if (it->second > bounds.second)
      out.push_back("check `" + metric + "`: " + fd(it->second) + " > max " +
                    fd(bounds.second));
  }
  return out;
}

std::string summary_text(const SimTrace& trace, const Scenario& scenario) {
  std::ostringstream o;
  o << "scenario: " << scenario.name << "\n";
  for (const auto& [k, v] : summarize(trace)) o << "  " << k << " = " << v << "\n";
  o << "  events:";
  for (const auto& e : trace.events) o << " " << e.kind << "@" << e.t;
  o << "\n";
  auto viol = check_violations(trace, scenario);
  if (scenario.checks.empty()) {
    o << "  checks: none\n";
  } else if (viol.empty()) {
    o << "  checks: all " << scenario.checks.size() << " passed\n";
  } else {
    for (const auto& v : viol) o << "  FAILED " << v << "\n";
  }
  for (const auto& d : trace.diagnostics) o << "  note: " << d << "\n";
  return o.str();
}

}  // namespace bimodal
