// Fixed-step hybrid simulation of the full actuator: classical RK4 on the
// continuous mechanics, the valve advanced by its rate limiter, the
// controller sampled at its own rate with zero-order hold, and discrete
// regime changes (valve closure, ground contact, pinning against the
// support) resolved at substep boundaries with momentum-consistent
// inelastic velocity projections. Every projection logs its kinetic energy
// defect so the energy ledger closes to integrator accuracy.
#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bimodal/control.hpp"
#include "bimodal/dynamics.hpp"
#include "bimodal/params.hpp"

namespace bimodal {

class SimulationError : public std::runtime_error {
 public:
  explicit SimulationError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class ValveRegime { Open, Closed };
enum class ScriptKind { Gait, Drop, SwingOnly, LiftOnly };

struct GroundSpec {
  bool enabled = false;
  double contact_position = 0.015;  // m, piston coordinate of foot touch
};

struct DropSpec {
  bool enabled = false;
  double height = 0.25;     // m, free-fall distance of the load
  double load_mass = 17.0;  // kg in the load frame
};

struct Scenario {
  std::string name = "scenario";
  ScriptKind script = ScriptKind::SwingOnly;
  GaitScriptConfig gait;
  LiftScriptConfig lift;
  SwingScriptConfig swing;

  double duration = 1.0;  // s
  double dt = 1e-4;       // s, integrator substep
  ContinuousState initial;
  bool start_pinned = false;

  LoadScenario swing_load{17.0, 0.0, 0.0, "swing"};
  LoadScenario stance_load{239.0, 462.0, 0.0, "stance"};
  GroundSpec ground;
  DropSpec drop;
  double force_ratio = 4.71;  // load N per piston N (and piston m/s per load m/s)

  // check.<metric>.min / .max bounds evaluated by `simulate --strict`.
  std::map<std::string, std::pair<double, double>> checks;
};

Scenario scenario_from_kv(const KeyValueFile& kv);
Scenario load_scenario(const std::string& path);

struct EnergyLedger {
  double motor_in = 0.0;         // work done by both motor drives, J
  double impact_supplied = 0.0;  // kinetic energy delivered by the drop load
  double ext_work = 0.0;         // work done against the external force
  double throttle = 0.0;         // valve throttling dissipation, >= 0
  double viscous = 0.0;          // line and output viscous dissipation
  double stop_absorbed = 0.0;    // energy absorbed by the end stops
  double event_loss = 0.0;       // inelastic projections and load handoffs
  double ke0 = 0.0;              // kinetic energy at trace start

  double residual(double ke_now) const;
  double gross(double ke_now) const;
  double residual_fraction(double ke_now) const;
};

struct TraceRow {
  double t = 0.0;
  ControlMode mode = ControlMode::HS;
  double x_o = 0, v_o = 0, x1 = 0, v1 = 0, x2 = 0, v2 = 0;
  double phi = 0;
  double I1 = 0, I2 = 0, w2_cmd = 0;
  double F_out = 0, P = 0;
  double P_throttle = 0;
  bool stops_engaged = false;  // any cylinder end stop active at this sample
  double kinetic = 0;
  EnergyLedger ledger;   // running totals at this sample
  double E_residual = 0;
};

struct SimEvent {
  double t = 0.0;
  std::string kind;
};

struct SimTrace {
  std::vector<TraceRow> rows;
  std::vector<SimEvent> events;
  std::vector<std::string> diagnostics;  // controller rejections, warnings
  double sample_dt = 1e-3;

  std::optional<double> event_time(const std::string& kind) const;
  std::string to_csv() const;  // fixed column order, documented in README
};

// Ledger summary of a finished run.
struct AuditReport {
  EnergyLedger ledger;
  double ke_final = 0.0;
  double residual = 0.0;
  double residual_fraction = 0.0;
  double peak_throttle_power = 0.0;
};
AuditReport energy_audit(const SimTrace& trace);

// Scalar metrics for summaries and `--strict` checks.
std::map<std::string, double> summarize(const SimTrace& trace);
std::string summary_text(const SimTrace& trace, const Scenario& scenario);
std::vector<std::string> check_violations(const SimTrace& trace,
                                          const Scenario& scenario);

// Maps the falling load onto the piston at contact: the piston takes
// v_load / force_ratio and the M1 line is dragged through the fluid
// consistently with the open-circuit inertia. Returns the piston speed.
double impact_coupling(double load_velocity, double force_ratio,
                       ContinuousState& state, const ActuatorParams& params,
                       const LoadScenario& new_load);

class Simulator {
 public:
  Simulator(const ActuatorParams& params, const Scenario& scenario);

  // One integrator substep; throws SimulationError on NaN or blow-up.
  void step();

  SimTrace run();  // full scenario, deterministic

  double time() const { return t_; }
  const ContinuousState& state() const { return state_; }
  ValveRegime regime() const { return regime_; }
  bool pinned() const { return pinned_; }
  const LoadScenario& active_load() const { return load_; }

  // Test hook: replace the scripted inputs with a time-continuous current
  // profile evaluated inside integrator stages (controller bypassed). Used
  // by the order-of-accuracy study.
  using SmoothInput = ActuationInput (*)(double t);
  void set_smooth_input(SmoothInput f) { smooth_input_ = f; }

  double kinetic_energy() const;
  const EnergyLedger& ledger() const { return ledger_; }

 private:
  ActuatorParams params_;
  Scenario scenario_;
  ContinuousState state_;
  ValveRegime regime_ = ValveRegime::Open;
  bool pinned_ = false;
  LoadScenario load_;
  bool stance_ = false;       // cart riding the knee (gait) / load coupled (drop)
  bool drop_armed_ = false;
  bool was_fully_open_ = true;

  double t_ = 0.0;
  long step_index_ = 0;
  long steps_per_tick_ = 10;

  StateMachine sm_;
  ContactDetector detector_;
  PidState em2_pid_;
  ControlCommand cmd_;
  double I2_ = 0.0;
  double last_tick_time_ = 0.0;
  long last_tick_step_ = -1;
  bool ticked_once_ = false;

  EnergyLedger ledger_;
  std::vector<SimEvent> events_;
  SmoothInput smooth_input_ = nullptr;

  struct Deriv {
    double dx_o, dv_o, dx1, dv1, dx2;
    double de_motor, de_ext, de_throttle, de_viscous, de_stop;
  };
  Deriv rhs(const ContinuousState& s, const ActuationInput& u) const;
  ExtraForces stop_forces(const ContinuousState& s) const;
  double current_vdot_o(const ActuationInput& u, double* line_force) const;

  void control_tick();
  void handle_events();
  void check_finite() const;
  void log_event(const std::string& kind);
  void project_velocity(double target_v_o);  // inelastic, ledger-logged
  ActuationInput input_now() const;
  double v2_of(const ContinuousState& s) const;

  friend struct SimAccess;
};

// Convenience wrapper: build, run, return the trace.
SimTrace run_scenario(const Scenario& scenario, const ActuatorParams& params);

}  // namespace bimodal
