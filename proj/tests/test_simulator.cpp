#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bimodal/simulator.hpp"

using namespace bimodal;

namespace {
constexpr double kPi = std::numbers::pi;
const std::string kRepo = BIMODAL_REPO_DIR;

Scenario repo_scenario(const std::string& name) {
  return load_scenario(kRepo + "/configs/scenarios/" + name + ".cfg");
}

Scenario rest_scenario() {
  Scenario sc;
  sc.script = ScriptKind::SwingOnly;
  sc.swing.current_frac = 0.0;
  sc.duration = 0.2;
  sc.initial.x_o = 0.05;
  sc.initial.x1 = 0.025;
  sc.initial.x2 = 0.025;
  return sc;
}

ActuationInput smooth_profile(double t) {
  ActuationInput u;
  u.I1 = 0.5 + 0.3 * std::sin(2.0 * kPi * t / 0.07);
  u.I2 = 0.0;
  return u;
}

struct StateVec {
  double x_o, v_o, x1, v1, x2;
};

StateVec terminal_state(const Scenario& sc, const ActuatorParams& p,
                        bool smooth) {
  Simulator sim(p, sc);
  if (smooth) sim.set_smooth_input(&smooth_profile);
  long n = std::lround(sc.duration / sc.dt);
  for (long i = 0; i < n; ++i) sim.step();
  const ContinuousState& s = sim.state();
  return StateVec{s.x_o, s.v_o, s.x1, s.v1, s.x2};
}

double state_distance(const StateVec& a, const StateVec& b) {
  // velocities weighted by a 0.1 s horizon so both kinds of error count
  double d = 0.0;
  d += (a.x_o - b.x_o) * (a.x_o - b.x_o);
  d += (a.x1 - b.x1) * (a.x1 - b.x1);
  d += (a.x2 - b.x2) * (a.x2 - b.x2);
  d += 0.01 * (a.v_o - b.v_o) * (a.v_o - b.v_o);
  d += 0.01 * (a.v1 - b.v1) * (a.v1 - b.v1);
  return std::sqrt(d);
}

double state_norm(const StateVec& a) {
  return state_distance(a, StateVec{0, 0, 0, 0, 0});
}
}  // namespace

TEST_CASE("rest is a fixed point and the ledger stays zero") {
  ActuatorParams p = default_params();
  Scenario sc = rest_scenario();  // strokes aligned: no tracking motion
  SimTrace trace = run_scenario(sc, p);
  const TraceRow& last = trace.rows.back();
  CHECK(last.x_o == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(last.v_o == 0.0);
  CHECK(last.ledger.motor_in == 0.0);
  CHECK(last.ledger.throttle == 0.0);
  CHECK(last.ledger.ext_work == 0.0);
  CHECK(last.ledger.event_loss == 0.0);
  CHECK(last.ledger.residual_fraction(last.kinetic) == 0.0);
}

TEST_CASE("traces are bit-identical across runs") {
  ActuatorParams p = default_params();
  Scenario sc = repo_scenario("gait");
  SimTrace a = run_scenario(sc, p);
  SimTrace b = run_scenario(sc, p);
  CHECK(a.to_csv() == b.to_csv());
}

TEST_CASE("trace csv carries the documented fixed column order") {
  ActuatorParams p = default_params();
  Scenario sc = rest_scenario();
  sc.duration = 0.01;
  SimTrace t = run_scenario(sc, p);
  std::string csv = t.to_csv();
  CHECK(csv.rfind("t_s,mode,x_o_m,v_o_mps,x1_m,v1_mps,x2_m,v2_mps,phi_rad,"
                  "I1_A,w2_cmd_radps,F_out_N,P_Pa,P_throttle_W,E_residual_J\n",
                  0) == 0);
  CHECK(t.rows.size() == 11);  // 1 kHz samples plus the terminal row
}

TEST_CASE("halving dt moves the gait terminal state by less than 0.1 percent") {
  ActuatorParams p = default_params();
  Scenario sc = repo_scenario("gait");
  StateVec coarse = terminal_state(sc, p, false);
  Scenario fine = sc;
  fine.dt = sc.dt / 2.0;
  StateVec refined = terminal_state(fine, p, false);
  CHECK(state_distance(coarse, refined) / state_norm(refined) < 1e-3);
}

TEST_CASE("integrator shows fourth-order self-convergence on smooth inputs") {
  ActuatorParams p = default_params();
  Scenario sc;
  sc.script = ScriptKind::SwingOnly;
  sc.duration = 0.2;
  sc.initial.x_o = 0.02;
  sc.initial.x1 = 0.015;
  sc.initial.x2 = 0.005;
  sc.initial.v_o = 0.10;
  sc.initial.v1 = 0.08;
  sc.initial.valve_angle = 30.0 * kPi / 180.0;

  auto run_at = [&](double dt) {
    Scenario s = sc;
    s.dt = dt;
    return terminal_state(s, p, true);
  };
  StateVec ref = run_at(1.25e-5);  // dt/8 reference
  double e1 = state_distance(run_at(1e-4), ref);
  double e2 = state_distance(run_at(5e-5), ref);
  double slope = std::log2(e1 / e2);
  CHECK(slope > 3.3);
  CHECK(slope < 4.8);
}

TEST_CASE("kinematic constraint holds on open-valve segments of the gait") {
  ActuatorParams p = default_params();
  Scenario sc = repo_scenario("gait");
  SimTrace trace = run_scenario(sc, p);
  auto closed_t = trace.event_time("valve_closed");
  REQUIRE(closed_t.has_value());
  double x2_datum = sc.initial.x2 - (sc.initial.x_o - sc.initial.x1);
  int checked = 0;
  for (const auto& r : trace.rows) {
    if (r.t >= *closed_t) break;
    CHECK(std::abs(r.v_o - r.v1 - r.v2) < 1e-6);
    CHECK(std::abs(r.x2 - (r.x_o - r.x1) - x2_datum) < 1e-6);
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("constraint swap happens within one control tick of closure") {
  ActuatorParams p = default_params();
  Scenario sc = repo_scenario("gait");
  SimTrace trace = run_scenario(sc, p);
  auto closed_t = trace.event_time("valve_closed");
  auto hf_t = trace.event_time("hf_entry");
  REQUIRE(closed_t.has_value());
  REQUIRE(hf_t.has_value());
  CHECK(*hf_t - *closed_t <= 1.0 / p.control.rate_hz + 1e-9);

  // the swap fires when the commanded sweep crosses the closure tolerance
  double expected = (kPi / 2.0 - p.valve.closed_tolerance) / p.valve.max_angular_speed;
  auto ds_t = trace.event_time("downshift_entry");
  REQUIRE(ds_t.has_value());
  CHECK(*closed_t - *ds_t == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("impact coupling maps load speed through the force ratio") {
  ActuatorParams p = default_params();
  ContinuousState s;
  LoadScenario load{377.1, 785.4, 0.0, "drop"};

  double v = impact_coupling(2.2147, 1.0, s, p, load);
  CHECK(v == doctest::Approx(2.2147));  // unit ratio: piston speed = load speed
  CHECK(s.v_o == doctest::Approx(2.2147));

  ContinuousState s2;
  double v2 = impact_coupling(2.2147, 4.71, s2, p, load);
  CHECK(v2 == doctest::Approx(0.4702).epsilon(1e-3));
  // the M1 column is dragged along through the fluid, M2 barely moves
  CHECK(s2.v1 == doctest::Approx(s2.v_o).epsilon(2e-3));
}

TEST_CASE("drop contact time and speed follow free fall") {
  ActuatorParams p = default_params();
  Scenario sc = repo_scenario("drop");
  SimTrace trace = run_scenario(sc, p);
  auto t_imp = trace.event_time("impact");
  REQUIRE(t_imp.has_value());
  double expected = std::sqrt(2.0 * sc.drop.height / p.gravity);  // 0.22576 s
  CHECK(*t_imp == doctest::Approx(expected).epsilon(2e-3));
}

TEST_CASE("energy ledger closes on every shipped scenario") {
  ActuatorParams p = default_params();
  for (const std::string name : {"gait", "drop", "swing-only", "lift-only"}) {
    SimTrace trace = run_scenario(repo_scenario(name), p);
    AuditReport rep = energy_audit(trace);
    INFO("scenario ", name);
    CHECK(rep.residual_fraction <= 0.005);
    for (const auto& r : trace.rows) {
      CHECK(std::isfinite(r.x_o));
      CHECK(std::isfinite(r.v_o));
      CHECK(std::isfinite(r.E_residual));
    }
  }
}

TEST_CASE("stiff numerics abort with a diagnostic instead of NaNs") {
  ActuatorParams p = default_params();
  p.stop_stiffness = 1e14;  // far beyond what the substep can resolve
  p.stop_damping = 0.0;
  Scenario sc = repo_scenario("drop");
  sc.duration = 0.6;
  CHECK_THROWS_AS(run_scenario(sc, p), SimulationError);
}

TEST_CASE("dt must divide the control period") {
  ActuatorParams p = default_params();
  Scenario sc = rest_scenario();
  sc.dt = 3e-4;
  CHECK_THROWS_AS(Simulator(p, sc), SimulationError);
}

TEST_CASE("scenario parsing rejects unknown keys and bad checks") {
  CHECK_THROWS_AS(scenario_from_kv(KeyValueFile::parse_text(
                      "schema_version = 1.0.0\nscenario.nme = x\n")),
                  ConfigError);
  CHECK_THROWS_AS(scenario_from_kv(KeyValueFile::parse_text(
                      "schema_version = 1.0.0\ncheck.foo.mid = 1\n")),
                  ConfigError);
  CHECK_THROWS_AS(scenario_from_kv(KeyValueFile::parse_text(
                      "schema_version = 1.0.0\nscenario.script = warp\n")),
                  ConfigError);
}

TEST_CASE("summary checks catch violations") {
  ActuatorParams p = default_params();
  Scenario sc = repo_scenario("swing-only");
  sc.checks["max_F_out_N"] = {-1e9, 1.0};  // impossible bound
  SimTrace trace = run_scenario(sc, p);
  auto viol = check_violations(trace, sc);
  REQUIRE(viol.size() == 1);
  CHECK(viol[0].find("max_F_out_N") != std::string::npos);
}
