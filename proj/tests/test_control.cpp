#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "bimodal/control.hpp"
#include "bimodal/dynamics.hpp"

using namespace bimodal;

namespace {
constexpr double kPi = std::numbers::pi;

SensorFrame frame_at(double t, double pressure = 0.0, double v = 0.0) {
  SensorFrame f;
  f.timestamp = t;
  f.slave_pressure = pressure;
  f.knee_velocity = v;
  return f;
}
}  // namespace

TEST_CASE("pid: zero error keeps zero command") {
  PidGains g{1.0, 2.0, 0.0, -10.0, 10.0};
  PidState st;
  for (int i = 0; i < 100; ++i)
    CHECK(pid_step(0.0, 0.0, st, g, 1e-3) == doctest::Approx(0.0));
}

TEST_CASE("pid: integrator freezes while saturated") {
  PidGains g{0.1, 50.0, 0.0, -1.0, 1.0};
  PidState st;
  double out1 = pid_step(100.0, 0.0, st, g, 1e-2);
  CHECK(out1 == doctest::Approx(1.0));
  double i_after_first = st.integral;
  for (int i = 0; i < 50; ++i) pid_step(100.0, 0.0, st, g, 1e-2);
  CHECK(st.integral == doctest::Approx(i_after_first));  // frozen, no windup
  // error reversal unwinds immediately
  double out2 = pid_step(-1.0, 0.0, st, g, 1e-2);
  CHECK(out2 < 1.0);
}

TEST_CASE("pid: integral action removes steady-state error") {
  PidGains g{0.5, 5.0, 0.0, -100.0, 100.0};
  PidState st;
  double plant = 0.0;
  for (int i = 0; i < 4000; ++i) {
    double u = pid_step(2.0, plant, st, g, 1e-3);
    plant += (u - plant) * 1e-3 * 20.0;  // first-order lag
  }
  CHECK(plant == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("EM2 velocity loop settles within 5 percent in closed loop") {
  // Velocity step on the closed-valve line 2 plant with the shipped gains.
  ActuatorParams p = default_params();
  double t2 = p.line2.transformation_ratio();
  PidState st;
  ContinuousState s;
  LoadScenario load{460.0, 1155.0, 0.0, "stance"};  // gravity disturbance
  double w_ref = 0.02 * t2;  // 0.02 m/s at the piston
  double dt = 1e-3;
  double w = 0.0;
  for (int i = 0; i < 600; ++i) {
    double I2 = pid_step(w_ref, w, st, p.control.em2_velocity, dt);
    ActuationInput u;
    u.I2 = I2;
    s.v_o = w / t2;
    Accel a = hf_accel(s, u, p, load);
    s.v_o += a.vdot_o * dt;
    w = s.v_o * t2;
  }
  CHECK(std::abs(w - w_ref) / w_ref < 0.05);
}

TEST_CASE("contact detector: steady swing never fires") {
  ContactDetectorConfig cfg = default_params().control.contact;
  ContactDetector det(cfg);
  for (int i = 0; i < 2000; ++i)
    CHECK(!det.update(frame_at(i * 1e-3, 0.5e5, 0.45)));
}

TEST_CASE("contact detector: impact fires within ten frames and latches") {
  ContactDetectorConfig cfg = default_params().control.contact;
  ContactDetector det(cfg);
  double t = 0.0;
  for (int i = 0; i < 50; ++i) det.update(frame_at(t += 1e-3, 4.0e5, 0.45));
  CHECK(!det.latched());  // pressure high but no deceleration: hard swing
  int fired_after = -1;
  for (int i = 0; i < 20; ++i) {
    bool fired = det.update(frame_at(t += 1e-3, 6.0e5, 0.05));
    if (fired && fired_after < 0) fired_after = i;
  }
  REQUIRE(fired_after >= 0);
  CHECK(fired_after <= 10);
  CHECK(det.update(frame_at(t += 1e-3, 0.0, 0.0)));  // latched
  det.reset();
  CHECK(!det.update(frame_at(t += 1e-3, 0.0, 0.0)));
}

TEST_CASE("contact detector: one-frame pressure spike is debounced") {
  ContactDetectorConfig cfg = default_params().control.contact;
  ContactDetector det(cfg);
  double t = 0.0;
  for (int i = 0; i < 30; ++i) det.update(frame_at(t += 1e-3, 0.2e5, 0.4));
  det.update(frame_at(t += 1e-3, 9.9e5, 0.05));  // single noisy frame
  for (int i = 0; i < 30; ++i)
    CHECK(!det.update(frame_at(t += 1e-3, 0.2e5, 0.05)));
}

TEST_CASE("state machine: declared edges only, everything else rejected") {
  ActuatorParams p = default_params();
  struct Case {
    ControlMode from;
    bool contact, closed, open;
    std::optional<Request> req;
    ControlMode expect;
  };
  const std::vector<Case> cases = {
      {ControlMode::HS, true, false, true, {}, ControlMode::Downshifting},
      {ControlMode::HS, false, false, true, Request::Downshift, ControlMode::Downshifting},
      {ControlMode::HS, false, false, true, Request::Brake, ControlMode::Braking},
      {ControlMode::HS, false, false, true, Request::Upshift, ControlMode::HS},
      {ControlMode::HS, false, false, true, Request::Release, ControlMode::HS},
      {ControlMode::HS, false, false, true, {}, ControlMode::HS},
      {ControlMode::Downshifting, false, true, false, {}, ControlMode::HF},
      {ControlMode::Downshifting, false, false, false, {}, ControlMode::Downshifting},
      {ControlMode::Downshifting, false, false, false, Request::Upshift,
       ControlMode::Downshifting},
      {ControlMode::HF, false, true, false, Request::Upshift, ControlMode::Upshifting},
      {ControlMode::HF, true, true, false, {}, ControlMode::HF},
      {ControlMode::HF, false, true, false, Request::Brake, ControlMode::HF},
      {ControlMode::Upshifting, false, false, true, {}, ControlMode::HS},
      {ControlMode::Upshifting, false, false, false, {}, ControlMode::Upshifting},
      {ControlMode::Upshifting, false, false, false, Request::Downshift,
       ControlMode::Upshifting},
      {ControlMode::Braking, false, false, true, Request::Release, ControlMode::HS},
      {ControlMode::Braking, true, false, true, {}, ControlMode::Braking},
      {ControlMode::Braking, false, false, true, Request::Downshift,
       ControlMode::Braking},
  };
  for (const auto& c : cases) {
    StateMachine sm(p, c.from);
    ModeEvents ev{c.contact, c.closed, c.open};
    HighLevelRefs refs;
    refs.request = c.req;
    refs.current_ref = 6.0;
    sm.step(ev, refs, frame_at(0.0));
    CHECK(sm.mode() == c.expect);
    bool was_legal = sm.mode() != c.from || !c.req;
    if (!was_legal) CHECK(!sm.diagnostics().empty());
  }
}

TEST_CASE("contact starts the downshift with the valve closing and current held") {
  ActuatorParams p = default_params();
  StateMachine sm(p, ControlMode::HS);
  HighLevelRefs refs;
  refs.current_ref = 20.0;  // beyond the 12 A limit: hold clamps
  ModeEvents ev;
  ev.contact = true;
  ControlCommand cmd = sm.step(ev, refs, frame_at(0.0));
  CHECK(sm.mode() == ControlMode::Downshifting);
  CHECK(cmd.phi_cmd == doctest::Approx(kPi / 2.0));
  CHECK(cmd.I1_cmd == doctest::Approx(12.0));
  // the hold persists even when the high-level reference changes
  refs.current_ref = 0.0;
  ev.contact = false;
  cmd = sm.step(ev, refs, frame_at(1e-3));
  CHECK(cmd.I1_cmd == doctest::Approx(12.0));
}

TEST_CASE("upshift opens the valve while holding the high-force commands") {
  ActuatorParams p = default_params();
  StateMachine sm(p, ControlMode::HF);
  HighLevelRefs refs;
  refs.request = Request::Upshift;
  refs.velocity_ref = 0.01;
  SensorFrame f = frame_at(0.0);
  f.x1 = 0.010;
  f.x2 = 0.014;
  ControlCommand cmd = sm.step(ModeEvents{}, refs, f);
  CHECK(sm.mode() == ControlMode::Upshifting);
  CHECK(cmd.phi_cmd == doctest::Approx(0.0));
  CHECK(cmd.w2_cmd == doctest::Approx(0.01 * p.line2.transformation_ratio()));
  CHECK(cmd.I1_cmd > 0.0);  // stroke tracking pulls x1 toward x2
}

TEST_CASE("commands saturate to actuator limits") {
  ActuatorParams p = default_params();
  StateMachine sm(p, ControlMode::HS);
  HighLevelRefs refs;
  refs.current_ref = 500.0;
  SensorFrame f = frame_at(0.0);
  f.x1 = 1.0;  // absurd stroke error
  f.x2 = -1.0;
  ControlCommand cmd = sm.step(ModeEvents{}, refs, f);
  CHECK(cmd.I1_cmd <= p.line1.max_current);
  CHECK(std::abs(cmd.w2_cmd) <= p.line2.max_speed);
  CHECK(cmd.phi_cmd >= 0.0);
  CHECK(cmd.phi_cmd <= kPi / 2.0);
}

TEST_CASE("braking mode: zero current, configured throttle angle") {
  ActuatorParams p = default_params();
  StateMachine sm(p, ControlMode::HS);
  HighLevelRefs refs;
  refs.request = Request::Brake;
  ControlCommand cmd = sm.step(ModeEvents{}, refs, frame_at(0.0));
  CHECK(sm.mode() == ControlMode::Braking);
  CHECK(cmd.I1_cmd == doctest::Approx(0.0));
  CHECK(cmd.phi_cmd == doctest::Approx(kPi / 4.0));
}

TEST_CASE("gait script phases") {
  GaitScriptConfig cfg;
  double I1max = 12.0;
  // swing: full push toward contact
  CHECK(gait_script(-1e-3, 0.0, cfg, I1max).current_ref == doctest::Approx(12.0));
  CHECK(gait_script(0.099, 0.1, cfg, I1max).current_ref == doctest::Approx(12.0));
  // lift window: velocity reference up, then down
  auto up = gait_script(0.999, 1.0, cfg, I1max);
  CHECK(up.velocity_ref == doctest::Approx(cfg.lift_speed_mps));
  auto down = gait_script(1.999, 2.0, cfg, I1max);
  CHECK(down.velocity_ref == doctest::Approx(-cfg.lift_speed_mps));
  // after the down phase: gentle set-down reference
  auto setdown = gait_script(2.799, 2.8, cfg, I1max);
  CHECK(setdown.velocity_ref == doctest::Approx(-cfg.set_down_speed_mps));
  // the upshift request fires exactly once, in its own window
  int fired = 0;
  for (int i = 0; i < 4000; ++i) {
    auto r = gait_script(i * 1e-3, (i + 1) * 1e-3, cfg, I1max);
    if (r.request == Request::Upshift) ++fired;
  }
  CHECK(fired == 1);
  // retract: negative then positive push
  CHECK(gait_script(0.0, cfg.retract_start_s + 0.01, cfg, I1max).current_ref < 0.0);
  CHECK(gait_script(0.0, cfg.retract_start_s + cfg.retract_push_s + 0.01, cfg, I1max)
            .current_ref > 0.0);
}

TEST_CASE("lift script requests downshift then upshift") {
  LiftScriptConfig cfg;
  int down = 0, up = 0;
  for (int i = 0; i < 4000; ++i) {
    auto r = lift_script(i * 1e-3, (i + 1) * 1e-3, cfg);
    if (r.request == Request::Downshift) ++down;
    if (r.request == Request::Upshift) ++up;
  }
  CHECK(down == 1);
  CHECK(up == 1);
}

TEST_CASE("drop script brakes immediately") {
  auto r = drop_script(-1e-3, 0.0);
  CHECK(r.request == Request::Brake);
  CHECK(!drop_script(0.0, 1e-3).request.has_value());
}
