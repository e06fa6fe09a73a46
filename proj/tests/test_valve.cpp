#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bimodal/csv.hpp"
#include "bimodal/valve.hpp"

using namespace bimodal;

namespace {
constexpr double kPi = std::numbers::pi;

// tiny deterministic generator for property checks
struct Lcg {
  unsigned long long s = 0x243F6A8885A308D3ull;
  double next() {  // in [0,1)
    s = s * 6364136223846793005ull + 1442695040888963407ull;
    return double(s >> 11) / 9007199254740992.0;
  }
};
}  // namespace

TEST_CASE("full stroke completes in the published commutation time") {
  ValveSpec spec = default_params().valve;
  double phi = 0.0, t = 0.0, dt = 1e-4;
  while (phi < kPi / 2.0) {
    phi = step_valve(kPi / 2.0, phi, dt, spec);
    t += dt;
    REQUIRE(t < 1.0);
  }
  CHECK(t == doctest::Approx(0.1288).epsilon(0.01));  // ~0.130 s published
}

TEST_CASE("rate limit arithmetic") {
  ValveSpec spec = default_params().valve;
  CHECK(step_valve(1.0, 1.0, 0.01, spec) == doctest::Approx(1.0));
  CHECK(step_valve(kPi / 2.0, 0.0, 0.001, spec) == doctest::Approx(0.0122).epsilon(1e-12));
  CHECK(step_valve(0.0, 0.0122, 0.001, spec) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("never overshoots and never exceeds the rate limit") {
  ValveSpec spec = default_params().valve;
  Lcg rng;
  double phi = 0.3;
  for (int i = 0; i < 5000; ++i) {
    double cmd = rng.next() * kPi / 2.0;
    double dt = 1e-4 + rng.next() * 5e-3;
    double next = step_valve(cmd, phi, dt, spec);
    CHECK(std::abs(next - phi) <= spec.max_angular_speed * dt * (1 + 1e-12));
    // no overshoot: next is between phi and cmd
    CHECK(((next - phi) * (cmd - phi) >= 0.0));
    CHECK(std::abs(next - cmd) <= std::abs(phi - cmd) + 1e-15);
    CHECK(next >= 0.0);
    CHECK(next <= kPi / 2.0);
    phi = next;
  }
}

TEST_CASE("loss map interpolation") {
  ValveSpec spec = default_params().valve;
  CHECK(loss_coefficient(0.0, spec) == doctest::Approx(0.05));
  // default 45 deg point is the drop-test calibration, near the 1.85e5 anchor
  double k45 = loss_coefficient(45.0 * kPi / 180.0, spec);
  CHECK(k45 == doctest::Approx(2.0e5));
  CHECK(std::abs(k45 - 1.85e5) / 1.85e5 < 0.10);
  // beyond the last table point: clamp, stays finite
  CHECK(loss_coefficient(89.9 * kPi / 180.0, spec) == doctest::Approx(1e9));
  // log-linear midpoint between adjacent samples
  double a0 = 30.0 * kPi / 180.0, a1 = 45.0 * kPi / 180.0;
  double expect = std::exp(0.5 * (std::log(2.0e3) + std::log(k45)));
  CHECK(loss_coefficient(0.5 * (a0 + a1), spec) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("loss map is monotone nondecreasing") {
  ValveSpec spec = default_params().valve;
  double prev = 0.0;
  for (int i = 0; i <= 500; ++i) {
    double phi = (kPi / 2.0) * i / 500.0;
    double k = loss_coefficient(phi, spec);
    CHECK(k >= prev);
    prev = k;
  }
}

TEST_CASE("breakaway torque fit") {
  CHECK(breakaway_torque(9.52e-3) == doctest::Approx(1.05664).epsilon(1e-9));
  CHECK(breakaway_torque(6.35e-3) == doctest::Approx(0.6382).epsilon(1e-4));
  CHECK_THROWS_AS(breakaway_torque(1.5e-3), std::domain_error);
  std::vector<std::string> warnings;
  breakaway_torque(2.5e-3, &warnings);
  CHECK(warnings.size() == 1);  // extrapolating below 4 mm
}

TEST_CASE("brass body mass fit") {
  CHECK(body_mass_brass(9.52e-3) == doctest::Approx(0.32032).epsilon(1e-9));
  CHECK(body_mass_brass(6.35e-3) == doctest::Approx(0.19035).epsilon(1e-9));
  CHECK_THROWS_AS(body_mass_brass(1.7e-3), std::domain_error);
}

TEST_CASE("brass unit mass decomposition at the prototype point") {
  ValveDesignConfig cfg = default_params().valve_design;
  ValveDesignPoint pt = valve_unit_mass(9.52e-3, 0.130, cfg.brass_ref, cfg);
  CHECK(pt.mass_motor == doctest::Approx(0.021279).epsilon(1e-4));
  CHECK(pt.mass_gearbox == doctest::Approx(0.105664).epsilon(1e-9));
  CHECK(pt.mass_body == doctest::Approx(0.32032).epsilon(1e-9));
  CHECK(pt.mass_total == doctest::Approx(0.4472630542403149).epsilon(1e-9));
  CHECK(pt.mass_total == pt.mass_motor + pt.mass_gearbox + pt.mass_body);
  // measured prototype is 415 g; the regression lands within 10 %
  CHECK(std::abs(pt.mass_total - 0.415) / 0.415 < 0.10);
}

TEST_CASE("aluminum 7075 unit mass near the published estimate") {
  ActuatorParams p = default_params();
  const MaterialSpec* al = p.find_material("al7075");
  REQUIRE(al != nullptr);
  ValveDesignPoint pt = valve_unit_mass(9.52e-3, 0.130, *al, p.valve_design);
  CHECK(pt.mass_total == doctest::Approx(0.16905).epsilon(1e-3));
  CHECK(std::abs(pt.mass_total - 0.172) / 0.172 < 0.10);  // published 172 g
}

TEST_CASE("slow-cycle limit removes the motor term") {
  ValveDesignConfig cfg = default_params().valve_design;
  ValveDesignPoint pt = valve_unit_mass(9.52e-3, 1e9, cfg.brass_ref, cfg);
  CHECK(pt.mass_motor < 1e-10);
  CHECK(pt.mass_total ==
        doctest::Approx(pt.mass_gearbox + pt.mass_body).epsilon(1e-9));
}

TEST_CASE("single-cell map degenerates to the unit estimate") {
  ValveDesignConfig cfg = default_params().valve_design;
  MassMap map = mass_map(9.52e-3, 9.52e-3, 1, 0.130, 0.130, 1, cfg.brass_ref, cfg);
  REQUIRE(map.cells.size() == 1);
  ValveDesignPoint pt = valve_unit_mass(9.52e-3, 0.130, cfg.brass_ref, cfg);
  CHECK(map.cells[0].mass_total == doctest::Approx(pt.mass_total).epsilon(1e-15));
}

TEST_CASE("mass map is positive and monotone in both axes") {
  ActuatorParams p = default_params();
  const MaterialSpec* al = p.find_material("al7075");
  MassMap map = mass_map(4e-3, 16e-3, 13, 0.02, 0.5, 17, *al, p.valve_design);
  for (const auto& c : map.cells) CHECK(c.mass_total > 0.0);
  for (size_t j = 0; j < map.cycle_times.size(); ++j)
    for (size_t i = 0; i + 1 < map.diameters.size(); ++i)
      CHECK(map.at(i, j).mass_total <= map.at(i + 1, j).mass_total);
  for (size_t i = 0; i < map.diameters.size(); ++i)
    for (size_t j = 0; j + 1 < map.cycle_times.size(); ++j)
      CHECK(map.at(i, j).mass_total >= map.at(i, j + 1).mass_total);
}

TEST_CASE("mass map csv emits the documented columns and round-trips") {
  ValveDesignConfig cfg = default_params().valve_design;
  MassMap map = mass_map(6e-3, 12e-3, 3, 0.1, 0.3, 2, cfg.brass_ref, cfg);
  std::string text = mass_map_csv(map);
  csv::Table t = csv::read(text);
  REQUIRE(t.header.size() == 6);
  CHECK(t.header[0] == "d_m");
  CHECK(t.header[5] == "mass_total_kg");
  REQUIRE(t.rows.size() == 6);
  int c_total = t.column("mass_total_kg");
  CHECK(t.number(0, c_total) == doctest::Approx(map.cells[0].mass_total).epsilon(1e-15));
}

TEST_CASE("grid validation") {
  ValveDesignConfig cfg = default_params().valve_design;
  CHECK_THROWS_AS(mass_map(4e-3, 16e-3, 0, 0.1, 0.2, 2, cfg.brass_ref, cfg),
                  std::domain_error);
  CHECK_THROWS_AS(mass_map(16e-3, 4e-3, 2, 0.1, 0.2, 2, cfg.brass_ref, cfg),
                  std::domain_error);
  CHECK_THROWS_AS(valve_unit_mass(9.52e-3, 0.0, cfg.brass_ref, cfg),
                  std::domain_error);
}
