#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "bimodal/params.hpp"

using namespace bimodal;

// Hand-evaluated anchors: T1 = 2*pi/0.020, T2 = 2*pi*28/0.005.
static constexpr double kT1 = 314.15926535897933;
static constexpr double kT2 = 35185.83772020568;

TEST_CASE("transformation ratios match the published mechanical advantages") {
  DerivedConstants d = derived_constants(default_params());
  CHECK(d.T1 == doctest::Approx(kT1).epsilon(1e-12));
  CHECK(d.T2 == doctest::Approx(kT2).epsilon(1e-12));
  // published rounded figures: 315 /m and 35186 /m
  CHECK(std::abs(d.T1 - 315.0) / 315.0 < 0.003);
  CHECK(std::abs(d.T2 - 35186.0) / 35186.0 < 0.003);
}

TEST_CASE("capability envelope reproduces the published table") {
  DerivedConstants d = derived_constants(default_params());
  CHECK(std::abs(d.mA_hs - 10.0) / 10.0 < 0.005);
  CHECK(std::abs(d.mA_hf - 8900.0) / 8900.0 < 0.005);
  CHECK(std::abs(d.Fmax_hs - 350.0) / 350.0 < 0.005);
  CHECK(std::abs(d.Fmax_hf - 2880.0) / 2880.0 < 0.005);
  CHECK(std::abs(d.vmax_hs - 0.8) / 0.8 < 0.005);
  CHECK(std::abs(d.vmax_hf - 0.025) / 0.025 < 0.005);
}

TEST_CASE("rotor inertia back-solve reproduces the target reflected mass") {
  ActuatorParams p = default_params();
  p.line1.piston_mass = 0.02;
  p.line1.rotor_screw_inertia = (10.0 - 0.02) / (kT1 * kT1);
  CHECK(p.line1.reflected_inertia() == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("published-style J2 lands on the high-force reflected inertia") {
  ActuatorParams p = default_params();
  p.line2.piston_mass = 1e-9;
  p.line2.rotor_screw_inertia = 7.188e-6;
  CHECK(std::abs(p.line2.reflected_inertia() - 8900.0) / 8900.0 < 0.005);
}

TEST_CASE("peak motor torque back-solve matches the force envelope") {
  ActuatorParams p = default_params();
  double peak_torque = p.line2.torque_constant * p.line2.max_current;
  CHECK(peak_torque == doctest::Approx(0.08185).epsilon(1e-3));
  CHECK(p.line2.max_force() == doctest::Approx(2880.0).epsilon(1e-9));
}

TEST_CASE("derived_constants is pure") {
  ActuatorParams p = default_params();
  DerivedConstants a = derived_constants(p);
  DerivedConstants b = derived_constants(p);
  CHECK(std::memcmp(&a, &b, sizeof a) == 0);
}

TEST_CASE("material lookup") {
  ActuatorParams p = default_params();
  REQUIRE(p.find_material("al7075") != nullptr);
  CHECK(p.find_material("al7075")->density == doctest::Approx(2810.0));
  CHECK(p.find_material("unobtainium") == nullptr);
}
