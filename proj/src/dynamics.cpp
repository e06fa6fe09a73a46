#include "bimodal/dynamics.hpp"

#include <cmath>
#include <stdexcept>

#include "bimodal/valve.hpp"

namespace bimodal {

void Mat2::solve(double b0, double b1, double& x0, double& x1) const {
  double d = det();
  double scale = std::abs(a00 * a11) + std::abs(a01 * a10);
  if (!(std::abs(d) > 1e-12 * std::max(scale, 1e-30)))
    throw std::domain_error("singular mass matrix");
  x0 = (b0 * a11 - b1 * a01) / d;
  x1 = (a00 * b1 - a10 * b0) / d;
}

Mat2 mass_matrix(const ActuatorParams& p, double output_mass) {
  double mu1 = p.line1.reflected_inertia();
  double mu2 = p.line2.reflected_inertia();
  return Mat2{output_mass + mu2, -mu2, -mu2, mu1 + mu2};
}

double throttle_force(double phi, double v1, const FluidSpec& fluid,
                      const ValveSpec& valve) {
  if (v1 == 0.0) return 0.0;
  double k = loss_coefficient(phi, valve);
  double mag = 0.5 * k * v1 * v1 * fluid.density * valve.bore_area();
  return v1 > 0.0 ? mag : -mag;
}

double line_drive_force(const MotorScrewLine& line, double current,
                        double piston_velocity) {
  double t = line.transformation_ratio();
  double vmax = line.max_piston_speed();
  if (current * piston_velocity > 0.0 && std::abs(piston_velocity) >= vmax)
    return 0.0;
  return line.torque_constant * t * current;
}

namespace {

// Branch forces delivered to the shared line side of each master piston.
double branch1(const ContinuousState& s, const ActuationInput& u,
               const ActuatorParams& p, bool valve_open) {
  double f = line_drive_force(p.line1, u.I1, s.v1) -
             p.line1.viscous_loss_coeff * s.v1;
  if (valve_open) f -= throttle_force(u.valve_angle, s.v1, p.fluid, p.valve);
  return f;
}

double branch2(const ActuationInput& u, const ActuatorParams& p, double v2) {
  return line_drive_force(p.line2, u.I2, v2) -
         p.line2.viscous_loss_coeff * v2;
}

}  // namespace

Accel full_accel(const ContinuousState& s, const ActuationInput& u,
                 const ActuatorParams& p, const LoadScenario& load,
                 const ExtraForces& extra) {
  double v2 = s.v_o - s.v1;
  double f1 = branch1(s, u, p, /*valve_open=*/true);
  double f2 = branch2(u, p, v2);
  Mat2 h = mass_matrix(p, load.output_mass);
  double rhs0 = f2 + extra.on_m2 + extra.on_output -
                load.output_loss_coeff * s.v_o - load.external_force;
  double rhs1 = f1 - f2 + extra.on_m1 - extra.on_m2;
  Accel a;
  h.solve(rhs0, rhs1, a.vdot_o, a.vdot_1);
  return a;
}

double constrained_full_accel(const ContinuousState& s, const ActuationInput& u,
                              const ActuatorParams& p, const LoadScenario& load,
                              const ExtraForces& extra) {
  // Row one of the full model with vdot_1 = 0 and v1 = 0 imposed.
  ContinuousState sc = s;
  sc.v1 = 0.0;
  double v2 = sc.v_o;
  double f2 = branch2(u, p, v2);
  Mat2 h = mass_matrix(p, load.output_mass);
  double rhs0 = f2 + extra.on_m2 + extra.on_output -
                load.output_loss_coeff * sc.v_o - load.external_force;
  return rhs0 / h.a00;
}

Accel hf_accel(const ContinuousState& s, const ActuationInput& u,
               const ActuatorParams& p, const LoadScenario& load,
               const ExtraForces& extra) {
  double mu1 = p.line1.reflected_inertia();
  double mu2 = p.line2.reflected_inertia();
  double v2 = s.v_o;  // all slave flow comes from M2
  double f2 = branch2(u, p, v2);
  Accel a;
  a.vdot_o = (f2 + extra.on_m2 + extra.on_output -
              load.output_loss_coeff * s.v_o - load.external_force) /
             (load.output_mass + mu2);
  // M1 decoupled on the reservoir path: no throttle, no line force.
  double f1 = line_drive_force(p.line1, u.I1, s.v1) -
              p.line1.viscous_loss_coeff * s.v1;
  a.vdot_1 = (f1 + extra.on_m1) / mu1;
  return a;
}

double hs_accel(const ContinuousState& s, const ActuationInput& u,
                const ActuatorParams& p, const LoadScenario& load,
                const ExtraForces& extra) {
  double mu1 = p.line1.reflected_inertia();
  double f1 = line_drive_force(p.line1, u.I1, s.v_o) -
              p.line1.viscous_loss_coeff * s.v_o -
              throttle_force(u.valve_angle, s.v_o, p.fluid, p.valve);
  return (f1 + extra.on_m1 + extra.on_output -
          load.output_loss_coeff * s.v_o - load.external_force) /
         (load.output_mass + mu1);
}

double pinned_accel_open(const ContinuousState& s, const ActuationInput& u,
                         const ActuatorParams& p, const ExtraForces& extra,
                         double* line_force) {
  double mu1 = p.line1.reflected_inertia();
  double mu2 = p.line2.reflected_inertia();
  double v2 = -s.v1;  // circulation between the masters
  double a1 = branch1(s, u, p, /*valve_open=*/true) + extra.on_m1;
  double a2 = branch2(u, p, v2) + extra.on_m2;
  double vdot1 = (a1 - a2) / (mu1 + mu2);
  if (line_force) *line_force = (mu2 * a1 + mu1 * a2) / (mu1 + mu2);
  return vdot1;
}

double pinned_accel_closed(const ContinuousState& s, const ActuationInput& u,
                           const ActuatorParams& p, const ExtraForces& extra,
                           double* line_force) {
  double mu1 = p.line1.reflected_inertia();
  double f1 = line_drive_force(p.line1, u.I1, s.v1) -
              p.line1.viscous_loss_coeff * s.v1;
  if (line_force) *line_force = branch2(u, p, 0.0) + extra.on_m2;
  return (f1 + extra.on_m1) / mu1;
}

OutputForce output_force_and_pressure(double vdot_o, const ContinuousState& s,
                                      const ActuatorParams& p,
                                      const LoadScenario& load,
                                      double extra_on_output) {
  OutputForce out;
  out.force = load.output_mass * vdot_o + load.output_loss_coeff * s.v_o +
              load.external_force - extra_on_output;
  out.pressure = out.force / p.fluid.cylinder_piston_area;
  out.over_rating = std::abs(out.pressure) > p.cylinder_pressure_rating;
  return out;
}

}  // namespace bimodal
