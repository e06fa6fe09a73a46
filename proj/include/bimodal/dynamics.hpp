// Lumped-parameter dynamics of the two-master hydrostatic circuit.
//
// Generalized coordinates are the output piston position x_o and the M1
// piston position x1; with the valve path open the incompressibility
// constraint ties the M2 piston to x2 = x_o - x1. With the valve fully
// closed, M2 feeds the output alone (v2 = v_o) and M1 runs free against the
// reservoir. Partially closed valves stay on the full model with the
// throttling force; full closure swaps to the constrained model so the loss
// coefficient never has to diverge.
#pragma once

#include <vector>

#include "bimodal/params.hpp"

namespace bimodal {

struct ContinuousState {
  double x_o = 0.0, v_o = 0.0;  // output piston
  double x1 = 0.0, v1 = 0.0;    // M1 piston
  double x2 = 0.0;              // M2 piston (x_o - x1 while the path is open)
  double valve_angle = 0.0;     // rad, 0 = fully open, pi/2 = fully closed
};

struct ActuationInput {
  double I1 = 0.0;          // A
  double I2 = 0.0;          // A
  double valve_angle = 0.0;  // rad
};

struct Mat2 {
  double a00 = 0.0, a01 = 0.0, a10 = 0.0, a11 = 0.0;
  double det() const { return a00 * a11 - a01 * a10; }
  // Solves A x = b; throws std::domain_error when singular.
  void solve(double b0, double b1, double& x0, double& x1) const;
};

struct Accel {
  double vdot_o = 0.0;
  double vdot_1 = 0.0;
};

// Generalized external forces injected by the simulator (end stops, ground);
// fo acts on the output coordinate, f1 on the M1 piston, f2 on the M2 piston.
struct ExtraForces {
  double on_output = 0.0;  // N along +x_o
  double on_m1 = 0.0;      // N along +x1
  double on_m2 = 0.0;      // N along +x2
};

// Inertia matrix of the open-valve model for the given output mass.
Mat2 mass_matrix(const ActuatorParams& p, double output_mass);

// Throttling force opposing M1 piston motion, 0.5 sgn(v1) k(phi) v1^2 rho A.
double throttle_force(double phi, double v1, const FluidSpec& fluid,
                      const ValveSpec& valve);

// Piston drive force of a line, k*T*I, gated to zero when the motor is
// already at rated speed in the drive direction (the drive cannot push
// past its speed limit; braking torque is still available).
double line_drive_force(const MotorScrewLine& line, double current,
                        double piston_velocity);

// Full 2-DoF model, valve open or partially closed.
Accel full_accel(const ContinuousState& s, const ActuationInput& u,
                 const ActuatorParams& p, const LoadScenario& load,
                 const ExtraForces& extra = {});

// Full model with the M1 coordinate frozen (v1 = vdot1 = 0); used to check
// the closed-valve reduction against the dedicated high-force model.
double constrained_full_accel(const ContinuousState& s, const ActuationInput& u,
                              const ActuatorParams& p, const LoadScenario& load,
                              const ExtraForces& extra = {});

// Closed-valve model: output driven by M2 alone, M1 free on the reservoir.
Accel hf_accel(const ContinuousState& s, const ActuationInput& u,
               const ActuatorParams& p, const LoadScenario& load,
               const ExtraForces& extra = {});

// Reduced high-speed approximation (valve not fully closed); line 2's motion
// is neglected, so v1 is taken equal to v_o.
double hs_accel(const ContinuousState& s, const ActuationInput& u,
                const ActuatorParams& p, const LoadScenario& load,
                const ExtraForces& extra = {});

// Output-pinned internal dynamics (v_o = 0): with the valve open the fluid
// can still circulate between the masters (v2 = -v1); closed, M1 is free.
// Returns vdot_1 and, through line_force, the shared line force on the
// output piston.
double pinned_accel_open(const ContinuousState& s, const ActuationInput& u,
                         const ActuatorParams& p, const ExtraForces& extra,
                         double* line_force);
double pinned_accel_closed(const ContinuousState& s, const ActuationInput& u,
                           const ActuatorParams& p, const ExtraForces& extra,
                           double* line_force);

// Hydraulic force on the output piston and the corresponding line pressure,
// from the output-side balance F = m_o vdot_o + c_o v_o + f_e - extra.
// `vdot_o` must come from the active regime's acceleration.
struct OutputForce {
  double force = 0.0;     // N, extension positive
  double pressure = 0.0;  // Pa
  bool over_rating = false;
};
OutputForce output_force_and_pressure(double vdot_o, const ContinuousState& s,
                                      const ActuatorParams& p,
                                      const LoadScenario& load,
                                      double extra_on_output = 0.0);

}  // namespace bimodal
