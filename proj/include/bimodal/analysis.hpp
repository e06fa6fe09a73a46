// Static design analyses: the per-mode capability table, the force-speed
// operating-region map (driving rectangles plus the throttle braking
// regions), and payload capacity. All emitted as CSV.
#pragma once

#include <string>
#include <vector>

#include "bimodal/params.hpp"

namespace bimodal {

struct CapabilityRow {
  std::string mode;        // "HS" or "HF"
  double mA = 0.0;         // kg
  double Fmax = 0.0;       // N
  double vmax = 0.0;       // m/s
  double a_swing = 0.0;    // m/s², piston frame
  double a_stance = 0.0;   // m/s², piston frame
  double a_swing_published = 0.0;   // as printed, retained for comparison
  double a_stance_published = 0.0;
};

// Swing row uses scenarios[0], stance row scenarios[1] of the params.
// Accelerations are evaluated at the output piston with maximum current;
// the published values use a different (unstated) reporting frame and are
// carried alongside rather than reconciled.
std::vector<CapabilityRow> capability_table(const ActuatorParams& p);
std::string capability_csv(const std::vector<CapabilityRow>& rows);

struct QuadrantRegion {
  std::string label;
  // Closed polyline, first vertex repeated at the end.
  std::vector<std::pair<double, double>> boundary;  // (v m/s, F N)
};

// HS/HF driving rectangles plus the quadrant II/IV braking regions bounded
// by the throttle force at the configured maximum useful angle, clipped to
// the analysis force/speed window.
std::vector<QuadrantRegion> quadrant_map(const ActuatorParams& p);
std::string quadrant_csv(const std::vector<QuadrantRegion>& regions);
bool region_contains(const QuadrantRegion& region, double v, double F);

// Braking-region membership in closed form (what the polyline discretizes).
bool braking_region_contains(const ActuatorParams& p, double v, double F);

// Payload the actuator can sustain per mode, F_max / force_per_kg.
std::pair<double, double> payload_capacity(const ActuatorParams& p,
                                           double force_per_kg);

}  // namespace bimodal
