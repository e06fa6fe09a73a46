#include "bimodal/analysis.hpp"

#include <cmath>
#include <sstream>

#include "bimodal/csv.hpp"
#include "bimodal/dynamics.hpp"
#include "bimodal/valve.hpp"

namespace bimodal {

namespace {
std::string fd(double v) { return csv::format_double(v); }
}

std::vector<CapabilityRow> capability_table(const ActuatorParams& p) {
  DerivedConstants d = derived_constants(p);
  const LoadScenario& swing = p.scenarios.at(0);
  const LoadScenario& stance = p.scenarios.at(1);

  CapabilityRow hs;
  hs.mode = "HS";
  hs.mA = d.mA_hs;
  hs.Fmax = d.Fmax_hs;
  hs.vmax = d.vmax_hs;
  hs.a_swing = (d.Fmax_hs - swing.external_force) / (swing.output_mass + d.mA_hs);
  hs.a_stance = (d.Fmax_hs - stance.external_force) / (stance.output_mass + d.mA_hs);
  hs.a_swing_published = 11.5;
  hs.a_stance_published = -1.1;

  CapabilityRow hf;
  hf.mode = "HF";
  hf.mA = d.mA_hf;
  hf.Fmax = d.Fmax_hf;
  hf.vmax = d.vmax_hf;
  hf.a_swing = (d.Fmax_hf - swing.external_force) / (swing.output_mass + d.mA_hf);
  hf.a_stance = (d.Fmax_hf - stance.external_force) / (stance.output_mass + d.mA_hf);
  hf.a_swing_published = 3.9;
  hf.a_stance_published = 3.5;

  return {hs, hf};
}

std::string capability_csv(const std::vector<CapabilityRow>& rows) {
  std::ostringstream o;
  o << "mode,m_A_kg,F_max_N,v_max_mps,a_swing_mps2,a_stance_mps2,"
       "a_swing_published_mps2,a_stance_published_mps2,frame\n";
  for (const auto& r : rows) {
    o << r.mode << ',' << fd(r.mA) << ',' << fd(r.Fmax) << ',' << fd(r.vmax)
      << ',' << fd(r.a_swing) << ',' << fd(r.a_stance) << ','
      << fd(r.a_swing_published) << ',' << fd(r.a_stance_published)
      << ",piston\n";
  }
  return o.str();
}

namespace {

QuadrantRegion rectangle(const std::string& label, double vmax, double fmax) {
  QuadrantRegion r;
  r.label = label;
  r.boundary = {{-vmax, -fmax}, {vmax, -fmax}, {vmax, fmax},
                {-vmax, fmax}, {-vmax, -fmax}};
  return r;
}

double braking_bound(const ActuatorParams& p, double v) {
  double k = loss_coefficient(p.analysis.quadrant_max_throttle_angle, p.valve);
  double b = 0.5 * k * v * v * p.fluid.density * p.valve.bore_area();
  return std::min(b, p.analysis.quadrant_force_cap);
}

}  // namespace

bool braking_region_contains(const ActuatorParams& p, double v, double F) {
  if (v == 0.0 || F == 0.0) return false;
  if (v * F > 0.0) return false;  // braking means force opposing velocity
  if (std::abs(v) > p.analysis.quadrant_speed_cap) return false;
  return std::abs(F) <= braking_bound(p, v);
}

std::vector<QuadrantRegion> quadrant_map(const ActuatorParams& p) {
  DerivedConstants d = derived_constants(p);
  std::vector<QuadrantRegion> out;
  out.push_back(rectangle("HS", d.vmax_hs, d.Fmax_hs));
  out.push_back(rectangle("HF", d.vmax_hf, d.Fmax_hf));

  const int n = 64;
  double vcap = p.analysis.quadrant_speed_cap;

  QuadrantRegion q2;  // v > 0, F < 0
  q2.label = "BRAKE_QII";
  q2.boundary.push_back({0.0, 0.0});
  q2.boundary.push_back({vcap, 0.0});
  for (int i = n; i >= 1; --i) {
    double v = vcap * double(i) / n;
    q2.boundary.push_back({v, -braking_bound(p, v)});
  }
  q2.boundary.push_back({0.0, 0.0});

  QuadrantRegion q4;  // v < 0, F > 0
  q4.label = "BRAKE_QIV";
  q4.boundary.push_back({0.0, 0.0});
  q4.boundary.push_back({-vcap, 0.0});
  for (int i = n; i >= 1; --i) {
    double v = -vcap * double(i) / n;
    q4.boundary.push_back({v, braking_bound(p, v)});
  }
  q4.boundary.push_back({0.0, 0.0});

  out.push_back(q2);
  out.push_back(q4);
  return out;
}

std::string quadrant_csv(const std::vector<QuadrantRegion>& regions) {
  std::ostringstream o;
  o << "region,vertex,v_mps,F_N\n";
  for (const auto& r : regions) {
    for (size_t i = 0; i < r.boundary.size(); ++i)
      o << r.label << ',' << i << ',' << fd(r.boundary[i].first) << ','
        << fd(r.boundary[i].second) << '\n';
  }
  return o.str();
}

bool region_contains(const QuadrantRegion& region, double v, double F) {
  // Ray casting over the closed polyline.
  bool inside = false;
  const auto& b = region.boundary;
  for (size_t i = 0, j = b.size() - 1; i < b.size(); j = i++) {
    double xi = b[i].first, yi = b[i].second;
    double xj = b[j].first, yj = b[j].second;
    bool crosses = ((yi > F) != (yj > F)) &&
                   (v < (xj - xi) * (F - yi) / (yj - yi) + xi);
    if (crosses) inside = !inside;
  }
  return inside;
}

std::pair<double, double> payload_capacity(const ActuatorParams& p,
                                           double force_per_kg) {
  DerivedConstants d = derived_constants(p);
  return {d.Fmax_hs / force_per_kg, d.Fmax_hf / force_per_kg};
}

}  // namespace bimodal
