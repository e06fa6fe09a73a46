// Command-line front end: scenario simulation, the static analyses, and
// config checking. Exit codes: 0 ok, 1 config error, 2 simulation
// instability, 3 failed --strict summary checks.
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bimodal/analysis.hpp"
#include "bimodal/csv.hpp"
#include "bimodal/simulator.hpp"
#include "bimodal/valve.hpp"

namespace fs = std::filesystem;
using namespace bimodal;

namespace {

struct CommonOpts {
  std::string config;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
};

ActuatorParams load_params(const CommonOpts& opts,
                           std::vector<std::string>* warnings) {
  KeyValueFile kv = opts.config.empty()
                        ? KeyValueFile::parse_text("schema_version = 1.0.0\n",
                                                   "<builtin defaults>")
                        : KeyValueFile::parse_file(opts.config);
  for (const auto& ov : opts.overrides) kv.apply_override(ov);
  return params_from_kv(kv, warnings);
}

void ensure_out_dir(const std::string& dir) {
  if (!dir.empty() && dir != ".") fs::create_directories(dir);
}

std::string resolve_scenario(const std::string& name,
                             const std::string& scenario_dir) {
  if (name.find('/') != std::string::npos ||
      (name.size() > 4 && name.compare(name.size() - 4, 4, ".cfg") == 0))
    return name;
  return scenario_dir + "/" + name + ".cfg";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bimodal hydrostatic actuator simulation and design analysis"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonOpts opts;
  std::string scenario_dir = "configs/scenarios";
  bool strict = false;
  double dt_override = 0.0;

  app.add_option("--config", opts.config, "actuator config file");
  app.add_option("--out", opts.out_dir, "output directory");
  app.add_option("--override", opts.overrides,
                 "KEY=VALUE config override (repeatable)");
  app.add_flag("--strict", strict, "exit 3 when scenario checks fail");
  app.add_option("--dt", dt_override, "integrator substep override, seconds");
  app.add_option("--scenario-dir", scenario_dir,
                 "directory holding <name>.cfg scenario files");

  auto* sim = app.add_subcommand("simulate", "run a scenario, write trace + summary");
  std::string scenario_name;
  sim->add_option("scenario", scenario_name,
                  "built-in name (gait, drop, swing-only, lift-only) or a .cfg path")
      ->required();

  auto* analyze = app.add_subcommand("analyze", "emit analysis CSV artifacts");
  std::string which;
  analyze->add_option("which", which, "capability | quadrant | valve-map")->required();
  std::string material_name = "al7075";
  double map_d_min = 4e-3, map_d_max = 16e-3, map_dt_min = 0.02, map_dt_max = 0.5;
  size_t map_n_d = 25, map_n_dt = 25;
  analyze->add_option("--material", material_name, "valve-map material name");
  analyze->add_option("--d-min", map_d_min, "valve-map bore minimum, m");
  analyze->add_option("--d-max", map_d_max, "valve-map bore maximum, m");
  analyze->add_option("--dt-min", map_dt_min, "valve-map cycle time minimum, s");
  analyze->add_option("--dt-max", map_dt_max, "valve-map cycle time maximum, s");
  analyze->add_option("--nd", map_n_d, "valve-map bore grid points");
  analyze->add_option("--ndt", map_n_dt, "valve-map cycle grid points");

  auto* check = app.add_subcommand("check", "validate config, print derived constants");

  CLI11_PARSE(app, argc, argv);

  std::vector<std::string> warnings;
  ActuatorParams params;
  try {
    params = load_params(opts, &warnings);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    ensure_out_dir(opts.out_dir);

    if (*check) {
      DerivedConstants d = derived_constants(params);
      std::cout << "config ok (schema " << params.schema_version << ")\n"
                << "  T1 = " << d.T1 << " 1/m\n"
                << "  T2 = " << d.T2 << " 1/m\n"
                << "  HS: m_A = " << d.mA_hs << " kg, F_max = " << d.Fmax_hs
                << " N, v_max = " << d.vmax_hs << " m/s\n"
                << "  HF: m_A = " << d.mA_hf << " kg, F_max = " << d.Fmax_hf
                << " N, v_max = " << d.vmax_hf << " m/s\n";
      for (const auto& w : warnings) std::cout << "  warning: " << w << "\n";
      return 0;
    }

    if (*sim) {
      Scenario sc;
      try {
        sc = load_scenario(resolve_scenario(scenario_name, scenario_dir));
      } catch (const ConfigError& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return 1;
      }
      if (dt_override > 0.0) sc.dt = dt_override;

      SimTrace trace;
      try {
        trace = run_scenario(sc, params);
      } catch (const SimulationError& e) {
        std::cerr << "simulation unstable: " << e.what() << "\n";
        return 2;
      }
      std::string base = opts.out_dir + "/" + sc.name;
      csv::write_file(base + "_trace.csv", trace.to_csv());
      std::string summary = summary_text(trace, sc);
      csv::write_file(base + "_summary.txt", summary);
      std::cout << summary;
      for (const auto& w : warnings) std::cout << "warning: " << w << "\n";
      if (strict && !check_violations(trace, sc).empty()) return 3;
      return 0;
    }

    if (*analyze) {
      if (which == "capability") {
        auto rows = capability_table(params);
        csv::write_file(opts.out_dir + "/capability_table.csv", capability_csv(rows));
        std::cout << "wrote capability_table.csv (" << rows.size() << " rows)\n";
      } else if (which == "quadrant") {
        auto regions = quadrant_map(params);
        csv::write_file(opts.out_dir + "/quadrant_regions.csv", quadrant_csv(regions));
        std::cout << "wrote quadrant_regions.csv (" << regions.size() << " regions)\n";
      } else if (which == "valve-map") {
        const MaterialSpec* mat = params.find_material(material_name);
        if (!mat) {
          std::cerr << "unknown material `" << material_name << "`\n";
          return 1;
        }
        MassMap map = mass_map(map_d_min, map_d_max, map_n_d, map_dt_min,
                               map_dt_max, map_n_dt, *mat, params.valve_design);
        csv::write_file(opts.out_dir + "/valve_mass_map.csv", mass_map_csv(map));
        std::cout << "wrote valve_mass_map.csv (" << map.cells.size() << " cells)\n";
      } else {
        std::cerr << "unknown analysis `" << which
                  << "` (capability | quadrant | valve-map)\n";
        return 1;
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
