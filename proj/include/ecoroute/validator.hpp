#pragma once

// Time-domain replay of a TripSolution. Controls are held piecewise constant
// over their native grids (distance while driving, tau while charging); the
// battery power is recomputed from the power balance at every RK4 stage.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ecoroute/scenario.hpp"
#include "ecoroute/trip_solution.hpp"

namespace ecoroute {

enum class SimMode { kDriving = 0, kCharging = 1 };

struct SimSample {
  double t = 0.0;  // s
  double s = 0.0;  // m
  double v = 0.0;  // m/s, 0 while charging
  double soc = 0.0;
  double t_b = 0.0;     // degC
  double p_b = 0.0;     // W
  double p_grid = 0.0;  // W
  SimMode mode = SimMode::kDriving;
  // Held controls and power split, for constraint checks and bookkeeping.
  double a_t = 0.0;
  double p_hvch = 0.0;
  double p_hvac = 0.0;
  double p_loads = 0.0;  // propulsion + HVCH + HVAC + cabin + aux, W
  double p_joule = 0.0;  // W
  int charger = -1;      // charger index while charging
};

struct SimEvent {
  int charger = 0;
  double arrival = 0.0;    // s
  double departure = 0.0;  // s
};

struct SimTrace {
  std::vector<SimSample> samples;
  std::vector<SimEvent> events;

  int mode_switches() const;
  double trip_time() const { return samples.empty() ? 0.0 : samples.back().t; }
};

/// RK4 in time with step `dt`, shortened where needed to land exactly on
/// control nodes. Throws std::out_of_range for controls that do not cover
/// the route and std::domain_error for non-finite states or a stalled
/// vehicle.
SimTrace simulate_time_domain(const Scenario& scn, const TripSolution& sol,
                              double dt = 0.1);

struct FamilyResult {
  double max_violation = 0.0;  // scaled by the bound range
  bool pass = true;
};

struct ValidationReport {
  double tolerance = 1e-3;
  std::map<std::string, FamilyResult> families;
  double trip_time = 0.0;      // s
  double charging_time = 0.0;  // s
  double final_soc = 0.0;
  double final_t_b = 0.0;
  CostBreakdown costs;
  // Energy bookkeeping over the whole trace, J.
  double battery_energy_out = 0.0;  // integral of P_b
  double battery_throughput = 0.0;  // integral of |P_b|
  double load_energy = 0.0;
  double joule_energy = 0.0;
  double grid_energy = 0.0;
  double chemical_energy = 0.0;  // from the SoC trajectory
  double energy_balance_rel_error = 0.0;  // relative to the throughput
  bool pass = true;
};

/// Scaled violation per constraint family; pass iff all families are within
/// `tolerance`. Costs use the scenario's trip-time weight.
ValidationReport check_constraints(const SimTrace& trace, const Scenario& scn,
                                   double tolerance = 1e-3);

/// Costs recomputed from the trace: energy from the integrated grid power,
/// occupancy from the charging durations, trip cost from the final time.
CostBreakdown cost_accounting(const SimTrace& trace, const Scenario& scn,
                              double c_t_trip);

std::string to_json(const ValidationReport& report);
void write_trace_csv(const std::filesystem::path& path, const SimTrace& trace);

}  // namespace ecoroute
